#pragma once

// Two-stage training.
//
// Stage 1 fits encoder + emotion projection to single-utterance labels, so
// q* holds emotion probabilities. Stage 2 fits the context model on whole
// dialogues, optionally fine-tuning the upstream parameters as well.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "seover/corpus.hpp"
#include "seover/errors.hpp"
#include "seover/metrics.hpp"
#include "seover/model.hpp"
#include "seover/optim.hpp"

namespace seover {

struct TrainConfig {
  std::size_t stage1_epochs = 30;
  std::size_t stage2_epochs = 30;
  OptimizerConfig optimizer;
  std::size_t batch_size = 8;  // utterances per step in stage 1, dialogues in stage 2
  bool freeze_upstream = false;
  std::uint64_t seed = 13;

  void validate() const {
    if (!(optimizer.learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  }
};

struct EpochRecord {
  int stage = 1;
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double train_accuracy = 0.0;
  double train_weighted_f1 = 0.0;
  std::optional<double> dev_accuracy;
  std::optional<double> dev_weighted_f1;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double wall_clock_seconds = 0.0;
  std::string checkpoint_path;

  std::vector<double> losses(int stage) const {
    std::vector<double> out;
    for (const auto& e : epochs)
      if (e.stage == stage) out.push_back(e.loss);
    return out;
  }
  const EpochRecord* last(int stage) const {
    const EpochRecord* r = nullptr;
    for (const auto& e : epochs)
      if (e.stage == stage) r = &e;
    return r;
  }
};

/// Dialogue-level parallelism cap from SEOVER_THREADS (default 1).
inline std::size_t thread_cap() {
  if (const char* s = std::getenv("SEOVER_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end != s && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

/// Runs `fn(i)` for i in [0, n) over up to `threads` workers; each index is
/// handled by exactly one worker so outputs written per index stay ordered.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct DialoguePrediction {
  std::vector<std::size_t> predicted;          // context-model labels
  std::vector<std::size_t> stage1_predicted;   // argmax q*
  std::vector<std::vector<double>> q_star;
};

/// Eval-mode predictions for every dialogue, in corpus order.
inline std::vector<DialoguePrediction> predict_corpus(const SeoverModel& model, const DialogueCorpus& corpus,
                                                      std::size_t threads = thread_cap()) {
  std::vector<DialoguePrediction> out(corpus.num_dialogues());
  parallel_for(corpus.num_dialogues(), threads, [&](std::size_t i) {
    NoGradGuard ng;
    const auto res = model.forward_dialogue(corpus.dialogues()[i], Mode::eval);
    if (!all_finite(res.logits)) throw NumericError("non-finite logits in dialogue '" + corpus.dialogues()[i].id + "'");
    DialoguePrediction p;
    p.predicted = classify(res.logits);
    for (const auto& qs : res.q_star) {
      p.stage1_predicted.push_back(emotion_prediction(qs));
      p.q_star.emplace_back(qs.values().begin(), qs.values().end());
    }
    out[i] = std::move(p);
  });
  return out;
}

struct LabeledPredictions {
  std::vector<std::size_t> golds, context_preds, stage1_preds;
};

inline LabeledPredictions collect_predictions(const SeoverModel& model, const DialogueCorpus& corpus,
                                              std::size_t threads = thread_cap()) {
  const auto preds = predict_corpus(model, corpus, threads);
  LabeledPredictions out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto golds = corpus.label_ids(corpus.dialogues()[i]);
    out.golds.insert(out.golds.end(), golds.begin(), golds.end());
    out.context_preds.insert(out.context_preds.end(), preds[i].predicted.begin(), preds[i].predicted.end());
    out.stage1_preds.insert(out.stage1_preds.end(), preds[i].stage1_predicted.begin(), preds[i].stage1_predicted.end());
  }
  return out;
}

/// Evaluation of the context model's predictions.
inline EvalReport evaluate_context(const SeoverModel& model, const DialogueCorpus& corpus,
                                   std::size_t threads = thread_cap()) {
  const auto p = collect_predictions(model, corpus, threads);
  return evaluate(p.golds, p.context_preds, model.k_star());
}

/// Evaluation of the stage-1 (argmax q*) predictions.
inline EvalReport evaluate_stage1(const SeoverModel& model, const DialogueCorpus& corpus) {
  std::vector<std::size_t> golds, preds;
  NoGradGuard ng;
  for (const auto& d : corpus.dialogues()) {
    const auto ids = corpus.label_ids(d);
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      const auto [q, logits] = model.encode(model.tokenize(d.turns[i].text), Mode::eval);
      golds.push_back(ids[i]);
      preds.push_back(argmax(logits.values()));
    }
  }
  return evaluate(golds, preds, model.k_star());
}

namespace detail {

inline void require_labeled(const DialogueCorpus& corpus, const char* stage) {
  if (corpus.empty()) throw DataError(std::string(stage) + ": empty training corpus");
  if (!corpus.fully_labeled()) throw DataError(std::string(stage) + ": training corpus has unlabeled utterances");
}

inline void check_finite_loss(double loss, int stage, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw NumericError("stage " + std::to_string(stage) + " epoch " + std::to_string(epoch) + ": non-finite loss");
  }
}

}  // namespace detail

/// Fits encoder and projection to utterance labels with cross-entropy on
/// the pre-softmax projection scores. Utterances are shuffled per epoch.
inline TrainReport train_stage1(SeoverModel& model, const DialogueCorpus& train, const DialogueCorpus* dev,
                                const TrainConfig& config) {
  config.validate();
  detail::require_labeled(train, "stage 1");
  const auto start = std::chrono::steady_clock::now();

  struct Item {
    TokenSequence tokens;
    std::size_t label;
  };
  std::vector<Item> items;
  for (const auto& d : train.dialogues()) {
    const auto ids = train.label_ids(d);
    for (std::size_t i = 0; i < d.turns.size(); ++i) items.push_back({model.tokenize(d.turns[i].text), ids[i]});
  }

  Optimizer opt(model.upstream_parameters(), config.optimizer);
  Rng order_rng(config.seed ^ 0x5eed0001u);
  Rng dropout_rng(config.seed ^ 0x5eed0002u);
  std::vector<std::size_t> order(items.size());
  TrainReport report;

  for (std::size_t epoch = 1; epoch <= config.stage1_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      std::vector<Tensor> rows;
      std::vector<std::size_t> labels;
      for (std::size_t k = b; k < e; ++k) {
        const auto& it = items[order[k]];
        rows.push_back(model.encode(it.tokens, Mode::train, &dropout_rng).second);
        labels.push_back(it.label);
      }
      const Tensor loss = cross_entropy(stack_rows(rows), labels);
      detail::check_finite_loss(loss.item(), 1, epoch);
      opt.zero_grad();
      backward(loss);
      opt.step();
      loss_sum += loss.item();
      ++batches;
    }
    EpochRecord rec;
    rec.stage = 1;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(batches);
    const auto tr = evaluate_stage1(model, train);
    rec.train_accuracy = tr.accuracy;
    rec.train_weighted_f1 = tr.weighted_f1;
    if (dev && !dev->empty()) {
      const auto dv = evaluate_stage1(model, *dev);
      rec.dev_accuracy = dv.accuracy;
      rec.dev_weighted_f1 = dv.weighted_f1;
    }
    report.epochs.push_back(rec);
  }
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Fits the context model over whole dialogues (shuffled at dialogue
/// granularity). Upstream parameters are updated unless frozen.
inline TrainReport train_stage2(SeoverModel& model, const DialogueCorpus& train, const DialogueCorpus* dev,
                                const TrainConfig& config) {
  config.validate();
  detail::require_labeled(train, "stage 2");
  if (model.label_set().size() != model.context().config().n_classes) {
    throw ConfigError("stage 2: context model classes do not match the label set");
  }
  const auto start = std::chrono::steady_clock::now();

  struct Item {
    std::vector<TokenSequence> turns;
    std::vector<std::size_t> speakers, labels;
  };
  std::vector<Item> items;
  for (const auto& d : train.dialogues()) {
    Item it;
    for (const auto& u : d.turns) it.turns.push_back(model.tokenize(u.text));
    it.speakers = d.speaker_ids();
    it.labels = train.label_ids(d);
    items.push_back(std::move(it));
  }

  NamedParams trainable = model.context_parameters();
  if (!config.freeze_upstream) {
    // the projection only feeds the context model under SEOV fusion
    NamedParams up = model.config().fusion == FusionMode::seov ? model.upstream_parameters()
                                                                : model.encoder_parameters();
    trainable.insert(trainable.begin(), up.begin(), up.end());
  }
  Optimizer opt(trainable, config.optimizer);
  Rng order_rng(config.seed ^ 0x5eed0003u);
  Rng dropout_rng(config.seed ^ 0x5eed0004u);
  std::vector<std::size_t> order(items.size());
  TrainReport report;

  for (std::size_t epoch = 1; epoch <= config.stage2_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      std::vector<Tensor> rows;
      std::vector<std::size_t> labels;
      for (std::size_t k = b; k < e; ++k) {
        const auto& it = items[order[k]];
        const auto out = model.forward_dialogue(it.turns, it.speakers, Mode::train, &dropout_rng, config.freeze_upstream);
        for (std::size_t t = 0; t < it.turns.size(); ++t) rows.push_back(row(out.logits, t));
        labels.insert(labels.end(), it.labels.begin(), it.labels.end());
      }
      // mean over every utterance in the batch
      const Tensor loss = cross_entropy(stack_rows(rows), labels);
      detail::check_finite_loss(loss.item(), 2, epoch);
      opt.zero_grad();
      backward(loss);
      opt.step();
      loss_sum += loss.item();
      ++batches;
    }
    EpochRecord rec;
    rec.stage = 2;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(batches);
    const auto tr = evaluate_context(model, train);
    rec.train_accuracy = tr.accuracy;
    rec.train_weighted_f1 = tr.weighted_f1;
    if (dev && !dev->empty()) {
      const auto dv = evaluate_context(model, *dev);
      rec.dev_accuracy = dv.accuracy;
      rec.dev_weighted_f1 = dv.weighted_f1;
    }
    report.epochs.push_back(rec);
  }
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// One JSON object per epoch. Wall-clock time is left out so reports from
/// identical runs compare byte-for-byte.
inline void write_train_log(std::ostream& os, const TrainReport& r) {
  for (const auto& e : r.epochs) {
    nlohmann::ordered_json j;
    j["stage"] = e.stage;
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["train_accuracy"] = e.train_accuracy;
    j["train_weighted_f1"] = e.train_weighted_f1;
    j["dev_accuracy"] = e.dev_accuracy ? nlohmann::ordered_json(*e.dev_accuracy) : nlohmann::ordered_json(nullptr);
    j["dev_weighted_f1"] = e.dev_weighted_f1 ? nlohmann::ordered_json(*e.dev_weighted_f1) : nlohmann::ordered_json(nullptr);
    os << j.dump() << '\n';
  }
}

inline void write_train_summary(std::ostream& os, const TrainReport& r) {
  os << "stage\tepoch\tloss\ttrain_acc\ttrain_wf1\tdev_acc\tdev_wf1\n";
  os << std::fixed << std::setprecision(6);
  for (const auto& e : r.epochs) {
    os << e.stage << '\t' << e.epoch << '\t' << e.loss << '\t' << e.train_accuracy << '\t' << e.train_weighted_f1;
    if (e.dev_accuracy) {
      os << '\t' << *e.dev_accuracy << '\t' << *e.dev_weighted_f1;
    } else {
      os << "\t-\t-";
    }
    os << '\n';
  }
}

}  // namespace seover
