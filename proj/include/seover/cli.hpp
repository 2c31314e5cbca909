#pragma once

// Command-line front end: train, eval, predict, export-heatmap.
//
// Configuration is a JSON file (schema in README); flags override it.
// Relative paths inside the config resolve against the config file's
// directory. Exit codes: 0 ok, 2 config, 3 data, 4 numeric.

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seover/checkpoint.hpp"
#include "seover/corpus.hpp"
#include "seover/errors.hpp"
#include "seover/metrics.hpp"
#include "seover/model.hpp"
#include "seover/text.hpp"
#include "seover/training.hpp"

namespace seover::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

struct RunConfig {
  fs::path corpus;
  fs::path out_dir = "runs/default";
  std::optional<fs::path> checkpoint;
  LabelSet label_set = meld_labels();
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
  std::size_t vocab_min_frequency = 1;
  std::size_t vocab_max_size = 10000;
  ModelConfig model;
  TrainConfig train;

  std::size_t context_input_dim() const {
    return fused_dim(model.fusion, model.encoder.d_model, label_set.size());
  }
};

/// Flag values shared by every subcommand; unset flags leave the config alone.
struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string fusion;
  std::string label_set;
  std::string checkpoint;
  std::string out;
};

namespace detail {

template <typename T>
T take(nlohmann::json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  T v;
  try {
    v = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
  obj.erase(it);
  return v;
}

inline void reject_unknown(const nlohmann::json& obj, const std::string& where) {
  if (!obj.empty()) throw ConfigError("unknown config key '" + obj.begin().key() + "' in " + where);
}

inline nlohmann::json take_object(nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) return nlohmann::json::object();
  if (!it->is_object()) throw ConfigError(std::string("config key '") + key + "' must be an object");
  nlohmann::json sub = *it;
  obj.erase(it);
  return sub;
}

inline LabelSet label_set_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    auto ls = builtin_label_set(j.get<std::string>());
    if (!ls) throw ConfigError("unknown label set '" + j.get<std::string>() + "' (expected iemocap, meld or a list)");
    return *ls;
  }
  if (j.is_array()) {
    try {
      return LabelSet("custom", j.get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("label_set list: ") + e.what());
    }
  }
  throw ConfigError("label_set must be a name or a list of labels");
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text, const fs::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  if (auto corpus = detail::take<std::string>(j, "corpus", ""); !corpus.empty()) c.corpus = detail::resolve(base_dir, corpus);
  c.out_dir = detail::resolve(base_dir, detail::take<std::string>(j, "out_dir", "runs/default"));
  if (auto ck = detail::take<std::string>(j, "checkpoint", ""); !ck.empty()) c.checkpoint = detail::resolve(base_dir, ck);
  if (auto it = j.find("label_set"); it != j.end()) {
    c.label_set = detail::label_set_from_json(*it);
    j.erase(it);
  }
  c.model.fusion = parse_fusion(detail::take<std::string>(j, "fusion", "seov"));
  auto ratios = detail::take<std::vector<double>>(j, "split_ratios", {0.8, 0.1, 0.1});
  if (ratios.size() != 3) throw ConfigError("split_ratios needs three entries (train, dev, test)");
  c.split_ratios = {ratios[0], ratios[1], ratios[2]};

  auto vocab = detail::take_object(j, "vocab");
  c.vocab_min_frequency = detail::take<std::size_t>(vocab, "min_frequency", 1);
  c.vocab_max_size = detail::take<std::size_t>(vocab, "max_size", 10000);
  detail::reject_unknown(vocab, "vocab");

  auto enc = detail::take_object(j, "encoder");
  auto& e = c.model.encoder;
  e.d_model = detail::take<std::size_t>(enc, "d_model", e.d_model);
  e.n_layers = detail::take<std::size_t>(enc, "n_layers", e.n_layers);
  e.n_heads = detail::take<std::size_t>(enc, "n_heads", e.n_heads);
  e.d_ff = detail::take<std::size_t>(enc, "d_ff", e.d_ff);
  e.max_len = detail::take<std::size_t>(enc, "max_len", e.max_len);
  e.dropout_rate = detail::take<double>(enc, "dropout", e.dropout_rate);
  detail::reject_unknown(enc, "encoder");
  e.validate();

  auto ctx = detail::take_object(j, "context");
  c.model.variant = parse_variant(detail::take<std::string>(ctx, "variant", variant_name(c.model.variant)));
  c.model.hidden_dim = detail::take<std::size_t>(ctx, "hidden_dim", c.model.hidden_dim);
  detail::reject_unknown(ctx, "context");

  auto tr = detail::take_object(j, "train");
  auto& t = c.train;
  t.stage1_epochs = detail::take<std::size_t>(tr, "stage1_epochs", t.stage1_epochs);
  t.stage2_epochs = detail::take<std::size_t>(tr, "stage2_epochs", t.stage2_epochs);
  const auto opt = detail::take<std::string>(tr, "optimizer", "adam");
  if (opt == "adam") {
    t.optimizer.kind = OptimizerKind::adam;
  } else if (opt == "sgd") {
    t.optimizer.kind = OptimizerKind::sgd;
  } else {
    throw ConfigError("unknown optimizer '" + opt + "' (expected sgd or adam)");
  }
  t.optimizer.learning_rate = detail::take<double>(tr, "learning_rate", t.optimizer.learning_rate);
  t.optimizer.beta1 = detail::take<double>(tr, "beta1", t.optimizer.beta1);
  t.optimizer.beta2 = detail::take<double>(tr, "beta2", t.optimizer.beta2);
  t.optimizer.eps = detail::take<double>(tr, "eps", t.optimizer.eps);
  t.batch_size = detail::take<std::size_t>(tr, "batch_size", t.batch_size);
  t.freeze_upstream = detail::take<bool>(tr, "freeze_upstream", t.freeze_upstream);
  t.seed = detail::take<std::uint64_t>(tr, "seed", t.seed);
  detail::reject_unknown(tr, "train");
  t.validate();

  detail::reject_unknown(j, "config");
  return c;
}

inline RunConfig load_run_config(const Overrides& ov) {
  RunConfig c;
  if (!ov.config.empty()) {
    const fs::path p(ov.config);
    if (!fs::exists(p)) throw ConfigError("config file '" + ov.config + "' not found");
    c = parse_run_config(detail::slurp(p), p.parent_path());
  }
  if (ov.seed) c.train.seed = *ov.seed;
  if (!ov.fusion.empty()) c.model.fusion = parse_fusion(ov.fusion);
  if (!ov.label_set.empty()) c.label_set = detail::label_set_from_json(nlohmann::json(ov.label_set));
  if (!ov.checkpoint.empty()) c.checkpoint = fs::path(ov.checkpoint);
  if (!ov.out.empty()) c.out_dir = fs::path(ov.out);
  return c;
}

/// Writes `content` to a sibling temp file and renames it over `path`.
inline void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

inline DialogueCorpus load_training_corpus(const RunConfig& c) {
  if (c.corpus.empty()) throw ConfigError("no corpus path configured");
  if (!fs::exists(c.corpus)) throw ConfigError("corpus file '" + c.corpus.string() + "' not found");
  return load_corpus(c.corpus.string(), c.label_set);
}

inline fs::path model_checkpoint_path(const RunConfig& c) { return c.checkpoint.value_or(c.out_dir / "model.ckpt"); }

inline int cmd_train(const RunConfig& c, std::ostream& log) {
  const auto corpus = load_training_corpus(c);
  const auto splits = split_corpus(corpus, c.split_ratios, c.train.seed);
  if (splits.train.empty()) throw DataError("training split is empty");
  const auto vocab = build_vocabulary(splits.train, c.vocab_min_frequency, c.vocab_max_size);
  tokenize_corpus(splits.train, vocab, c.model.encoder.max_len);  // reports truncation once

  SeoverModel model(c.model, vocab, c.label_set, c.train.seed);
  const DialogueCorpus* dev = splits.dev.empty() ? nullptr : &splits.dev;

  TrainReport report = train_stage1(model, splits.train, dev, c.train);
  fs::create_directories(c.out_dir);
  save_checkpoint(model, c.out_dir / "stage1.ckpt");
  const TrainReport r2 = train_stage2(model, splits.train, dev, c.train);
  report.epochs.insert(report.epochs.end(), r2.epochs.begin(), r2.epochs.end());
  report.wall_clock_seconds += r2.wall_clock_seconds;
  const auto ckpt = model_checkpoint_path(c);
  save_checkpoint(model, ckpt);
  report.checkpoint_path = ckpt.string();

  std::ostringstream logs, summary;
  write_train_log(logs, report);
  write_train_summary(summary, report);
  write_atomic(c.out_dir / "train_log.jsonl", logs.str());
  write_atomic(c.out_dir / "train_summary.tsv", summary.str());

  log << summary.str();
  log << "checkpoint: " << report.checkpoint_path << '\n';
  log << "wall clock: " << report.wall_clock_seconds << " s\n";
  return kOk;
}

/// Checks that a checkpoint matches the run config's label set and dimensions.
inline void check_compatible(const CheckpointHeader& h, const RunConfig& c, const fs::path& ckpt) {
  const LabelSet ck = checkpoint_label_set(h);
  if (!(ck == c.label_set)) {
    throw ConfigError("label set mismatch: checkpoint '" + ckpt.string() + "' uses " + ck.name() + ", config uses " +
                      c.label_set.name());
  }
  const auto expect = [&](const char* key, std::size_t want) {
    if (h.get_size(key) != want) {
      throw ConfigError(std::string("checkpoint/config mismatch on ") + key + ": checkpoint " + h.get(key) +
                        ", config " + std::to_string(want));
    }
  };
  expect("d_model", c.model.encoder.d_model);
  expect("n_layers", c.model.encoder.n_layers);
  expect("n_heads", c.model.encoder.n_heads);
  expect("d_ff", c.model.encoder.d_ff);
  expect("hidden_dim", c.model.hidden_dim);
  expect("input_dim", c.context_input_dim());
  if (h.get("fusion") != fusion_name(c.model.fusion)) {
    throw ConfigError("checkpoint/config mismatch on fusion: checkpoint " + h.get("fusion") + ", config " +
                      fusion_name(c.model.fusion));
  }
  if (h.get("variant") != variant_name(c.model.variant)) {
    throw ConfigError("checkpoint/config mismatch on variant: checkpoint " + h.get("variant") + ", config " +
                      variant_name(c.model.variant));
  }
}

inline nlohmann::ordered_json prediction_record(nlohmann::ordered_json rec, const LabelSet& labels, std::size_t pred,
                                                const std::vector<double>& q_star) {
  rec["predicted_label"] = labels.label(pred);
  rec["emotion_vector"] = q_star;
  return rec;
}

inline int cmd_eval(const RunConfig& c, Split split, std::ostream& log) {
  const auto ckpt = model_checkpoint_path(c);
  if (!fs::exists(ckpt)) throw ConfigError("checkpoint '" + ckpt.string() + "' not found");
  check_compatible(read_checkpoint_header(ckpt), c, ckpt);
  const auto model = load_checkpoint(ckpt);
  const auto corpus = load_training_corpus(c);
  const auto splits = split_corpus(corpus, c.split_ratios, c.train.seed);
  const auto& part = split_of(splits, split);
  if (part.empty()) throw DataError(std::string("split '") + split_name(split) + "' is empty");

  const auto preds = predict_corpus(model, part);
  std::vector<std::size_t> golds, ctx;
  std::ostringstream pred_lines;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& d = part.dialogues()[i];
    const auto g = part.label_ids(d);
    golds.insert(golds.end(), g.begin(), g.end());
    ctx.insert(ctx.end(), preds[i].predicted.begin(), preds[i].predicted.end());
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      pred_lines << prediction_record(utterance_json(d.turns[t]), model.label_set(), preds[i].predicted[t],
                                      preds[i].q_star[t])
                        .dump()
                 << '\n';
    }
  }
  const auto report = evaluate(golds, ctx, model.k_star());
  const std::string row_name = std::string("SEOVER-") + (c.model.variant == ContextVariant::bclstm ? "LSTM" : "RNN");
  std::ostringstream text, tsv, cm;
  text << "split: " << split_name(split) << "  utterances: " << golds.size() << "  fusion: " << fusion_name(c.model.fusion)
       << '\n';
  text << render_f1_table(report, model.label_set(), row_name) << '\n';
  text << render_confusion(report.confusion, model.label_set());
  write_report_tsv(tsv, report, model.label_set());
  write_confusion_tsv(cm, report.confusion, model.label_set());
  const std::string s = split_name(split);
  write_atomic(c.out_dir / ("eval_" + s + ".txt"), text.str());
  write_atomic(c.out_dir / ("eval_" + s + ".tsv"), tsv.str());
  write_atomic(c.out_dir / ("confusion_" + s + ".tsv"), cm.str());
  write_atomic(c.out_dir / ("predictions_" + s + ".jsonl"), pred_lines.str());
  log << text.str();
  return kOk;
}

/// Reads prediction input: raw JSON objects (kept for echoing) plus the parsed corpus.
inline std::pair<std::vector<nlohmann::ordered_json>, DialogueCorpus> read_prediction_input(const fs::path& path,
                                                                                            const LabelSet& labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input '" + path.string() + "'");
  std::vector<nlohmann::ordered_json> raw;
  std::string line;
  std::size_t line_no = 0;
  std::ostringstream clean;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      raw.push_back(nlohmann::ordered_json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": JSON parse error: " + e.what());
    }
    clean << line << '\n';
  }
  std::istringstream cs(clean.str());
  return {std::move(raw), parse_corpus(cs, labels, LoadOptions{false})};
}

inline int cmd_predict(const fs::path& checkpoint, const fs::path& input, const fs::path& output, std::ostream& log) {
  if (!fs::exists(checkpoint)) throw ConfigError("checkpoint '" + checkpoint.string() + "' not found");
  const auto model = load_checkpoint(checkpoint);
  auto [raw, corpus] = read_prediction_input(input, model.label_set());
  const auto preds = predict_corpus(model, corpus);
  std::map<std::pair<std::string, std::size_t>, std::pair<std::size_t, const std::vector<double>*>> by_turn;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& d = corpus.dialogues()[i];
    for (std::size_t t = 0; t < d.turns.size(); ++t)
      by_turn[{d.id, t}] = {preds[i].predicted[t], &preds[i].q_star[t]};
  }
  std::ostringstream out;
  for (auto& rec : raw) {
    const auto key = std::make_pair(rec.at("dialogue_id").get<std::string>(), rec.at("turn_index").get<std::size_t>());
    const auto& [pred, qs] = by_turn.at(key);
    out << prediction_record(rec, model.label_set(), pred, *qs).dump() << '\n';
  }
  write_atomic(output, out.str());
  log << "wrote " << raw.size() << " predictions to " << output.string() << '\n';
  return kOk;
}

inline int cmd_export_heatmap(const fs::path& checkpoint, const fs::path& input, const fs::path& output,
                              std::ostream& log) {
  if (!fs::exists(checkpoint)) throw ConfigError("checkpoint '" + checkpoint.string() + "' not found");
  const auto model = load_checkpoint(checkpoint);
  auto [raw, corpus] = read_prediction_input(input, model.label_set());
  std::map<std::pair<std::string, std::size_t>, const Utterance*> by_turn;
  for (const auto& d : corpus.dialogues())
    for (const auto& u : d.turns) by_turn[{u.dialogue_id, u.turn_index}] = &u;
  std::vector<Tensor> qs;
  NoGradGuard ng;
  for (const auto& rec : raw) {
    const Utterance* u = by_turn.at({rec.at("dialogue_id").get<std::string>(), rec.at("turn_index").get<std::size_t>()});
    qs.push_back(model.encoder().encode_sentence(model.tokenize(u->text), Mode::eval));
  }
  std::ostringstream out;
  write_heatmap(out, heatmap_normalize(qs));
  write_atomic(output, out.str());
  log << "wrote " << qs.size() << " x " << model.encoder().dim() << " heatmap to " << output.string() << '\n';
  return kOk;
}

/// Entry point shared by the executable and the in-process tests.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"SEOVER conversation emotion recognition"};
  app.require_subcommand(1);
  Overrides ov;
  std::int64_t seed = -1;
  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config, "JSON run configuration");
    sub->add_option("--seed", seed, "Random seed (overrides config)");
    sub->add_option("--fusion", ov.fusion, "seov or sentence_only")->check(CLI::IsMember({"seov", "sentence_only"}));
    sub->add_option("--label-set", ov.label_set, "iemocap or meld")->check(CLI::IsMember({"iemocap", "meld", "IEMOCAP", "MELD"}));
    sub->add_option("--checkpoint", ov.checkpoint, "Checkpoint path");
    sub->add_option("--out", ov.out, "Output directory");
  };
  auto* train = app.add_subcommand("train", "Run stage 1 and stage 2 training");
  add_shared(train);
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus split");
  add_shared(eval);
  std::string split = "test";
  eval->add_option("--split", split, "train, dev or test")->check(CLI::IsMember({"train", "dev", "test"}));
  auto* predict = app.add_subcommand("predict", "Label utterances from a JSONL file");
  add_shared(predict);
  std::string input, output;
  predict->add_option("--input", input, "Input JSONL")->required();
  predict->add_option("--output", output, "Output JSONL (default <out>/predictions.jsonl)");
  auto* heat = app.add_subcommand("export-heatmap", "Export min-max normalized sentence vectors");
  add_shared(heat);
  heat->add_option("--input", input, "Input JSONL")->required();
  heat->add_option("--output", output, "Output TSV (default <out>/heatmap.tsv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    log << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  }
  if (seed >= 0) ov.seed = static_cast<std::uint64_t>(seed);

  try {
    if (*train) return cmd_train(load_run_config(ov), log);
    if (*eval) return cmd_eval(load_run_config(ov), *parse_split(split), log);
    const RunConfig c = load_run_config(ov);
    const fs::path ckpt = model_checkpoint_path(c);
    if (*predict) return cmd_predict(ckpt, input, output.empty() ? c.out_dir / "predictions.jsonl" : fs::path(output), log);
    if (*heat) return cmd_export_heatmap(ckpt, input, output.empty() ? c.out_dir / "heatmap.tsv" : fs::path(output), log);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ShapeError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  }
  return kOk;
}

}  // namespace seover::cli
