#pragma once

// Full pipeline: tokens -> sentence vectors q -> emotion vectors q* ->
// SEOVs (or q alone when ablated) -> context model logits.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "seover/context.hpp"
#include "seover/corpus.hpp"
#include "seover/errors.hpp"
#include "seover/params.hpp"
#include "seover/seov.hpp"
#include "seover/text.hpp"
#include "seover/transformer.hpp"

namespace seover {

struct ModelConfig {
  EncoderConfig encoder;
  ContextVariant variant = ContextVariant::bclstm;
  std::size_t hidden_dim = 32;
  FusionMode fusion = FusionMode::seov;
};

struct DialogueOutput {
  Tensor logits;                 // [n x M]
  std::vector<Tensor> q;         // sentence vectors
  std::vector<Tensor> q_star;    // emotion vectors
};

class SeoverModel {
 public:
  SeoverModel(const ModelConfig& config, Vocabulary vocab, LabelSet labels, std::uint64_t seed)
      : config_(config), vocab_(std::move(vocab)), labels_(std::move(labels)) {
    Rng rng(seed);
    encoder_ = SentenceEncoder(config_.encoder, vocab_.size(), rng);
    projection_ = EmotionProjection(config_.encoder.d_model, labels_.size(), rng);
    ContextModelConfig cc;
    cc.variant = config_.variant;
    cc.input_dim = fused_dim(config_.fusion, config_.encoder.d_model, labels_.size());
    cc.hidden_dim = config_.hidden_dim;
    cc.n_classes = labels_.size();
    context_ = ContextModel(cc, rng);
  }

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const LabelSet& label_set() const { return labels_; }
  const SentenceEncoder& encoder() const { return encoder_; }
  const EmotionProjection& projection() const { return projection_; }
  const ContextModel& context() const { return context_; }
  std::size_t k_star() const { return labels_.size(); }

  NamedParams upstream_parameters() const {
    NamedParams out;
    append_prefixed(out, "encoder.", encoder_.parameters());
    append_prefixed(out, "projection.", projection_.parameters());
    return out;
  }
  NamedParams encoder_parameters() const {
    NamedParams out;
    append_prefixed(out, "encoder.", encoder_.parameters());
    return out;
  }
  NamedParams context_parameters() const {
    NamedParams out;
    append_prefixed(out, "context.", context_.parameters());
    return out;
  }
  NamedParams parameters() const {
    NamedParams out = upstream_parameters();
    auto ctx = context_parameters();
    out.insert(out.end(), ctx.begin(), ctx.end());
    return out;
  }

  TokenSequence tokenize(const std::string& text) const { return seover::tokenize(text, vocab_, config_.encoder.max_len); }

  /// Sentence vector and emotion logits for one utterance.
  std::pair<Tensor, Tensor> encode(const TokenSequence& tokens, Mode mode, Rng* rng = nullptr) const {
    Tensor q = encoder_.encode_sentence(tokens, mode, rng);
    Tensor logits = projection_.logits(q);
    return {std::move(q), std::move(logits)};
  }

  /// Runs the whole pipeline over one dialogue. With `freeze_upstream` the
  /// encoder and projection run in eval mode without recording gradients.
  DialogueOutput forward_dialogue(const std::vector<TokenSequence>& turns, const std::vector<std::size_t>& speakers,
                                  Mode mode, Rng* rng = nullptr, bool freeze_upstream = false) const {
    if (turns.empty()) throw DataError("forward_dialogue: empty dialogue");
    DialogueOutput out;
    DialogueBatch batch;
    batch.speakers = speakers;
    {
      std::optional<NoGradGuard> guard;
      if (freeze_upstream) guard.emplace();
      const Mode up_mode = freeze_upstream ? Mode::eval : mode;
      for (const auto& t : turns) {
        Tensor q = encoder_.encode_sentence(t, up_mode, rng);
        Tensor q_star = project_emotion(q, projection_);
        out.q.push_back(q);
        out.q_star.push_back(q_star);
      }
    }
    for (std::size_t i = 0; i < turns.size(); ++i) {
      Seov e = config_.fusion == FusionMode::seov ? fuse(out.q[i], out.q_star[i]) : fuse_ablated(out.q[i]);
      batch.seovs.push_back(e.vector());
    }
    out.logits = context_.forward(batch);
    return out;
  }

  DialogueOutput forward_dialogue(const Dialogue& d, Mode mode, Rng* rng = nullptr, bool freeze_upstream = false) const {
    std::vector<TokenSequence> turns;
    for (const auto& u : d.turns) turns.push_back(tokenize(u.text));
    return forward_dialogue(turns, d.speaker_ids(), mode, rng, freeze_upstream);
  }

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  LabelSet labels_;
  SentenceEncoder encoder_;
  EmotionProjection projection_;
  ContextModel context_;
};

}  // namespace seover
