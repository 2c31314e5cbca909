#pragma once

// Dialogue-level context models over SEOV sequences.
//
//  bclstm       bidirectional LSTM, speaker-agnostic; logits from [fwd_t ; bwd_t].
//  speaker_rnn  global GRU + per-speaker state threads (one shared GRU cell)
//               + emotion GRU fed by the current speaker's state.
//
// All recurrent states start at zero.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "seover/errors.hpp"
#include "seover/params.hpp"
#include "seover/tensor.hpp"

namespace seover {

enum class ContextVariant { bclstm, speaker_rnn };

inline const char* variant_name(ContextVariant v) { return v == ContextVariant::bclstm ? "bclstm" : "speaker_rnn"; }

inline ContextVariant parse_variant(const std::string& s) {
  if (s == "bclstm") return ContextVariant::bclstm;
  if (s == "speaker_rnn") return ContextVariant::speaker_rnn;
  throw ConfigError("unknown context variant '" + s + "' (expected bclstm or speaker_rnn)");
}

struct ContextModelConfig {
  ContextVariant variant = ContextVariant::bclstm;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 32;
  std::size_t n_classes = 0;

  void validate() const {
    if (input_dim == 0 || hidden_dim == 0) throw ConfigError("context: input_dim and hidden_dim must be positive");
    if (n_classes < 2) throw ConfigError("context: n_classes must be at least 2");
  }
};

struct DialogueBatch {
  std::vector<Tensor> seovs;
  std::vector<std::size_t> speakers;
  std::optional<std::vector<std::size_t>> labels;

  std::size_t size() const { return seovs.size(); }
};

/// v[n] x W[n x m] -> [m]
inline Tensor vec_mat(const Tensor& v, const Tensor& w) {
  return reshape(matmul(reshape(v, {1, v.size()}), w), {w.dim(1)});
}

struct LstmCell {
  Tensor wx, wh, b;  // gate blocks ordered input, forget, candidate, output

  static LstmCell init(Rng& rng, std::size_t in, std::size_t h) {
    return {xavier_uniform(rng, in, 4 * h), xavier_uniform(rng, h, 4 * h), zeros_param({4 * h})};
  }
  std::size_t hidden() const { return wh.dim(0); }
  NamedParams named() const { return {{"wx", wx}, {"wh", wh}, {"b", b}}; }

  /// One step; returns (h', c').
  std::pair<Tensor, Tensor> step(const Tensor& x, const Tensor& h, const Tensor& c) const {
    const std::size_t n = hidden();
    const Tensor gates = add(add(vec_mat(x, wx), vec_mat(h, wh)), b);
    const Tensor i = sigmoid(slice_last(gates, 0, n));
    const Tensor f = sigmoid(slice_last(gates, n, n));
    const Tensor g = seover::tanh(slice_last(gates, 2 * n, n));
    const Tensor o = sigmoid(slice_last(gates, 3 * n, n));
    Tensor c2 = add(mul(f, c), mul(i, g));
    Tensor h2 = mul(o, seover::tanh(c2));
    return {std::move(h2), std::move(c2)};
  }
};

struct GruCell {
  Tensor wx, wh, bx, bh;  // gate blocks ordered reset, update, candidate

  static GruCell init(Rng& rng, std::size_t in, std::size_t h) {
    return {xavier_uniform(rng, in, 3 * h), xavier_uniform(rng, h, 3 * h), zeros_param({3 * h}), zeros_param({3 * h})};
  }
  std::size_t hidden() const { return wh.dim(0); }
  NamedParams named() const { return {{"wx", wx}, {"wh", wh}, {"bx", bx}, {"bh", bh}}; }

  // r = σ(x Wr + h Ur), z = σ(x Wz + h Uz), n = tanh(x Wn + r ⊙ (h Un)), h' = (1-z) ⊙ n + z ⊙ h
  Tensor step(const Tensor& x, const Tensor& h) const {
    const std::size_t n = hidden();
    const Tensor gx = add(vec_mat(x, wx), bx);
    const Tensor gh = add(vec_mat(h, wh), bh);
    const Tensor r = sigmoid(add(slice_last(gx, 0, n), slice_last(gh, 0, n)));
    const Tensor z = sigmoid(add(slice_last(gx, n, n), slice_last(gh, n, n)));
    const Tensor cand = seover::tanh(add(slice_last(gx, 2 * n, n), mul(r, slice_last(gh, 2 * n, n))));
    const Tensor one_minus_z = add_scalar(scale(z, -1.0), 1.0);
    return add(mul(one_minus_z, cand), mul(z, h));
  }
};

/// Intermediate states of a speaker_rnn pass, one entry per turn.
struct SpeakerRnnTrace {
  std::vector<Tensor> global;
  std::vector<Tensor> speaker;  // state of the turn's speaker after its update
  std::vector<Tensor> emotion;
};

class ContextModel {
 public:
  ContextModel() = default;

  ContextModel(const ContextModelConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    const std::size_t in = config_.input_dim, h = config_.hidden_dim;
    if (config_.variant == ContextVariant::bclstm) {
      fwd_ = LstmCell::init(rng, in, h);
      bwd_ = LstmCell::init(rng, in, h);
      out_w_ = xavier_uniform(rng, 2 * h, config_.n_classes);
    } else {
      global_ = GruCell::init(rng, in + h, h);
      party_ = GruCell::init(rng, in + h, h);
      emotion_ = GruCell::init(rng, h, h);
      out_w_ = xavier_uniform(rng, h, config_.n_classes);
    }
    out_b_ = zeros_param({config_.n_classes});
  }

  const ContextModelConfig& config() const { return config_; }

  LstmCell& forward_cell() { return fwd_; }
  LstmCell& backward_cell() { return bwd_; }
  GruCell& global_cell() { return global_; }
  GruCell& party_cell() { return party_; }
  GruCell& emotion_cell() { return emotion_; }
  const Tensor& classifier_weights() const { return out_w_; }
  const Tensor& classifier_bias() const { return out_b_; }

  NamedParams parameters() const {
    NamedParams out;
    if (config_.variant == ContextVariant::bclstm) {
      append_prefixed(out, "fwd.", fwd_.named());
      append_prefixed(out, "bwd.", bwd_.named());
    } else {
      append_prefixed(out, "global.", global_.named());
      append_prefixed(out, "party.", party_.named());
      append_prefixed(out, "emotion.", emotion_.named());
    }
    out.emplace_back("out.w", out_w_);
    out.emplace_back("out.b", out_b_);
    return out;
  }

  /// Logits [n x n_classes], one row per utterance.
  Tensor forward(const DialogueBatch& batch) const {
    return config_.variant == ContextVariant::bclstm ? bclstm_forward(batch) : speaker_rnn_forward(batch);
  }

  /// Pre-classifier states [fwd_t ; bwd_t] for each turn.
  std::vector<Tensor> bclstm_hidden(const DialogueBatch& batch) const {
    check_batch(batch);
    const std::size_t n = batch.size(), h = config_.hidden_dim;
    std::vector<Tensor> fwd(n), bwd(n);
    Tensor hs = Tensor::zeros({h}), cs = Tensor::zeros({h});
    for (std::size_t t = 0; t < n; ++t) {
      std::tie(hs, cs) = fwd_.step(batch.seovs[t], hs, cs);
      fwd[t] = hs;
    }
    hs = Tensor::zeros({h});
    cs = Tensor::zeros({h});
    for (std::size_t t = n; t-- > 0;) {
      std::tie(hs, cs) = bwd_.step(batch.seovs[t], hs, cs);
      bwd[t] = hs;
    }
    std::vector<Tensor> out;
    out.reserve(n);
    for (std::size_t t = 0; t < n; ++t) out.push_back(concat(fwd[t], bwd[t]));
    return out;
  }

  Tensor bclstm_forward(const DialogueBatch& batch) const {
    require(ContextVariant::bclstm);
    return add_bias(matmul(stack_rows(bclstm_hidden(batch)), out_w_), out_b_);
  }

  Tensor speaker_rnn_forward(const DialogueBatch& batch, SpeakerRnnTrace* trace = nullptr) const {
    require(ContextVariant::speaker_rnn);
    check_batch(batch);
    const std::size_t n = batch.size(), h = config_.hidden_dim;
    const std::size_t n_speakers = check_speakers(batch.speakers);
    std::vector<Tensor> party(n_speakers, Tensor::zeros({h}));
    Tensor g = Tensor::zeros({h});
    Tensor emo = Tensor::zeros({h});
    std::vector<Tensor> rows;
    rows.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
      const Tensor& e = batch.seovs[t];
      const std::size_t s = batch.speakers[t];
      const Tensor g_prev = g;
      g = global_.step(concat(e, party[s]), g_prev);
      party[s] = party_.step(concat(e, g_prev), party[s]);
      emo = emotion_.step(party[s], emo);
      if (trace) {
        trace->global.push_back(g);
        trace->speaker.push_back(party[s]);
        trace->emotion.push_back(emo);
      }
      rows.push_back(emo);
    }
    return add_bias(matmul(stack_rows(rows), out_w_), out_b_);
  }

 private:
  void require(ContextVariant v) const {
    if (config_.variant != v) {
      throw ConfigError(std::string("context model is ") + variant_name(config_.variant) + ", not " + variant_name(v));
    }
  }

  void check_batch(const DialogueBatch& batch) const {
    if (batch.size() == 0) throw DataError("context: empty dialogue");
    if (batch.speakers.size() != batch.size()) throw DataError("context: speakers and SEOVs differ in length");
    if (batch.labels && batch.labels->size() != batch.size()) throw DataError("context: labels and SEOVs differ in length");
    for (const auto& e : batch.seovs) {
      if (e.rank() != 1 || e.dim(0) != config_.input_dim) {
        throw ShapeError("context: input " + shape_str(e.shape()) + " does not match input_dim " +
                         std::to_string(config_.input_dim));
      }
    }
  }

  /// Returns the speaker count; ids must cover 0..k-1 exactly.
  static std::size_t check_speakers(const std::vector<std::size_t>& speakers) {
    const std::size_t k = *std::max_element(speakers.begin(), speakers.end()) + 1;
    std::vector<bool> seen(k, false);
    for (auto s : speakers) seen[s] = true;
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw DataError("context: speaker ids are not dense from 0");
    }
    return k;
  }

  ContextModelConfig config_;
  LstmCell fwd_, bwd_;
  GruCell global_, party_, emotion_;
  Tensor out_w_, out_b_;
};

/// Per-row argmax, ties to the lowest label id.
inline std::vector<std::size_t> classify(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("classify: expected [n x c] logits, got " + shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    out[i] = best;
  }
  return out;
}

}  // namespace seover
