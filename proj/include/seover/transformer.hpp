#pragma once

// Small post-LN transformer encoder producing one pooled vector per sentence.
// The sentence vector is the final hidden state at the CLS position.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "seover/errors.hpp"
#include "seover/params.hpp"
#include "seover/tensor.hpp"
#include "seover/text.hpp"

namespace seover {

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  std::size_t max_len = kDefaultMaxLen;
  double dropout_rate = 0.1;
  double ln_eps = 1e-12;

  void validate() const {
    if (d_model == 0 || n_heads == 0 || d_ff == 0 || max_len == 0) {
      throw ConfigError("encoder: d_model, n_heads, d_ff and max_len must be positive");
    }
    if (d_model % n_heads != 0) {
      throw ConfigError("encoder: d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                        std::to_string(n_heads));
    }
    if (d_model % 2 != 0) throw ConfigError("encoder: d_model must be even for sinusoidal positions");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("encoder: dropout_rate must be in [0,1)");
  }
};

/// Sinusoidal table: PE[p,2i] = sin(p / 10000^(2i/d)), PE[p,2i+1] = cos(same).
inline Tensor positional_encoding(std::size_t max_len, std::size_t d_model) {
  if (d_model % 2 != 0) throw ConfigError("positional_encoding: d_model must be even, got " + std::to_string(d_model));
  std::vector<double> pe(max_len * d_model);
  for (std::size_t p = 0; p < max_len; ++p) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle =
          static_cast<double>(p) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      pe[p * d_model + 2 * i] = std::sin(angle);
      pe[p * d_model + 2 * i + 1] = std::cos(angle);
    }
  }
  return Tensor({max_len, d_model}, std::move(pe));
}

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;

  static AttentionParams init(Rng& rng, std::size_t d) {
    return {xavier_uniform(rng, d, d), zeros_param({d}), xavier_uniform(rng, d, d), zeros_param({d}),
            xavier_uniform(rng, d, d), zeros_param({d}), xavier_uniform(rng, d, d), zeros_param({d})};
  }

  NamedParams named() const {
    return {{"wq", wq}, {"bq", bq}, {"wk", wk}, {"bk", bk}, {"wv", wv}, {"bv", bv}, {"wo", wo}, {"bo", bo}};
  }
};

/// Per-head attention weight tables, [L×L] each, rows = queries.
struct AttentionTrace {
  std::vector<Tensor> weights;
};

inline constexpr double kMaskPenalty = -1e9;

inline Tensor multi_head_self_attention(const Tensor& x, const AttentionParams& p, const std::vector<bool>& pad_mask,
                                        std::size_t n_heads, AttentionTrace* trace = nullptr) {
  if (x.rank() != 2) throw ShapeError("attention: expected [L x d] input, got " + shape_str(x.shape()));
  const std::size_t len = x.dim(0), d = x.dim(1);
  if (pad_mask.size() != len) {
    throw ShapeError("attention: pad mask length " + std::to_string(pad_mask.size()) + " vs sequence length " +
                     std::to_string(len));
  }
  if (n_heads == 0 || d % n_heads != 0) throw ShapeError("attention: d_model not divisible by head count");
  bool any_real = false;
  for (bool m : pad_mask) any_real = any_real || !m;
  if (!any_real) throw ShapeError("attention: every position is padding");

  const std::size_t dh = d / n_heads;
  const Tensor q = add_bias(matmul(x, p.wq), p.bq);
  const Tensor k = add_bias(matmul(x, p.wk), p.bk);
  const Tensor v = add_bias(matmul(x, p.wv), p.bv);

  std::vector<double> mask(len * len, 0.0);
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < len; ++j)
      if (pad_mask[j]) mask[i * len + j] = kMaskPenalty;
  const Tensor mask_t({len, len}, std::move(mask));

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Tensor qh = slice_last(q, h * dh, dh);
    const Tensor kh = slice_last(k, h * dh, dh);
    const Tensor vh = slice_last(v, h * dh, dh);
    const Tensor scores = add(scale(matmul(qh, transpose(kh)), inv_sqrt), mask_t);
    const Tensor weights = softmax(scores, 1);
    if (trace) trace->weights.push_back(weights);
    heads.push_back(matmul(weights, vh));
  }
  return add_bias(matmul(concat(heads), p.wo), p.bo);
}

struct EncoderLayerParams {
  AttentionParams attn;
  Tensor ln1_gain, ln1_bias;
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor ln2_gain, ln2_bias;

  static EncoderLayerParams init(Rng& rng, const EncoderConfig& c) {
    EncoderLayerParams l;
    l.attn = AttentionParams::init(rng, c.d_model);
    l.ln1_gain = ones_param({c.d_model});
    l.ln1_bias = zeros_param({c.d_model});
    l.ff_w1 = xavier_uniform(rng, c.d_model, c.d_ff);
    l.ff_b1 = zeros_param({c.d_ff});
    l.ff_w2 = xavier_uniform(rng, c.d_ff, c.d_model);
    l.ff_b2 = zeros_param({c.d_model});
    l.ln2_gain = ones_param({c.d_model});
    l.ln2_bias = zeros_param({c.d_model});
    return l;
  }

  NamedParams named() const {
    NamedParams out;
    append_prefixed(out, "attn.", attn.named());
    out.insert(out.end(), {{"ln1.gain", ln1_gain},
                           {"ln1.bias", ln1_bias},
                           {"ff.w1", ff_w1},
                           {"ff.b1", ff_b1},
                           {"ff.w2", ff_w2},
                           {"ff.b2", ff_b2},
                           {"ln2.gain", ln2_gain},
                           {"ln2.bias", ln2_bias}});
    return out;
  }
};

class SentenceEncoder {
 public:
  SentenceEncoder() = default;

  SentenceEncoder(const EncoderConfig& config, std::size_t vocab_size, Rng& rng)
      : config_(config), vocab_size_(vocab_size) {
    config_.validate();
    if (vocab_size_ <= kNumReserved) throw ConfigError("encoder: vocabulary has no content tokens");
    embedding_ = normal_init(rng, {vocab_size_, config_.d_model}, 0.02);
    emb_ln_gain_ = ones_param({config_.d_model});
    emb_ln_bias_ = zeros_param({config_.d_model});
    for (std::size_t i = 0; i < config_.n_layers; ++i) layers_.push_back(EncoderLayerParams::init(rng, config_));
    positions_ = positional_encoding(config_.max_len, config_.d_model);
  }

  const EncoderConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t dim() const { return config_.d_model; }

  const Tensor& embedding() const { return embedding_; }
  const Tensor& positions() const { return positions_; }
  const Tensor& embedding_ln_gain() const { return emb_ln_gain_; }
  const Tensor& embedding_ln_bias() const { return emb_ln_bias_; }
  std::vector<EncoderLayerParams>& layers() { return layers_; }
  const std::vector<EncoderLayerParams>& layers() const { return layers_; }

  NamedParams parameters() const {
    NamedParams out{{"embedding", embedding_}, {"emb_ln.gain", emb_ln_gain_}, {"emb_ln.bias", emb_ln_bias_}};
    for (std::size_t i = 0; i < layers_.size(); ++i)
      append_prefixed(out, "layer" + std::to_string(i) + ".", layers_[i].named());
    return out;
  }

  /// Hidden states [L×d] for every position. `rng` is required in train mode.
  Tensor hidden_states(const TokenSequence& tokens, Mode mode, Rng* rng = nullptr) const {
    const std::size_t len = tokens.ids.size();
    if (len == 0) throw DataError("encode_sentence: empty token sequence");
    if (len > config_.max_len) {
      throw DataError("encode_sentence: sequence of " + std::to_string(len) + " tokens exceeds max_len " +
                      std::to_string(config_.max_len));
    }
    for (auto id : tokens.ids) {
      if (id >= vocab_size_) {
        throw DataError("encode_sentence: token id " + std::to_string(id) + " out of range for vocabulary of " +
                        std::to_string(vocab_size_));
      }
    }
    const bool training = mode == Mode::train && config_.dropout_rate > 0.0;
    if (training && !rng) throw std::logic_error("encode_sentence: train mode needs an Rng");
    auto drop = [&](const Tensor& t) { return training ? dropout(t, config_.dropout_rate, *rng) : t; };

    std::vector<bool> pad(len);
    for (std::size_t i = 0; i < len; ++i) pad[i] = i >= tokens.length;

    const Tensor pe = Tensor({len, config_.d_model},
                             std::vector<double>(positions_.values().begin(),
                                                 positions_.values().begin() + static_cast<std::ptrdiff_t>(len * config_.d_model)));
    Tensor h = add(gather_rows(embedding_, tokens.ids), pe);
    h = drop(layer_norm(h, emb_ln_gain_, emb_ln_bias_, config_.ln_eps));
    for (const auto& l : layers_) {
      const Tensor a = multi_head_self_attention(h, l.attn, pad, config_.n_heads);
      h = layer_norm(add(h, drop(a)), l.ln1_gain, l.ln1_bias, config_.ln_eps);
      const Tensor f = add_bias(matmul(relu(add_bias(matmul(h, l.ff_w1), l.ff_b1)), l.ff_w2), l.ff_b2);
      h = layer_norm(add(h, drop(f)), l.ln2_gain, l.ln2_bias, config_.ln_eps);
    }
    return h;
  }

  /// Sentence vector q: the CLS-position row of the final hidden states.
  Tensor encode_sentence(const TokenSequence& tokens, Mode mode, Rng* rng = nullptr) const {
    return row(hidden_states(tokens, mode, rng), 0);
  }

  std::vector<Tensor> encode_dialogue(const std::vector<TokenSequence>& sentences, Mode mode,
                                      Rng* rng = nullptr) const {
    if (sentences.empty()) throw DataError("encode_dialogue: empty sentence list");
    std::vector<Tensor> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) out.push_back(encode_sentence(s, mode, rng));
    return out;
  }

 private:
  EncoderConfig config_;
  std::size_t vocab_size_ = 0;
  Tensor embedding_, emb_ln_gain_, emb_ln_bias_;
  std::vector<EncoderLayerParams> layers_;
  Tensor positions_;
};

}  // namespace seover
