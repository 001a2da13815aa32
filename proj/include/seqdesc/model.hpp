// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqdesc/activation.hpp"
#include "seqdesc/checkpoint.hpp"
#include "seqdesc/ops.hpp"
#include "seqdesc/rng.hpp"
#include "seqdesc/schedules.hpp"
#include "seqdesc/tape.hpp"

namespace seqdesc {

/// Token ids 0/1/2 are reserved for <bos>/<eos>/<pad>.
struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t vocab_size = 64;
  std::size_t max_src_len = 8;
  std::size_t max_tgt_len = 24;
  std::size_t feat_dim = 16;
  std::size_t feedforward_mult = 4;
  ActivationKind activation = ActivationKind::Mish;

  static constexpr std::int32_t kBos = 0;
  static constexpr std::int32_t kEos = 1;
  static constexpr std::int32_t kPad = 2;

  /// Throws ConfigError listing every violation.
  void validate() const;
};

/// Pre-norm transformer encoder-decoder over continuous feature sequences.
/// Curriculum noise perturbs the encoder input features only; the scheduled
/// dropout rate drives the three standard sites (attention weights,
/// feedforward hidden layer, residual branches).
///
/// Parameter count as a function of the config (d = d_model, m =
/// feedforward_mult, L = n_layers, V = vocab_size, F = feat_dim,
/// S = max_src_len, T = max_tgt_len):
///
///   count = F*d + d            input projection
///         + (S + T)*d          positional embeddings
///         + V*d                token embedding
///         + L*((4+2m)*d^2 + 9d + m*d)    encoder layers
///         + L*((8+2m)*d^2 + 15d + m*d)   decoder layers
///         + 4d                 final layer norms
///         + d*V + V            output projection
template <typename T>
class DescriberModel {
 public:
  /// Zero-initialized parameters (checkpoint loading target).
  explicit DescriberModel(const ModelConfig& config) : config_(config) {
    config.validate();
    build_params();
  }

  /// Random init: projection/embedding weights ~ N(0, 0.02^2), biases 0,
  /// layer-norm gain 1 / bias 0. Deterministic given the stream.
  DescriberModel(const ModelConfig& config, RngStream& init_rng) : config_(config) {
    config.validate();
    build_params();
    for (std::size_t i = 0; i < params_.size(); ++i) {
      switch (init_kinds_[i]) {
        case InitKind::Normal:
          for (std::size_t j = 0; j < params_[i].numel(); ++j)
            params_[i][j] = static_cast<T>(0.02 * init_rng.normal());
          break;
        case InitKind::Zero:
          break;
        case InitKind::One:
          for (std::size_t j = 0; j < params_[i].numel(); ++j) params_[i][j] = T(1);
          break;
      }
    }
  }

  const ModelConfig& config() const { return config_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
  }

  std::vector<std::pair<std::string, Tensor<T>*>> named_parameters() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    out.reserve(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i)
      out.emplace_back(names_[i], &params_[i]);
    return out;
  }

  std::vector<std::pair<std::string, const Tensor<T>*>> named_parameters() const {
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    out.reserve(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i)
      out.emplace_back(names_[i], &params_[i]);
    return out;
  }

  /// Registers every parameter as a tape leaf (canonical order).
  std::vector<Value<T>> bind(Tape<T>& tape, bool trainable) const {
    std::vector<Value<T>> bound;
    bound.reserve(params_.size());
    for (const auto& p : params_) bound.push_back(tape.leaf(p, trainable));
    return bound;
  }

  struct StochasticStreams {
    RngStream noise;
    RngStream dropout;
  };

  /// Encoder: noised features -> projected + positional -> L pre-norm blocks
  /// -> final norm. Noise is applied only in training mode.
  Value<T> encode(Tape<T>& tape, const std::vector<Value<T>>& bound,
                  const Tensor<T>& features, double sigma, RngStream& noise_rng,
                  double delta, RngStream& dropout_rng, bool training) const {
    if (features.rank() != 3)
      throw ShapeError("encode: features must be [batch, src_len, feat_dim]");
    std::size_t b = features.dim(0), s = features.dim(1), f = features.dim(2);
    if (s > config_.max_src_len)
      throw InputError("encode: src_len " + std::to_string(s) + " exceeds max_src_len " +
                       std::to_string(config_.max_src_len));
    if (f != config_.feat_dim)
      throw ShapeError("encode: feat_dim " + std::to_string(f) + " != configured " +
                       std::to_string(config_.feat_dim));
    std::size_t d = config_.d_model;
    Value<T> x = tape.constant(features);
    if (training) x = gaussian_noise(x, sigma, noise_rng);
    x = reshape(x, {b * s, f});
    x = add_broadcast(matmul(x, bound[idx_.in_w]), bound[idx_.in_b]);
    x = reshape(x, {b, s, d});
    x = add_broadcast(x, slice(bound[idx_.pos_enc], 0, 0, s));
    for (const auto& layer : idx_.enc_layers)
      x = block(tape, bound, layer, x, x, nullptr, delta, dropout_rng, training);
    return layer_norm(x, bound[idx_.enc_final_g], bound[idx_.enc_final_b], kLnEps);
  }

  /// Teacher-forced decoder logits [batch, tgt_len, vocab].
  Value<T> decode_logits(Tape<T>& tape, const std::vector<Value<T>>& bound,
                         const Value<T>& encoded,
                         const std::vector<std::vector<std::int32_t>>& token_rows,
                         double delta, RngStream& dropout_rng, bool training) const {
    std::size_t b = encoded.shape()[0];
    if (token_rows.size() != b)
      throw ShapeError("decode_logits: batch mismatch between encoder and tokens");
    std::size_t tin = 0;
    for (const auto& row : token_rows) tin = std::max(tin, row.size());
    if (tin == 0) throw InputError("decode_logits: empty token rows");
    if (tin > config_.max_tgt_len)
      throw InputError("decode_logits: tgt_len " + std::to_string(tin) +
                       " exceeds max_tgt_len " + std::to_string(config_.max_tgt_len));
    std::vector<std::int32_t> flat(b * tin, ModelConfig::kPad);
    for (std::size_t r = 0; r < b; ++r)
      std::copy(token_rows[r].begin(), token_rows[r].end(), flat.begin() + r * tin);
    std::size_t d = config_.d_model;
    std::size_t v = config_.vocab_size;
    Value<T> x = embed(bound[idx_.tok_embed], flat, {b, tin});
    x = add_broadcast(x, slice(bound[idx_.pos_dec], 0, 0, tin));
    Tensor<T> causal = causal_mask(b, config_.n_heads, tin);
    for (const auto& layer : idx_.dec_layers)
      x = block(tape, bound, layer, x, encoded, &causal, delta, dropout_rng, training);
    x = layer_norm(x, bound[idx_.dec_final_g], bound[idx_.dec_final_b], kLnEps);
    x = reshape(x, {b * tin, d});
    x = add_broadcast(matmul(x, bound[idx_.out_w]), bound[idx_.out_b]);
    return reshape(x, {b, tin, v});
  }

  /// Full training loss: noisy encode, teacher-forced decode, label-smoothed
  /// cross entropy averaged over non-pad target positions.
  Value<T> forward_loss(Tape<T>& tape, const Tensor<T>& features,
                        const std::vector<std::vector<std::int32_t>>& captions,
                        double sigma, double delta, double label_smoothing,
                        StochasticStreams& streams, bool training,
                        std::vector<Value<T>>* bound_out = nullptr) const {
    std::size_t b = features.dim(0);
    if (captions.size() != b)
      throw ShapeError("forward_loss: feature batch and caption batch differ");
    std::size_t tin = 0;
    for (const auto& c : captions) {
      if (c.size() + 1 > config_.max_tgt_len)
        throw InputError("forward_loss: caption length " + std::to_string(c.size()) +
                         " + eos exceeds max_tgt_len " +
                         std::to_string(config_.max_tgt_len));
      tin = std::max(tin, c.size() + 1);
    }
    std::vector<std::vector<std::int32_t>> dec_in(b);
    std::vector<std::int32_t> targets(b * tin, ModelConfig::kPad);
    for (std::size_t r = 0; r < b; ++r) {
      dec_in[r].assign(tin, ModelConfig::kPad);
      dec_in[r][0] = ModelConfig::kBos;
      for (std::size_t k = 0; k < captions[r].size(); ++k) {
        dec_in[r][k + 1] = captions[r][k];
        targets[r * tin + k] = captions[r][k];
      }
      targets[r * tin + captions[r].size()] = ModelConfig::kEos;
    }
    std::vector<Value<T>> bound = bind(tape, training);
    double eff_sigma = training ? sigma : 0.0;
    double eff_delta = training ? delta : 0.0;
    Value<T> enc = encode(tape, bound, features, eff_sigma, streams.noise, eff_delta,
                          streams.dropout, training);
    Value<T> logits =
        decode_logits(tape, bound, enc, dec_in, eff_delta, streams.dropout, training);
    Value<T> flat = reshape(logits, {b * tin, config_.vocab_size});
    if (bound_out) *bound_out = bound;
    return cross_entropy_smoothed(flat, targets, label_smoothing, ModelConfig::kPad);
  }

  /// Schedule-resolving overload: sigma/delta come from the curriculum at the
  /// given epoch (0 outside training mode).
  Value<T> forward_loss(Tape<T>& tape, const Tensor<T>& features,
                        const std::vector<std::vector<std::int32_t>>& captions,
                        std::size_t epoch, const NoiseSchedule& noise,
                        const DropoutSchedule& drop, double label_smoothing,
                        StochasticStreams& streams, bool training,
                        std::vector<Value<T>>* bound_out = nullptr) const {
    return forward_loss(tape, features, captions, sigma_at(noise, epoch),
                        delta_at(drop, epoch), label_smoothing, streams, training,
                        bound_out);
  }

  /// Eval-mode encoder for a single sequence [src_len, feat_dim] -> [src_len, d].
  Tensor<T> encode_eval(const Tensor<T>& features) const {
    if (features.rank() != 2) throw ShapeError("encode_eval: features must be rank 2");
    std::size_t s = features.dim(0), f = features.dim(1);
    Tensor<T> batched({1, s, f},
                      std::vector<T>(features.data(), features.data() + features.numel()));
    Tape<T> tape;
    std::vector<Value<T>> bound = bind(tape, false);
    RngStream unused_noise, unused_drop;
    Value<T> enc = encode(tape, bound, batched, 0.0, unused_noise, 0.0, unused_drop, false);
    const Tensor<T>& ev = enc.tensor();
    return Tensor<T>({s, config_.d_model},
                     std::vector<T>(ev.data(), ev.data() + ev.numel()));
  }

  /// Next-token logits [vocab] at the last non-pad position of the prefix.
  /// Trailing pad tokens cannot influence the result (causal masking).
  Tensor<T> decode_step(const Tensor<T>& encoded,
                        const std::vector<std::int32_t>& prefix) const {
    if (encoded.rank() != 2) throw ShapeError("decode_step: encoded must be rank 2");
    if (prefix.empty()) throw InputError("decode_step: empty prefix");
    std::size_t s = encoded.dim(0);
    Tensor<T> batched({1, s, config_.d_model},
                      std::vector<T>(encoded.data(), encoded.data() + encoded.numel()));
    Tape<T> tape;
    std::vector<Value<T>> bound = bind(tape, false);
    Value<T> enc = tape.constant(batched);
    RngStream unused_drop;
    Value<T> logits =
        decode_logits(tape, bound, enc, {prefix}, 0.0, unused_drop, false);
    std::size_t pos = prefix.size() - 1;
    while (pos > 0 && prefix[pos] == ModelConfig::kPad) --pos;
    const Tensor<T>& lv = logits.tensor();
    std::size_t v = config_.vocab_size;
    std::vector<T> row(lv.data() + pos * v, lv.data() + (pos + 1) * v);
    return Tensor<T>({v}, std::move(row));
  }

  /// Greedy decoding: start at <bos>, take the argmax each step (ties go to
  /// the lowest id), stop at <eos> or after max_len tokens. The returned
  /// sequence excludes <bos>/<eos>. Deterministic; no noise or dropout.
  std::vector<std::int32_t> greedy_decode(const Tensor<T>& features,
                                          std::size_t max_len) const {
    std::vector<std::int32_t> out;
    if (max_len == 0) return out;
    Tensor<T> enc = encode_eval(features);
    std::vector<std::int32_t> prefix{ModelConfig::kBos};
    while (out.size() < max_len && prefix.size() < config_.max_tgt_len) {
      Tensor<T> logits = decode_step(enc, prefix);
      std::int32_t best = 0;
      for (std::size_t j = 1; j < logits.numel(); ++j)
        if (logits[j] > logits[static_cast<std::size_t>(best)])
          best = static_cast<std::int32_t>(j);
      if (best == ModelConfig::kEos) break;
      out.push_back(best);
      prefix.push_back(best);
    }
    return out;
  }

  void save(const std::string& path) const {
    std::vector<std::pair<std::string, const Tensor<float>*>> recs;
    std::vector<Tensor<float>> storage;
    if constexpr (std::is_same_v<T, float>) {
      for (std::size_t i = 0; i < params_.size(); ++i)
        recs.emplace_back(names_[i], &params_[i]);
      save_checkpoint(path, recs);
    } else {
      storage.reserve(params_.size());
      for (std::size_t i = 0; i < params_.size(); ++i)
        storage.push_back(params_[i].template cast<float>());
      for (std::size_t i = 0; i < params_.size(); ++i)
        recs.emplace_back(names_[i], &storage[i]);
      save_checkpoint(path, recs);
    }
  }

  /// Loads a checkpoint saved for the same config; record names and shapes
  /// must match exactly.
  void load(const std::string& path) {
    std::vector<NamedTensor> recs = load_checkpoint(path);
    if (recs.size() != params_.size())
      throw InputError("checkpoint has " + std::to_string(recs.size()) +
                       " parameters, model expects " + std::to_string(params_.size()) +
                       " (config mismatch?)");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (recs[i].name != names_[i])
        throw InputError("checkpoint parameter '" + recs[i].name + "' where '" +
                         names_[i] + "' was expected (config mismatch?)");
      if (recs[i].tensor.shape() != params_[i].shape())
        throw InputError("checkpoint parameter '" + names_[i] + "' has shape " +
                         shape_to_string(recs[i].tensor.shape()) + ", model expects " +
                         shape_to_string(params_[i].shape()));
      params_[i] = recs[i].tensor.template cast<T>();
    }
  }

  static constexpr T kLnEps = T(1e-5);

 private:
  enum class InitKind { Normal, Zero, One };

  struct AttnIdx {
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct LayerIdx {
    std::size_t ln1_g, ln1_b;
    AttnIdx self_attn;
    bool has_cross = false;
    std::size_t ln2_g, ln2_b;
    AttnIdx cross_attn{};
    std::size_t ln3_g, ln3_b;
    std::size_t ff_w1, ff_b1, ff_w2, ff_b2;
  };
  struct ParamIdx {
    std::size_t in_w, in_b, pos_enc, pos_dec, tok_embed;
    std::vector<LayerIdx> enc_layers, dec_layers;
    std::size_t enc_final_g, enc_final_b, dec_final_g, dec_final_b;
    std::size_t out_w, out_b;
  };

  std::size_t add_param(const std::string& name, std::vector<std::size_t> shape,
                        InitKind kind) {
    names_.push_back(name);
    params_.emplace_back(std::move(shape));
    init_kinds_.push_back(kind);
    return params_.size() - 1;
  }

  AttnIdx add_attn(const std::string& prefix) {
    std::size_t d = config_.d_model;
    AttnIdx a;
    a.wq = add_param(prefix + ".wq", {d, d}, InitKind::Normal);
    a.bq = add_param(prefix + ".bq", {d}, InitKind::Zero);
    a.wk = add_param(prefix + ".wk", {d, d}, InitKind::Normal);
    a.bk = add_param(prefix + ".bk", {d}, InitKind::Zero);
    a.wv = add_param(prefix + ".wv", {d, d}, InitKind::Normal);
    a.bv = add_param(prefix + ".bv", {d}, InitKind::Zero);
    a.wo = add_param(prefix + ".wo", {d, d}, InitKind::Normal);
    a.bo = add_param(prefix + ".bo", {d}, InitKind::Zero);
    return a;
  }

  LayerIdx add_layer(const std::string& prefix, bool with_cross) {
    std::size_t d = config_.d_model;
    std::size_t h = d * config_.feedforward_mult;
    LayerIdx l;
    l.ln1_g = add_param(prefix + ".ln1.gain", {d}, InitKind::One);
    l.ln1_b = add_param(prefix + ".ln1.bias", {d}, InitKind::Zero);
    l.self_attn = add_attn(prefix + ".self_attn");
    l.ln2_g = add_param(prefix + ".ln2.gain", {d}, InitKind::One);
    l.ln2_b = add_param(prefix + ".ln2.bias", {d}, InitKind::Zero);
    l.has_cross = with_cross;
    if (with_cross) {
      l.cross_attn = add_attn(prefix + ".cross_attn");
      l.ln3_g = add_param(prefix + ".ln3.gain", {d}, InitKind::One);
      l.ln3_b = add_param(prefix + ".ln3.bias", {d}, InitKind::Zero);
    }
    l.ff_w1 = add_param(prefix + ".ff.w1", {d, h}, InitKind::Normal);
    l.ff_b1 = add_param(prefix + ".ff.b1", {h}, InitKind::Zero);
    l.ff_w2 = add_param(prefix + ".ff.w2", {h, d}, InitKind::Normal);
    l.ff_b2 = add_param(prefix + ".ff.b2", {d}, InitKind::Zero);
    return l;
  }

  void build_params() {
    std::size_t d = config_.d_model;
    idx_.in_w = add_param("input_proj.weight", {config_.feat_dim, d}, InitKind::Normal);
    idx_.in_b = add_param("input_proj.bias", {d}, InitKind::Zero);
    idx_.pos_enc = add_param("pos.encoder", {config_.max_src_len, d}, InitKind::Normal);
    idx_.pos_dec = add_param("pos.decoder", {config_.max_tgt_len, d}, InitKind::Normal);
    idx_.tok_embed =
        add_param("token_embedding", {config_.vocab_size, d}, InitKind::Normal);
    for (std::size_t i = 0; i < config_.n_layers; ++i)
      idx_.enc_layers.push_back(add_layer("encoder.layer" + std::to_string(i), false));
    for (std::size_t i = 0; i < config_.n_layers; ++i)
      idx_.dec_layers.push_back(add_layer("decoder.layer" + std::to_string(i), true));
    idx_.enc_final_g = add_param("encoder.final_ln.gain", {d}, InitKind::One);
    idx_.enc_final_b = add_param("encoder.final_ln.bias", {d}, InitKind::Zero);
    idx_.dec_final_g = add_param("decoder.final_ln.gain", {d}, InitKind::One);
    idx_.dec_final_b = add_param("decoder.final_ln.bias", {d}, InitKind::Zero);
    idx_.out_w = add_param("output_proj.weight", {d, config_.vocab_size}, InitKind::Normal);
    idx_.out_b = add_param("output_proj.bias", {config_.vocab_size}, InitKind::Zero);
  }

  Tensor<T> causal_mask(std::size_t b, std::size_t h, std::size_t t) const {
    Tensor<T> mask({b, h, t, t});
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = i + 1; j < t; ++j) mask[i * t + j] = T(-1e9);
    std::size_t plane = t * t;
    for (std::size_t s = 1; s < b * h; ++s)
      std::copy_n(mask.data(), plane, mask.data() + s * plane);
    return mask;
  }

  /// Multi-head attention. q_in [B,Tq,d], kv_in [B,Tk,d]; additive mask
  /// (already [B,H,Tq,Tk]) is optional.
  Value<T> attention(Tape<T>& tape, const std::vector<Value<T>>& bound,
                     const AttnIdx& at, const Value<T>& q_in, const Value<T>& kv_in,
                     const Tensor<T>* mask, double delta, RngStream& dropout_rng,
                     bool training) const {
    std::size_t b = q_in.shape()[0];
    std::size_t tq = q_in.shape()[1];
    std::size_t tk = kv_in.shape()[1];
    std::size_t d = config_.d_model;
    std::size_t h = config_.n_heads;
    std::size_t dh = d / h;
    auto project = [&](const Value<T>& x, std::size_t t, std::size_t w, std::size_t bias) {
      Value<T> p = add_broadcast(matmul(reshape(x, {b * t, d}), bound[w]), bound[bias]);
      return permute(reshape(p, {b, t, h, dh}), {0, 2, 1, 3});  // [B,H,t,dh]
    };
    Value<T> q = project(q_in, tq, at.wq, at.bq);
    Value<T> k = project(kv_in, tk, at.wk, at.bk);
    Value<T> v = project(kv_in, tk, at.wv, at.bv);
    Value<T> scores = matmul(q, transpose_last2(k));  // [B,H,Tq,Tk]
    scores = scale(scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
    if (mask) scores = add(scores, tape.constant(*mask));
    Value<T> attn = softmax_last(scores);
    attn = dropout(attn, delta, training, dropout_rng);
    Value<T> ctx = matmul(attn, v);                    // [B,H,Tq,dh]
    ctx = reshape(permute(ctx, {0, 2, 1, 3}), {b * tq, d});
    Value<T> out = add_broadcast(matmul(ctx, bound[at.wo]), bound[at.bo]);
    return reshape(out, {b, tq, d});
  }

  /// One pre-norm block: self attention, optional cross attention, then the
  /// feedforward, each behind a residual with dropout.
  Value<T> block(Tape<T>& tape, const std::vector<Value<T>>& bound, const LayerIdx& l,
                 Value<T> x, const Value<T>& memory, const Tensor<T>* self_mask,
                 double delta, RngStream& dropout_rng, bool training) const {
    std::size_t b = x.shape()[0];
    std::size_t t = x.shape()[1];
    std::size_t d = config_.d_model;

    Value<T> a = layer_norm(x, bound[l.ln1_g], bound[l.ln1_b], kLnEps);
    a = attention(tape, bound, l.self_attn, a, a, self_mask, delta, dropout_rng, training);
    a = dropout(a, delta, training, dropout_rng);
    x = add(x, a);

    if (l.has_cross) {
      Value<T> c = layer_norm(x, bound[l.ln2_g], bound[l.ln2_b], kLnEps);
      c = attention(tape, bound, l.cross_attn, c, memory, nullptr, delta, dropout_rng,
                    training);
      c = dropout(c, delta, training, dropout_rng);
      x = add(x, c);
    }

    std::size_t lng = l.has_cross ? l.ln3_g : l.ln2_g;
    std::size_t lnb = l.has_cross ? l.ln3_b : l.ln2_b;
    Value<T> f = layer_norm(x, bound[lng], bound[lnb], kLnEps);
    f = add_broadcast(matmul(reshape(f, {b * t, d}), bound[l.ff_w1]), bound[l.ff_b1]);
    f = elementwise(f, config_.activation);
    f = dropout(f, delta, training, dropout_rng);
    f = add_broadcast(matmul(f, bound[l.ff_w2]), bound[l.ff_b2]);
    f = reshape(f, {b, t, d});
    f = dropout(f, delta, training, dropout_rng);
    return add(x, f);
  }

  ModelConfig config_;
  std::vector<std::string> names_;
  std::vector<Tensor<T>> params_;
  std::vector<InitKind> init_kinds_;
  ParamIdx idx_;
};

}  // namespace seqdesc
