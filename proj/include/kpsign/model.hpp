// Keypoint Transformer classifier: tokenizer, sinusoidal positions, a stack
// of post-norm encoder layers, and a mean-pooling generator head.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "kpsign/error.hpp"
#include "kpsign/nn.hpp"
#include "kpsign/rng.hpp"
#include "kpsign/tensor.hpp"
#include "kpsign/window.hpp"

namespace kpsign {

enum class AttentionMode { kFrameWise, kTrajectoryWise };

inline std::string_view to_string(AttentionMode m) {
  return m == AttentionMode::kFrameWise ? "frame_wise" : "trajectory_wise";
}

inline AttentionMode parse_attention_mode(std::string_view s) {
  if (s == "frame_wise") return AttentionMode::kFrameWise;
  if (s == "trajectory_wise") return AttentionMode::kTrajectoryWise;
  throw InvalidArgument("unknown attention mode '" + std::string(s) + "'");
}

struct ModelConfig {
  std::size_t d_model = 512;
  std::size_t n_layers = 6;
  std::size_t n_heads = 8;
  std::size_t ffn_dim = 2048;
  std::size_t vocab_size = 8162;
  AttentionMode attention_mode = AttentionMode::kFrameWise;
  std::size_t window_len = kDefaultWindowLength;
  std::size_t keypoints = 543;
  double dropout_rate = 0.1;
  std::uint64_t init_seed = 0;

  void validate() const {
    if (d_model == 0 || n_layers == 0 || n_heads == 0 || ffn_dim == 0 || window_len == 0 ||
        keypoints == 0) {
      throw InvalidArgument("model dimensions must be positive");
    }
    if (d_model % n_heads != 0) throw InvalidArgument("d_model must be divisible by n_heads");
    if (vocab_size < 2) throw InvalidArgument("vocab_size must be at least 2");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw InvalidArgument("dropout_rate must lie in [0, 1)");
    }
  }

  /// Width of one token before the tokenizer affine.
  std::size_t token_input_dim() const {
    return attention_mode == AttentionMode::kFrameWise ? 2 * keypoints : 2 * window_len;
  }

  std::size_t token_count() const {
    return attention_mode == AttentionMode::kFrameWise ? window_len : keypoints;
  }

  bool operator==(const ModelConfig&) const = default;
};

/// Closed-form number of learnable scalars.
inline std::uint64_t count_parameters(const ModelConfig& c) {
  c.validate();
  const std::uint64_t d = c.d_model, f = c.ffn_dim, v = c.vocab_size;
  const std::uint64_t in = c.token_input_dim();
  const std::uint64_t tokenizer = in * d + d;
  const std::uint64_t attention = 4 * (d * d + d);
  const std::uint64_t ffn = d * f + f + f * d + d;
  const std::uint64_t norms = 2 * 2 * d;
  const std::uint64_t generator = d * v + v;
  return tokenizer + c.n_layers * (attention + ffn + norms) + generator;
}

template <typename T>
struct ModelParameters {
  nn::Linear<T> tokenizer;
  std::vector<nn::EncoderLayerParams<T>> layers;
  nn::Linear<T> generator;

  /// Visits every tensor as f(name, tensor). Order is stable and defines the
  /// checkpoint layout.
  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    auto lin = [&](const std::string& name, auto& l) {
      f(name + ".weight", l.weight);
      f(name + ".bias", l.bias);
    };
    lin("tokenizer", self.tokenizer);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      auto& layer = self.layers[i];
      const std::string p = "layers." + std::to_string(i) + ".";
      lin(p + "attention.query", layer.attention.query);
      lin(p + "attention.key", layer.attention.key);
      lin(p + "attention.value", layer.attention.value);
      lin(p + "attention.output", layer.attention.output);
      lin(p + "ffn.expand", layer.ffn.expand);
      lin(p + "ffn.contract", layer.ffn.contract);
      f(p + "norm1.gamma", layer.norm1.gamma);
      f(p + "norm1.beta", layer.norm1.beta);
      f(p + "norm2.gamma", layer.norm2.gamma);
      f(p + "norm2.beta", layer.norm2.beta);
    }
    lin("generator", self.generator);
  }

  template <typename F>
  void for_each(F&& f) {
    visit(*this, std::forward<F>(f));
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, std::forward<F>(f));
  }

  std::vector<Tensor<T>*> tensors() {
    std::vector<Tensor<T>*> out;
    for_each([&](const std::string&, Tensor<T>& t) { out.push_back(&t); });
    return out;
  }
  std::vector<const Tensor<T>*> tensors() const {
    std::vector<const Tensor<T>*> out;
    for_each([&](const std::string&, const Tensor<T>& t) { out.push_back(&t); });
    return out;
  }

  std::uint64_t scalar_count() const {
    std::uint64_t n = 0;
    for_each([&](const std::string&, const Tensor<T>& t) { n += t.size(); });
    return n;
  }

  void set_zero() {
    for_each([](const std::string&, Tensor<T>& t) { t.fill(T{0}); });
  }

  /// Allocates all tensors for the config, zero-filled (layer-norm gamma included).
  static ModelParameters zeros(const ModelConfig& c) {
    c.validate();
    auto linear = [](std::size_t in, std::size_t out) {
      return nn::Linear<T>{Tensor<T>({in, out}), Tensor<T>({out})};
    };
    auto norm = [](std::size_t d) { return nn::LayerNormParams<T>{Tensor<T>({d}), Tensor<T>({d})}; };
    ModelParameters p;
    p.tokenizer = linear(c.token_input_dim(), c.d_model);
    for (std::size_t i = 0; i < c.n_layers; ++i) {
      nn::EncoderLayerParams<T> l;
      l.attention.query = linear(c.d_model, c.d_model);
      l.attention.key = linear(c.d_model, c.d_model);
      l.attention.value = linear(c.d_model, c.d_model);
      l.attention.output = linear(c.d_model, c.d_model);
      l.ffn.expand = linear(c.d_model, c.ffn_dim);
      l.ffn.contract = linear(c.ffn_dim, c.d_model);
      l.norm1 = norm(c.d_model);
      l.norm2 = norm(c.d_model);
      p.layers.push_back(std::move(l));
    }
    p.generator = linear(c.d_model, c.vocab_size);
    return p;
  }

  /// Glorot-uniform weights, zero biases, unit layer-norm scales; seeded.
  static ModelParameters initialize(const ModelConfig& c) {
    ModelParameters p = zeros(c);
    const RandomStream root(c.init_seed, 0x1417);
    std::uint64_t index = 0;
    p.for_each([&](const std::string& name, Tensor<T>& t) {
      RandomStream rng = root.split(index++);
      if (name.ends_with(".gamma")) {
        t.fill(T{1});
      } else if (name.ends_with(".weight")) {
        const double limit =
            std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.dim(1)));
        for (T& v : t.values()) v = static_cast<T>(rng.uniform(-limit, limit));
      }
    });
    return p;
  }
};

template <typename To, typename From>
ModelParameters<To> parameters_cast(const ModelParameters<From>& in) {
  ModelParameters<To> out;
  auto lin = [](const nn::Linear<From>& l) {
    return nn::Linear<To>{tensor_cast<To>(l.weight), tensor_cast<To>(l.bias)};
  };
  auto norm = [](const nn::LayerNormParams<From>& l) {
    return nn::LayerNormParams<To>{tensor_cast<To>(l.gamma), tensor_cast<To>(l.beta)};
  };
  out.tokenizer = lin(in.tokenizer);
  for (const auto& l : in.layers) {
    nn::EncoderLayerParams<To> o;
    o.attention = {lin(l.attention.query), lin(l.attention.key), lin(l.attention.value),
                   lin(l.attention.output)};
    o.ffn = {lin(l.ffn.expand), lin(l.ffn.contract)};
    o.norm1 = norm(l.norm1);
    o.norm2 = norm(l.norm2);
    out.layers.push_back(std::move(o));
  }
  out.generator = lin(in.generator);
  return out;
}

/// Rearranges a stacked [window_len, K, 2] window into tokenizer input rows.
/// Frame-wise: one row per frame (2K wide). Trajectory-wise: one row per
/// keypoint holding its (x, y) over time (2 * window_len wide).
template <typename T>
Tensor<T> token_inputs(const Tensor<T>& stacked, AttentionMode mode) {
  if (stacked.rank() != 3 || stacked.dim(2) != 2) {
    throw InvalidArgument("expected a [window_len, K, 2] tensor");
  }
  const std::size_t len = stacked.dim(0), k = stacked.dim(1);
  if (mode == AttentionMode::kFrameWise) {
    return Tensor<T>({len, 2 * k}, stacked.values());
  }
  Tensor<T> out({k, 2 * len});
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      out.at(j, 2 * t) = stacked[(t * k + j) * 2];
      out.at(j, 2 * t + 1) = stacked[(t * k + j) * 2 + 1];
    }
  }
  return out;
}

template <typename T>
struct ForwardCache {
  Tensor<T> token_inputs;
  std::vector<nn::EncoderLayerCache<T>> layers;
  Tensor<T> encoded;
  Tensor<T> pooled;
};

template <typename T>
class Model {
 public:
  explicit Model(ModelConfig config)
      : Model(config, ModelParameters<T>::initialize(config)) {}

  Model(ModelConfig config, ModelParameters<T> params)
      : config_(config), params_(std::move(params)) {
    config_.validate();
    if (params_.scalar_count() != count_parameters(config_)) {
      throw InvalidArgument("parameters do not match model config");
    }
    pe_ = nn::positional_encoding<T>(config_.token_count(), config_.d_model);
  }

  const ModelConfig& config() const noexcept { return config_; }
  const ModelParameters<T>& parameters() const noexcept { return params_; }
  ModelParameters<T>& parameters() noexcept { return params_; }
  const Tensor<T>& positional_table() const noexcept { return pe_; }

  /// Tokenizer affine on the rearranged input: [T, d_model].
  Tensor<T> tokenize(const Tensor<T>& stacked) const {
    check_input(stacked);
    return nn::linear_forward(token_inputs(stacked, config_.attention_mode), params_.tokenizer);
  }

  /// Runs the encoder stack on token embeddings, optionally adding positions first.
  Tensor<T> encode(Tensor<T> tokens, bool add_positions = true) const {
    if (add_positions) add_pe(tokens);
    for (const auto& layer : params_.layers) {
      tokens = nn::encoder_layer_forward(tokens, layer, config_.n_heads);
    }
    return tokens;
  }

  /// Mean-pools tokens and maps them to vocab_size logits.
  Tensor<T> generate(const Tensor<T>& encoded) const {
    return nn::linear_forward(mean_pool(encoded), params_.generator);
  }

  /// Inference forward pass; logits have shape [vocab_size].
  Tensor<T> forward(const Tensor<T>& stacked) const {
    return forward_train(stacked, nullptr, nullptr);
  }

  Tensor<T> forward(const Window& window) const { return forward(stack_window<T>(window)); }

  std::vector<Tensor<T>> forward_batch(const std::vector<Tensor<T>>& batch) const {
    std::vector<Tensor<T>> out;
    out.reserve(batch.size());
    for (const auto& x : batch) out.push_back(forward(x));
    return out;
  }

  /// Forward pass that records activations for backward(). Dropout is active
  /// only when dropout_rng is non-null.
  Tensor<T> forward_train(const Tensor<T>& stacked, ForwardCache<T>* cache,
                          RandomStream* dropout_rng) const {
    check_input(stacked);
    Tensor<T> in = token_inputs(stacked, config_.attention_mode);
    Tensor<T> x = nn::linear_forward(in, params_.tokenizer);
    add_pe(x);
    if (cache) cache->layers.resize(params_.layers.size());
    for (std::size_t i = 0; i < params_.layers.size(); ++i) {
      x = nn::encoder_layer_forward(x, params_.layers[i], config_.n_heads, config_.dropout_rate,
                                    dropout_rng, cache ? &cache->layers[i] : nullptr);
    }
    Tensor<T> pooled = mean_pool(x);
    Tensor<T> logits = nn::linear_forward(pooled, params_.generator);
    if (cache) {
      cache->token_inputs = std::move(in);
      cache->encoded = std::move(x);
      cache->pooled = std::move(pooled);
    }
    return Tensor<T>({config_.vocab_size}, std::move(logits.values()));
  }

  /// Accumulates dL/dparams into grads given dL/dlogits.
  void backward(const ForwardCache<T>& cache, const Tensor<T>& dlogits,
                ModelParameters<T>& grads) const {
    const std::size_t d = config_.d_model;
    Tensor<T> dl({1, config_.vocab_size}, dlogits.values());
    Tensor<T> dpooled = nn::linear_backward(cache.pooled, params_.generator, dl, grads.generator);
    const std::size_t tokens = cache.encoded.dim(0);
    Tensor<T> dx({tokens, d});
    const T inv = T{1} / static_cast<T>(tokens);
    for (std::size_t t = 0; t < tokens; ++t) {
      for (std::size_t j = 0; j < d; ++j) dx.at(t, j) = dpooled[j] * inv;
    }
    for (std::size_t i = params_.layers.size(); i-- > 0;) {
      dx = nn::encoder_layer_backward(cache.layers[i], params_.layers[i], config_.n_heads, dx,
                                      grads.layers[i]);
    }
    nn::linear_backward(cache.token_inputs, params_.tokenizer, dx, grads.tokenizer,
                        /*need_input_grad=*/false);
  }

 private:
  void check_input(const Tensor<T>& stacked) const {
    if (stacked.rank() != 3 || stacked.dim(0) != config_.window_len ||
        stacked.dim(1) != config_.keypoints || stacked.dim(2) != 2) {
      throw InvalidArgument("input shape does not match [window_len, K, 2] of the model");
    }
  }

  void add_pe(Tensor<T>& x) const {
    if (x.dim(0) != pe_.dim(0)) throw InvalidArgument("token count mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += pe_[i];
  }

  static Tensor<T> mean_pool(const Tensor<T>& x) {
    const std::size_t n = x.dim(0), d = x.dim(1);
    Tensor<T> pooled({1, d});
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t j = 0; j < d; ++j) pooled[j] += x.at(t, j);
    }
    for (T& v : pooled.values()) v /= static_cast<T>(n);
    return pooled;
  }

  ModelConfig config_;
  ModelParameters<T> params_;
  Tensor<T> pe_;
};

/// Multiply-accumulate estimate of one forward pass, from the same closed forms
/// as count_parameters.
inline std::uint64_t forward_macs(const ModelConfig& c) {
  c.validate();
  const std::uint64_t t = c.token_count(), d = c.d_model, f = c.ffn_dim;
  const std::uint64_t tokenizer = t * c.token_input_dim() * d;
  const std::uint64_t projections = 4 * t * d * d;
  const std::uint64_t scores = 2 * t * t * d;
  const std::uint64_t ffn = 2 * t * d * f;
  const std::uint64_t generator = d * c.vocab_size;
  return tokenizer + c.n_layers * (projections + scores + ffn) + generator;
}

}  // namespace kpsign
