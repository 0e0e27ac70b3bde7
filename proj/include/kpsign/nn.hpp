// Transformer building blocks with explicit reverse-mode gradients.
//
// Activations are [tokens, features] row-major matrices. Each *_forward fills
// a cache that the matching *_backward consumes; backward functions accumulate
// into parameter gradients and return the gradient w.r.t. the layer input.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "kpsign/error.hpp"
#include "kpsign/rng.hpp"
#include "kpsign/tensor.hpp"

namespace kpsign::nn {

inline constexpr double kLayerNormEpsilon = 1e-5;

template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
};

// ---------------------------------------------------------------- linear

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Linear<T>& lin) {
  const std::size_t n = x.dim(0), in = lin.in_features(), out = lin.out_features();
  if (x.dim(1) != in) throw InvalidArgument("linear input width mismatch");
  Tensor<T> y({n, out});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(lin.bias.data(), lin.bias.data() + out, y.data() + i * out);
  }
  kernels::matmul(x.data(), lin.weight.data(), y.data(), n, in, out, /*accumulate=*/true);
  return y;
}

/// Accumulates weight/bias gradients; returns dL/dx unless need_input_grad is false.
template <typename T>
Tensor<T> linear_backward(const Tensor<T>& x, const Linear<T>& lin, const Tensor<T>& dy,
                          Linear<T>& grad, bool need_input_grad = true) {
  const std::size_t n = x.dim(0), in = lin.in_features(), out = lin.out_features();
  kernels::matmul_at(x.data(), dy.data(), grad.weight.data(), n, in, out, /*accumulate=*/true);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < out; ++j) grad.bias[j] += dy[i * out + j];
  }
  if (!need_input_grad) return {};
  Tensor<T> dx({n, in});
  kernels::matmul_bt(dy.data(), lin.weight.data(), dx.data(), n, out, in);
  return dx;
}

// ---------------------------------------------------------------- layer norm

template <typename T>
struct LayerNormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;
};

/// Normalizes each row to zero mean and unit variance, then applies gamma/beta.
template <typename T>
Tensor<T> layer_norm_forward(const Tensor<T>& x, const LayerNormParams<T>& p,
                             LayerNormCache<T>* cache = nullptr) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  Tensor<T> y({n, d});
  Tensor<T> xhat({n, d});
  std::vector<T> inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    T mean{0};
    for (T v : row) mean += v;
    mean /= static_cast<T>(d);
    T var{0};
    for (T v : row) var += (v - mean) * (v - mean);
    var /= static_cast<T>(d);
    inv[i] = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEpsilon));
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mean) * inv[i];
      xhat.at(i, j) = h;
      y.at(i, j) = p.gamma[j] * h + p.beta[j];
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

template <typename T>
Tensor<T> layer_norm_backward(const LayerNormCache<T>& c, const LayerNormParams<T>& p,
                              const Tensor<T>& dy, LayerNormParams<T>& grad) {
  const std::size_t n = dy.dim(0), d = dy.dim(1);
  Tensor<T> dx({n, d});
  std::vector<T> dxhat(d);
  for (std::size_t i = 0; i < n; ++i) {
    T sum_dxhat{0}, sum_dxhat_xhat{0};
    for (std::size_t j = 0; j < d; ++j) {
      const T g = dy.at(i, j);
      const T h = c.xhat.at(i, j);
      grad.gamma[j] += g * h;
      grad.beta[j] += g;
      dxhat[j] = g * p.gamma[j];
      sum_dxhat += dxhat[j];
      sum_dxhat_xhat += dxhat[j] * h;
    }
    const T scale = c.inv_std[i] / static_cast<T>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx.at(i, j) = scale * (static_cast<T>(d) * dxhat[j] - sum_dxhat -
                             c.xhat.at(i, j) * sum_dxhat_xhat);
    }
  }
  return dx;
}

// ---------------------------------------------------------------- attention

/// softmax(q k^T / sqrt(dk)) v for a single head. Optionally returns the
/// attention weights [Tq, Tk].
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    Tensor<T>* weights = nullptr) {
  const std::size_t tq = q.dim(0), tk = k.dim(0), dk = q.dim(1), dv = v.dim(1);
  if (k.dim(1) != dk || v.dim(0) != tk) throw InvalidArgument("attention shape mismatch");
  Tensor<T> s({tq, tk});
  kernels::matmul_bt(q.data(), k.data(), s.data(), tq, dk, tk);
  const T scale = T{1} / std::sqrt(static_cast<T>(dk));
  for (T& x : s.values()) x *= scale;
  for (std::size_t i = 0; i < tq; ++i) kernels::softmax_row(s.row(i));
  Tensor<T> out({tq, dv});
  kernels::matmul(s.data(), v.data(), out.data(), tq, tk, dv);
  if (weights) *weights = std::move(s);
  return out;
}

template <typename T>
struct MultiHeadAttentionParams {
  Linear<T> query, key, value, output;
};

template <typename T>
struct MultiHeadAttentionCache {
  Tensor<T> x, q, k, v;
  std::vector<Tensor<T>> probs;  // per head, [T, T]
  Tensor<T> concat;
};

namespace detail {

template <typename T>
Tensor<T> head_slice(const Tensor<T>& m, std::size_t head, std::size_t dk) {
  const std::size_t n = m.dim(0), d = m.dim(1);
  Tensor<T> out({n, dk});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(m.data() + i * d + head * dk, dk, out.data() + i * dk);
  }
  return out;
}

template <typename T>
void add_head_slice(Tensor<T>& m, const Tensor<T>& part, std::size_t head, std::size_t dk) {
  const std::size_t n = m.dim(0), d = m.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dk; ++j) m[i * d + head * dk + j] += part[i * dk + j];
  }
}

}  // namespace detail

template <typename T>
Tensor<T> multi_head_attention_forward(const Tensor<T>& x,
                                       const MultiHeadAttentionParams<T>& p,
                                       std::size_t n_heads,
                                       MultiHeadAttentionCache<T>* cache = nullptr) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (n_heads == 0 || d % n_heads != 0) {
    throw InvalidArgument("d_model must be divisible by n_heads");
  }
  const std::size_t dk = d / n_heads;
  Tensor<T> q = linear_forward(x, p.query);
  Tensor<T> k = linear_forward(x, p.key);
  Tensor<T> v = linear_forward(x, p.value);
  Tensor<T> concat({n, d});
  std::vector<Tensor<T>> probs;
  if (cache) probs.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    Tensor<T> w;
    Tensor<T> o = attention(detail::head_slice(q, h, dk), detail::head_slice(k, h, dk),
                            detail::head_slice(v, h, dk), &w);
    detail::add_head_slice(concat, o, h, dk);
    if (cache) probs.push_back(std::move(w));
  }
  Tensor<T> y = linear_forward(concat, p.output);
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->concat = std::move(concat);
  }
  return y;
}

template <typename T>
Tensor<T> multi_head_attention_backward(const MultiHeadAttentionCache<T>& c,
                                        const MultiHeadAttentionParams<T>& p,
                                        std::size_t n_heads, const Tensor<T>& dy,
                                        MultiHeadAttentionParams<T>& grad) {
  const std::size_t n = c.x.dim(0), d = c.x.dim(1), dk = d / n_heads;
  const T scale = T{1} / std::sqrt(static_cast<T>(dk));
  Tensor<T> dconcat = linear_backward(c.concat, p.output, dy, grad.output);
  Tensor<T> dq({n, d}), dk_all({n, d}), dv({n, d});
  Tensor<T> dp({n, n}), ds({n, n});
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Tensor<T>& prob = c.probs[h];
    const Tensor<T> qh = detail::head_slice(c.q, h, dk);
    const Tensor<T> kh = detail::head_slice(c.k, h, dk);
    const Tensor<T> vh = detail::head_slice(c.v, h, dk);
    const Tensor<T> doh = detail::head_slice(dconcat, h, dk);
    // O = P V
    kernels::matmul_bt(doh.data(), vh.data(), dp.data(), n, dk, n);
    Tensor<T> dvh({n, dk});
    kernels::matmul_at(prob.data(), doh.data(), dvh.data(), n, n, dk);
    // Row-wise softmax Jacobian.
    for (std::size_t i = 0; i < n; ++i) {
      T dot{0};
      for (std::size_t j = 0; j < n; ++j) dot += dp.at(i, j) * prob.at(i, j);
      for (std::size_t j = 0; j < n; ++j) {
        ds.at(i, j) = prob.at(i, j) * (dp.at(i, j) - dot) * scale;
      }
    }
    Tensor<T> dqh({n, dk}), dkh({n, dk});
    kernels::matmul(ds.data(), kh.data(), dqh.data(), n, n, dk);
    kernels::matmul_at(ds.data(), qh.data(), dkh.data(), n, n, dk);
    detail::add_head_slice(dq, dqh, h, dk);
    detail::add_head_slice(dk_all, dkh, h, dk);
    detail::add_head_slice(dv, dvh, h, dk);
  }
  Tensor<T> dx = linear_backward(c.x, p.query, dq, grad.query);
  Tensor<T> dx_k = linear_backward(c.x, p.key, dk_all, grad.key);
  Tensor<T> dx_v = linear_backward(c.x, p.value, dv, grad.value);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx_k[i] + dx_v[i];
  return dx;
}

// ---------------------------------------------------------------- feed-forward

template <typename T>
struct FeedForwardParams {
  Linear<T> expand, contract;
};

template <typename T>
struct FeedForwardCache {
  Tensor<T> x, hidden;  // hidden is post-ReLU
};

/// Position-wise affine -> ReLU -> affine.
template <typename T>
Tensor<T> ffn_forward(const Tensor<T>& x, const FeedForwardParams<T>& p,
                      FeedForwardCache<T>* cache = nullptr) {
  Tensor<T> h = linear_forward(x, p.expand);
  for (T& v : h.values()) v = v > T{0} ? v : T{0};
  Tensor<T> y = linear_forward(h, p.contract);
  if (cache) {
    cache->x = x;
    cache->hidden = std::move(h);
  }
  return y;
}

template <typename T>
Tensor<T> ffn_backward(const FeedForwardCache<T>& c, const FeedForwardParams<T>& p,
                       const Tensor<T>& dy, FeedForwardParams<T>& grad) {
  Tensor<T> dh = linear_backward(c.hidden, p.contract, dy, grad.contract);
  for (std::size_t i = 0; i < dh.size(); ++i) {
    if (!(c.hidden[i] > T{0})) dh[i] = T{0};
  }
  return linear_backward(c.x, p.expand, dh, grad.expand);
}

// ---------------------------------------------------------------- dropout

/// Inverted dropout. Returns the mask (0 or 1/(1-rate)); empty when inactive.
template <typename T>
std::vector<T> dropout_inplace(Tensor<T>& x, double rate, RandomStream* rng) {
  if (rate <= 0.0 || rng == nullptr) return {};
  std::vector<T> mask(x.size());
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng->uniform01() < rate ? T{0} : keep;
    x[i] *= mask[i];
  }
  return mask;
}

template <typename T>
void dropout_backward_inplace(Tensor<T>& dy, const std::vector<T>& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= mask[i];
}

// ---------------------------------------------------------------- encoder layer

template <typename T>
struct EncoderLayerParams {
  MultiHeadAttentionParams<T> attention;
  FeedForwardParams<T> ffn;
  LayerNormParams<T> norm1, norm2;
};

template <typename T>
struct EncoderLayerCache {
  MultiHeadAttentionCache<T> attention;
  FeedForwardCache<T> ffn;
  LayerNormCache<T> norm1, norm2;
  std::vector<T> attention_mask, ffn_mask;
};

/// Post-norm residual block: h = LN1(x + MHA(x)); y = LN2(h + FFN(h)).
template <typename T>
Tensor<T> encoder_layer_forward(const Tensor<T>& x, const EncoderLayerParams<T>& p,
                                std::size_t n_heads, double dropout_rate = 0.0,
                                RandomStream* dropout_rng = nullptr,
                                EncoderLayerCache<T>* cache = nullptr) {
  Tensor<T> a = multi_head_attention_forward(x, p.attention, n_heads,
                                             cache ? &cache->attention : nullptr);
  auto amask = dropout_inplace(a, dropout_rate, dropout_rng);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += x[i];
  Tensor<T> h = layer_norm_forward(a, p.norm1, cache ? &cache->norm1 : nullptr);
  Tensor<T> f = ffn_forward(h, p.ffn, cache ? &cache->ffn : nullptr);
  auto fmask = dropout_inplace(f, dropout_rate, dropout_rng);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += h[i];
  Tensor<T> y = layer_norm_forward(f, p.norm2, cache ? &cache->norm2 : nullptr);
  if (cache) {
    cache->attention_mask = std::move(amask);
    cache->ffn_mask = std::move(fmask);
  }
  return y;
}

template <typename T>
Tensor<T> encoder_layer_backward(const EncoderLayerCache<T>& c, const EncoderLayerParams<T>& p,
                                 std::size_t n_heads, const Tensor<T>& dy,
                                 EncoderLayerParams<T>& grad) {
  Tensor<T> dr2 = layer_norm_backward(c.norm2, p.norm2, dy, grad.norm2);
  Tensor<T> df = dr2;
  dropout_backward_inplace(df, c.ffn_mask);
  Tensor<T> dh = ffn_backward(c.ffn, p.ffn, df, grad.ffn);
  for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dr2[i];
  Tensor<T> dr1 = layer_norm_backward(c.norm1, p.norm1, dh, grad.norm1);
  Tensor<T> da = dr1;
  dropout_backward_inplace(da, c.attention_mask);
  Tensor<T> dx = multi_head_attention_backward(c.attention, p.attention, n_heads, da,
                                               grad.attention);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dr1[i];
  return dx;
}

// ---------------------------------------------------------------- positional encoding

/// Sinusoidal table: PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(...).
template <typename T>
Tensor<T> positional_encoding(std::size_t length, std::size_t d_model) {
  Tensor<T> pe({length, d_model});
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t j = 0; j < d_model; ++j) {
      const double even = static_cast<double>(j - (j % 2));
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, even / static_cast<double>(d_model));
      pe.at(pos, j) = static_cast<T>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

}  // namespace kpsign::nn
