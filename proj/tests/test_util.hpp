// Shared helpers for the unit tests.
#pragma once

#include <random>

#include "kpsign/model.hpp"

namespace kpsign::testing {

inline Tensor<double> random_tensor(std::vector<std::size_t> shape, std::mt19937& gen,
                                    double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(gen);
  return t;
}

/// Parameters with every tensor (biases, gains included) filled at random.
inline ModelParameters<double> random_parameters(const ModelConfig& c, std::uint32_t seed,
                                                 double scale = 0.5) {
  auto p = ModelParameters<double>::zeros(c);
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  p.for_each([&](const std::string& name, Tensor<double>& t) {
    for (double& v : t.values()) v = u(gen) + (name.ends_with(".gamma") ? 1.0 : 0.0);
  });
  return p;
}

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.ffn_dim = 16;
  c.vocab_size = 3;
  c.window_len = 4;
  c.keypoints = 4;
  c.dropout_rate = 0.0;
  return c;
}

inline Tensor<double> permute_rows(const Tensor<double>& x, const std::vector<std::size_t>& perm) {
  Tensor<double> out(x.shape());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t j = 0; j < x.dim(1); ++j) out.at(i, j) = x.at(perm[i], j);
  }
  return out;
}

}  // namespace kpsign::testing
