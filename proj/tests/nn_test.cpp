#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "kpsign/nn.hpp"
#include "test_util.hpp"

using namespace kpsign;
using namespace kpsign::nn;
using kpsign::testing::random_tensor;

TEST(Attention, SingleTokenReturnsItsValue) {
  Tensor<double> q({1, 3}, {0.3, -1.0, 2.0});
  Tensor<double> k({1, 3}, {1.0, 0.5, -0.2});
  Tensor<double> v({1, 2}, {4.0, -5.0});
  EXPECT_EQ(attention(q, k, v).values(), v.values());
}

TEST(Attention, IdenticalKeysAverageValues) {
  std::mt19937 gen(1);
  const auto q = random_tensor({3, 4}, gen);
  Tensor<double> k({5, 4});
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) k.at(i, j) = 0.25 * static_cast<double>(j);
  }
  const auto v = random_tensor({5, 2}, gen);
  const auto out = attention(q, k, v);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double mean = 0;
      for (std::size_t r = 0; r < 5; ++r) mean += v.at(r, j) / 5.0;
      EXPECT_NEAR(out.at(i, j), mean, 1e-12);
    }
  }
}

TEST(Attention, TwoTokenHandComputed) {
  // q = [1, 0]; keys e1, e2; dk = 2 so the scores are [1/sqrt2, 0].
  Tensor<double> q({1, 2}, {1.0, 0.0});
  Tensor<double> k({2, 2}, {1.0, 0.0, 0.0, 1.0});
  Tensor<double> v({2, 2}, {1.0, 2.0, 3.0, 4.0});
  const double e0 = std::exp(1.0 / std::sqrt(2.0));
  const double e1 = std::exp(0.0);
  const double w0 = e0 / (e0 + e1), w1 = e1 / (e0 + e1);
  Tensor<double> weights;
  const auto out = attention(q, k, v, &weights);
  EXPECT_NEAR(weights[0], w0, 1e-15);
  EXPECT_NEAR(weights[1], w1, 1e-15);
  EXPECT_NEAR(w0, 0.66976155, 1e-8);
  EXPECT_NEAR(out[0], w0 * 1.0 + w1 * 3.0, 1e-14);
  EXPECT_NEAR(out[1], w0 * 2.0 + w1 * 4.0, 1e-14);
}

TEST(Attention, RowsSumToOne) {
  std::mt19937 gen(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t tq = 1 + gen() % 12, tk = 1 + gen() % 12, dk = 1 + gen() % 16;
    Tensor<double> w;
    attention(random_tensor({tq, dk}, gen, -3, 3), random_tensor({tk, dk}, gen, -3, 3),
              random_tensor({tk, 3}, gen), &w);
    for (std::size_t i = 0; i < tq; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < tk; ++j) s += w.at(i, j);
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

namespace {

Linear<double> random_linear(std::size_t in, std::size_t out, std::mt19937& gen) {
  return {random_tensor({in, out}, gen, -0.5, 0.5), random_tensor({out}, gen, -0.5, 0.5)};
}

MultiHeadAttentionParams<double> random_mha(std::size_t d, std::mt19937& gen) {
  return {random_linear(d, d, gen), random_linear(d, d, gen), random_linear(d, d, gen),
          random_linear(d, d, gen)};
}

}  // namespace

TEST(MultiHeadAttention, OneHeadIsPlainAttentionPlusProjection) {
  std::mt19937 gen(3);
  const auto p = random_mha(6, gen);
  const auto x = random_tensor({5, 6}, gen);
  const auto direct = linear_forward(
      attention(linear_forward(x, p.query), linear_forward(x, p.key), linear_forward(x, p.value)),
      p.output);
  const auto mha = multi_head_attention_forward(x, p, 1);
  for (std::size_t i = 0; i < mha.size(); ++i) EXPECT_NEAR(mha[i], direct[i], 1e-12);
}

TEST(MultiHeadAttention, OutputShapeMatchesInput) {
  std::mt19937 gen(4);
  const auto p = random_mha(8, gen);
  for (std::size_t t : {1u, 2u, 7u, 16u}) {
    EXPECT_EQ(multi_head_attention_forward(random_tensor({t, 8}, gen), p, 4).shape(),
              (std::vector<std::size_t>{t, 8}));
  }
  EXPECT_THROW(multi_head_attention_forward(random_tensor({3, 8}, gen), p, 3), InvalidArgument);
}

TEST(MultiHeadAttention, PermutationEquivariant) {
  std::mt19937 gen(5);
  const auto p = random_mha(8, gen);
  const auto x = random_tensor({6, 8}, gen);
  std::vector<std::size_t> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  const auto a = kpsign::testing::permute_rows(multi_head_attention_forward(x, p, 2), perm);
  const auto b = multi_head_attention_forward(kpsign::testing::permute_rows(x, perm), p, 2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(LayerNorm, ConstantTokenGoesToZero) {
  LayerNormParams<double> p{Tensor<double>({4}, 1.0), Tensor<double>({4}, 0.0)};
  Tensor<double> x({1, 4}, 3.5);
  const auto y = layer_norm_forward(x, p);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, ShiftInvariantAndStandardized) {
  std::mt19937 gen(6);
  LayerNormParams<double> p{Tensor<double>({16}, 1.0), Tensor<double>({16}, 0.0)};
  const auto x = random_tensor({3, 16}, gen, -5, 5);
  auto shifted = x;
  for (double& v : shifted.values()) v += 12.25;
  const auto a = layer_norm_forward(x, p), b = layer_norm_forward(shifted, p);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0, var = 0;
    for (double v : a.row(r)) mean += v / 16;
    for (double v : a.row(r)) var += (v - mean) * (v - mean) / 16;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-3);  // epsilon in the denominator
  }
}

TEST(FeedForward, PositionWise) {
  std::mt19937 gen(7);
  FeedForwardParams<double> p{random_linear(4, 9, gen), random_linear(9, 4, gen)};
  auto x = random_tensor({3, 4}, gen);
  for (std::size_t j = 0; j < 4; ++j) x.at(2, j) = x.at(0, j);
  const auto y = ffn_forward(x, p);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(y.at(0, j), y.at(2, j));
}

TEST(FeedForward, MatchesAffineReluAffine) {
  std::mt19937 gen(8);
  FeedForwardParams<double> p{random_linear(3, 5, gen), random_linear(5, 2, gen)};
  const auto x = random_tensor({1, 3}, gen);
  std::vector<double> h(5);
  for (std::size_t k = 0; k < 5; ++k) {
    double s = p.expand.bias[k];
    for (std::size_t i = 0; i < 3; ++i) s += x[i] * p.expand.weight.at(i, k);
    h[k] = std::max(0.0, s);
  }
  const auto y = ffn_forward(x, p);
  for (std::size_t j = 0; j < 2; ++j) {
    double s = p.contract.bias[j];
    for (std::size_t k = 0; k < 5; ++k) s += h[k] * p.contract.weight.at(k, j);
    EXPECT_NEAR(y[j], s, 1e-14);
  }
}

TEST(PositionalEncoding, KnownValues) {
  const auto pe = positional_encoding<double>(16, 512);
  for (std::size_t j = 0; j < 512; j += 2) {
    EXPECT_EQ(pe.at(0, j), 0.0);
    EXPECT_EQ(pe.at(0, j + 1), 1.0);
  }
  EXPECT_NEAR(pe.at(1, 0), std::sin(1.0), 1e-15);
  EXPECT_NEAR(pe.at(1, 0), 0.841471, 1e-6);
  EXPECT_NEAR(pe.at(3, 5), std::cos(3.0 / std::pow(10000.0, 4.0 / 512.0)), 1e-15);
  for (double v : pe.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Dropout, InactiveWithoutStreamOrRate) {
  std::mt19937 gen(9);
  auto x = random_tensor({4, 4}, gen);
  const auto copy = x;
  RandomStream rng(1);
  EXPECT_TRUE(dropout_inplace(x, 0.0, &rng).empty());
  EXPECT_TRUE(dropout_inplace(x, 0.5, nullptr).empty());
  EXPECT_EQ(x, copy);
}

TEST(Dropout, ScalesKeptUnits) {
  Tensor<double> x({100, 100}, 1.0);
  RandomStream rng(2);
  const auto mask = dropout_inplace(x, 0.25, &rng);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) ++zeros;
    else EXPECT_NEAR(x[i], 1.0 / 0.75, 1e-15);
  }
  EXPECT_NEAR(static_cast<double>(zeros) / x.size(), 0.25, 0.02);
}
