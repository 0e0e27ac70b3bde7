#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kpsign/augment.hpp"

using namespace kpsign;
using namespace kpsign::augment;

namespace {

// Coordinates are f32-representable, as they are after loading a KPSQ file.
Window random_window(std::size_t len, std::size_t k, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(0.0f, 444.0f);
  Window w;
  for (std::size_t t = 0; t < len; ++t) {
    Frame f{{}, 444, 444, static_cast<std::int64_t>(t)};
    for (std::size_t j = 0; j < k; ++j) f.coords.push_back({u(gen), u(gen)});
    w.frames.push_back(std::move(f));
  }
  return w;
}

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Max relative deviation of every pairwise distance (within each frame and
// across frames) from factor * original.
double max_distance_error(const Window& a, const Window& b, double factor) {
  std::vector<Point> pa, pb;
  for (const auto& f : a.frames) pa.insert(pa.end(), f.coords.begin(), f.coords.end());
  for (const auto& f : b.frames) pb.insert(pb.end(), f.coords.begin(), f.coords.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = i + 1; j < pa.size(); ++j) {
      const double d0 = dist(pa[i], pa[j]) * factor;
      const double d1 = dist(pb[i], pb[j]);
      if (d0 > 0) worst = std::max(worst, std::abs(d1 - d0) / d0);
    }
  }
  return worst;
}

}  // namespace

TEST(Shift, IdentityAndArithmetic) {
  const Window w = random_window(16, 5, 1);
  EXPECT_EQ(shift(w, 0.0, 0.0), w);
  Window one{{Frame{{{100, 200}}, 444, 444, 0}}, 0, 0};
  EXPECT_EQ(shift(one, 2, -1).frames[0].coords[0], (Point{102, 199}));
}

TEST(Shift, PreservesDistances) {
  const Window w = random_window(4, 6, 2);
  EXPECT_LT(max_distance_error(w, shift(w, 1.7, -0.3), 1.0), 1e-9);
}

TEST(Scale, IdentityAndFixedCentroid) {
  const Window w = random_window(16, 5, 3);
  EXPECT_EQ(scale(w, 1.0), w);
  for (double s : {0.75, 0.9, 1.1, 2.0}) {
    const Point c0 = centroid(w), c1 = centroid(scale(w, s));
    EXPECT_NEAR(c0.x, c1.x, 1e-9);
    EXPECT_NEAR(c0.y, c1.y, 1e-9);
    EXPECT_LT(max_distance_error(w, scale(w, s), s), 1e-9);
  }
  EXPECT_THROW(scale(w, 0.0), InvalidArgument);
}

TEST(Scale, ShrinksTowardCentroid) {
  const Window w = random_window(2, 4, 4);
  const Window s = scale(w, 0.75);
  const Point c = centroid(w);
  EXPECT_NEAR(dist(s.frames[0].coords[0], c), 0.75 * dist(w.frames[0].coords[0], c), 1e-9);
}

TEST(Rotate, IdentityInverseIsometry) {
  const Window w = random_window(16, 5, 5);
  EXPECT_EQ(rotate(w, 0.0), w);
  for (double theta : {3.0, -10.0, 45.0, 179.0}) {
    const Window r = rotate(w, theta);
    EXPECT_LT(max_distance_error(w, r, 1.0), 1e-9);
    const Window back = rotate(r, -theta);
    for (std::size_t t = 0; t < w.frames.size(); ++t) {
      for (std::size_t j = 0; j < 5; ++j) {
        EXPECT_NEAR(back.frames[t].coords[j].x, w.frames[t].coords[j].x, 1e-9);
        EXPECT_NEAR(back.frames[t].coords[j].y, w.frames[t].coords[j].y, 1e-9);
      }
    }
    const double d0 = dist(w.frames[0].coords[0], w.frames[0].coords[1]);
    EXPECT_NEAR(dist(r.frames[0].coords[0], r.frames[0].coords[1]) / d0, 1.0, 1e-9);
  }
}

TEST(HFlip, InvolutionAndPermutation) {
  const auto layout = build_layout(128);
  const auto perm = layout.flip_permutation();
  const Window w = random_window(16, layout.total(), 6);
  EXPECT_EQ(hflip(hflip(w, perm), perm), w);

  Window w2 = w;
  w2.frames[0].coords[33] = {100, 50};  // left hand wrist
  const Window f = hflip(w2, layout);
  EXPECT_EQ(f.frames[0].coords[54], (Point{344, 50}));  // now right hand wrist
  for (std::size_t t = 0; t < w.frames.size(); ++t) {
    for (std::size_t j = 0; j < layout.total(); ++j) {
      EXPECT_EQ(f.frames[t].coords[perm[j]].y, w2.frames[t].coords[j].y);
    }
  }
}

TEST(Apply, EmptyEnabledSetIsIdentity) {
  AugmentConfig cfg;
  cfg.enabled = {false, false, false, false};
  RandomStream rng(1);
  const Window w = random_window(16, 5, 7);
  EXPECT_EQ(apply(cfg, rng, w, build_layout(0, std::vector<int>{}).flip_permutation()).frames.size(),
            16u);
  RandomStream rng2(1);
  std::vector<std::size_t> perm{0, 1, 2, 3, 4};
  EXPECT_EQ(apply(cfg, rng2, w, perm), w);
}

TEST(Apply, DefaultProfileIsShiftOnly) {
  const AugmentConfig cfg;
  EXPECT_TRUE(cfg.enabled.shift);
  EXPECT_FALSE(cfg.enabled.scale);
  EXPECT_FALSE(cfg.enabled.rotate);
  EXPECT_FALSE(cfg.enabled.flip);
  EXPECT_EQ(cfg.shift_range, 2.0);
  EXPECT_EQ(cfg.scale_min, 0.90);
  EXPECT_EQ(cfg.scale_max, 1.10);
}

TEST(Apply, DeterministicGivenStream) {
  AugmentConfig cfg;
  cfg.enabled = {true, true, true, true};
  std::vector<std::size_t> perm{1, 0, 2, 3, 4};
  const Window w = random_window(16, 5, 8);
  RandomStream a(77), b(77);
  EXPECT_EQ(apply(cfg, a, w, perm), apply(cfg, b, w, perm));
}

TEST(Apply, OrderIsFlipRotateScaleShift) {
  AugmentParams p{true, 7.0, 1.05, 1.5, -0.5};
  std::vector<std::size_t> perm{1, 0, 2, 3, 4};
  const Window w = random_window(16, 5, 9);
  const Window expected = shift(scale(rotate(hflip(w, perm), 7.0), 1.05), 1.5, -0.5);
  EXPECT_EQ(apply_params(p, w, perm), expected);
}

TEST(Apply, FramewiseEqualsWindowwiseForShiftAndFlip) {
  // Shift and flip do not depend on the centroid, so applying them per frame
  // with shared parameters matches applying them to the whole window.
  std::vector<std::size_t> perm{1, 0, 2, 3, 4};
  const Window w = random_window(6, 5, 10);
  AugmentParams p{true, 0.0, 1.0, 1.25, 0.5};
  const Window whole = apply_params(p, w, perm);
  for (std::size_t t = 0; t < w.frames.size(); ++t) {
    Window single{{w.frames[t]}, 0, 0};
    EXPECT_EQ(apply_params(p, single, perm).frames[0], whole.frames[t]);
  }
}

TEST(Apply, NeverProducesNan) {
  AugmentConfig cfg;
  cfg.enabled = {true, true, true, true};
  std::vector<std::size_t> perm{1, 0, 2, 3, 4};
  RandomStream rng(5);
  for (int i = 0; i < 200; ++i) {
    const Window out = apply(cfg, rng, random_window(4, 5, 100 + i), perm);
    for (const auto& f : out.frames) {
      for (const auto& p : f.coords) EXPECT_TRUE(std::isfinite(p.x) && std::isfinite(p.y));
    }
  }
}

TEST(SampleParams, StaysInConfiguredRanges) {
  AugmentConfig cfg;
  cfg.enabled = {true, true, true, true};
  RandomStream rng(2024);
  std::size_t flips = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto p = sample_params(cfg, rng);
    ASSERT_GE(p.dx, -2.0);
    ASSERT_LE(p.dx, 2.0);
    ASSERT_GE(p.dy, -2.0);
    ASSERT_LE(p.dy, 2.0);
    ASSERT_GE(p.scale, 0.9);
    ASSERT_LE(p.scale, 1.1);
    ASSERT_GE(p.rotation_deg, -10.0);
    ASSERT_LE(p.rotation_deg, 10.0);
    flips += p.flip;
  }
  EXPECT_NEAR(static_cast<double>(flips) / n, 0.5, 0.02);
}

TEST(AugmentConfig, Validation) {
  AugmentConfig c;
  c.shift_range = -1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.scale_min = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.flip_prob = 1.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
}
