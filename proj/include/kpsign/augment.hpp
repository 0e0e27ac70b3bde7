// Geometric window augmentations in pixel space. Every transform applies the
// same parameters to all frames of a window.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "kpsign/error.hpp"
#include "kpsign/layout.hpp"
#include "kpsign/rng.hpp"
#include "kpsign/window.hpp"

namespace kpsign::augment {

struct Enabled {
  bool shift = true;
  bool scale = false;
  bool rotate = false;
  bool flip = false;

  bool any() const noexcept { return shift || scale || rotate || flip; }
  bool operator==(const Enabled&) const = default;
};

struct AugmentConfig {
  double shift_range = 2.0;     // +/- pixels
  double scale_min = 0.90;
  double scale_max = 1.10;
  double rotation_range = 10.0;  // +/- degrees
  double flip_prob = 0.5;
  Enabled enabled;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(shift_range >= 0.0)) throw InvalidArgument("shift_range must be >= 0");
    if (!(scale_min > 0.0) || !(scale_max >= scale_min) || !std::isfinite(scale_max)) {
      throw InvalidArgument("scale range must be a positive finite interval");
    }
    if (!(rotation_range >= 0.0)) throw InvalidArgument("rotation_range must be >= 0");
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
      throw InvalidArgument("flip_prob must lie in [0, 1]");
    }
  }
};

/// Parameters drawn for one window. Disabled transforms keep identity values.
struct AugmentParams {
  bool flip = false;
  double rotation_deg = 0.0;
  double scale = 1.0;
  double dx = 0.0;
  double dy = 0.0;
};

/// Mean of all finite keypoints across every frame of the window.
inline Point centroid(const Window& w) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (const Frame& f : w.frames) {
    for (const Point& p : f.coords) {
      if (std::isfinite(p.x) && std::isfinite(p.y)) {
        sx += p.x;
        sy += p.y;
        ++n;
      }
    }
  }
  if (n == 0) return {};
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

inline Window shift(Window w, double dx, double dy) {
  for (Frame& f : w.frames) {
    for (Point& p : f.coords) {
      p.x += dx;
      p.y += dy;
    }
  }
  return w;
}

/// Scales about the window centroid.
inline Window scale(Window w, double s) {
  if (!(s > 0.0)) throw InvalidArgument("scale factor must be positive");
  if (s == 1.0) return w;
  const Point c = centroid(w);
  for (Frame& f : w.frames) {
    for (Point& p : f.coords) {
      p.x = c.x + (p.x - c.x) * s;
      p.y = c.y + (p.y - c.y) * s;
    }
  }
  return w;
}

/// Rigid rotation by theta degrees about the window centroid.
inline Window rotate(Window w, double theta_deg) {
  if (theta_deg == 0.0) return w;
  const Point c = centroid(w);
  const double rad = theta_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  for (Frame& f : w.frames) {
    for (Point& p : f.coords) {
      const double ux = p.x - c.x;
      const double uy = p.y - c.y;
      p.x = c.x + cs * ux - sn * uy;
      p.y = c.y + sn * ux + cs * uy;
    }
  }
  return w;
}

/// Mirrors x -> width - x, then relabels keypoints by the layout's flip pairs.
inline Window hflip(Window w, const std::vector<std::size_t>& flip_permutation) {
  for (Frame& f : w.frames) {
    if (f.coords.size() != flip_permutation.size()) {
      throw InvalidArgument("flip permutation does not match keypoint count");
    }
    std::vector<Point> mirrored(f.coords.size());
    for (std::size_t i = 0; i < f.coords.size(); ++i) {
      mirrored[flip_permutation[i]] = {f.width - f.coords[i].x, f.coords[i].y};
    }
    f.coords = std::move(mirrored);
  }
  return w;
}

inline Window hflip(Window w, const KeypointLayout& layout) {
  return hflip(std::move(w), layout.flip_permutation());
}

/// Draws parameters uniformly from the configured ranges, enabled transforms only.
inline AugmentParams sample_params(const AugmentConfig& cfg, RandomStream& rng) {
  AugmentParams p;
  if (cfg.enabled.flip) p.flip = rng.uniform01() < cfg.flip_prob;
  if (cfg.enabled.rotate) p.rotation_deg = rng.uniform(-cfg.rotation_range, cfg.rotation_range);
  if (cfg.enabled.scale) p.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  if (cfg.enabled.shift) {
    p.dx = rng.uniform(-cfg.shift_range, cfg.shift_range);
    p.dy = rng.uniform(-cfg.shift_range, cfg.shift_range);
  }
  return p;
}

/// Applies flip, rotate, scale, shift in that order.
inline Window apply_params(const AugmentParams& p, Window w,
                           const std::vector<std::size_t>& flip_permutation) {
  if (p.flip) w = hflip(std::move(w), flip_permutation);
  if (p.rotation_deg != 0.0) w = rotate(std::move(w), p.rotation_deg);
  if (p.scale != 1.0) w = scale(std::move(w), p.scale);
  if (p.dx != 0.0 || p.dy != 0.0) w = shift(std::move(w), p.dx, p.dy);
  return w;
}

inline Window apply(const AugmentConfig& cfg, RandomStream& rng, Window w,
                    const std::vector<std::size_t>& flip_permutation,
                    AugmentParams* drawn = nullptr) {
  if (!cfg.enabled.any()) return w;
  const AugmentParams p = sample_params(cfg, rng);
  if (drawn) *drawn = p;
  return apply_params(p, std::move(w), flip_permutation);
}

}  // namespace kpsign::augment
