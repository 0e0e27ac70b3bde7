// Frames, 16-frame windows, and conversion to the [T, K, 2] model input.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kpsign/error.hpp"
#include "kpsign/tensor.hpp"

namespace kpsign {

inline constexpr std::size_t kDefaultWindowLength = 16;

// Normalized coordinates are clamped to this band so far-off detections stay bounded.
inline constexpr double kNormalizedMin = -0.5;
inline constexpr double kNormalizedMax = 1.5;

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

/// One frame of pixel-space keypoints.
struct Frame {
  std::vector<Point> coords;
  double width = 0.0;
  double height = 0.0;
  std::int64_t frame_index = 0;

  bool operator==(const Frame&) const = default;
};

struct Window {
  std::vector<Frame> frames;
  std::size_t label_id = 0;
  std::int64_t signer_id = 0;

  std::size_t length() const noexcept { return frames.size(); }
  std::size_t keypoints() const noexcept {
    return frames.empty() ? 0 : frames.front().coords.size();
  }

  bool operator==(const Window&) const = default;
};

/// Throws InvalidArgument unless the window has window_len consecutive frames
/// of K finite keypoints with positive dimensions.
inline void validate_window(const Window& w, std::size_t window_len, std::size_t k) {
  if (w.frames.size() != window_len) {
    throw InvalidArgument("window length " + std::to_string(w.frames.size()) +
                          " does not match " + std::to_string(window_len));
  }
  for (std::size_t t = 0; t < w.frames.size(); ++t) {
    const Frame& f = w.frames[t];
    if (f.coords.size() != k) {
      throw InvalidArgument("frame keypoint count does not match layout");
    }
    if (!(f.width > 0.0) || !(f.height > 0.0)) {
      throw InvalidArgument("frame dimensions must be positive");
    }
    if (t > 0 && f.frame_index != w.frames[t - 1].frame_index + 1) {
      throw InvalidArgument("window frames are not consecutive");
    }
    for (const Point& p : f.coords) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw InvalidArgument("non-finite keypoint coordinate");
      }
    }
  }
}

/// Maps pixel coordinates to (x/width, y/height), clamped to [-0.5, 1.5].
inline std::vector<Point> normalize_frame(const Frame& frame) {
  if (!(frame.width > 0.0) || !(frame.height > 0.0)) {
    throw InvalidArgument("frame dimensions must be positive");
  }
  std::vector<Point> out;
  out.reserve(frame.coords.size());
  for (const Point& p : frame.coords) {
    out.push_back({std::clamp(p.x / frame.width, kNormalizedMin, kNormalizedMax),
                   std::clamp(p.y / frame.height, kNormalizedMin, kNormalizedMax)});
  }
  return out;
}

/// Stacks a window into a [window_len, K, 2] tensor of normalized coordinates.
template <typename T = double>
Tensor<T> stack_window(const Window& window) {
  if (window.frames.empty()) throw InvalidArgument("empty window");
  const std::size_t len = window.frames.size();
  const std::size_t k = window.keypoints();
  if (k == 0) throw InvalidArgument("window frames have no keypoints");
  Tensor<T> out({len, k, 2});
  for (std::size_t t = 0; t < len; ++t) {
    if (window.frames[t].coords.size() != k) {
      throw InvalidArgument("frame keypoint count mismatch within window");
    }
    const auto norm = normalize_frame(window.frames[t]);
    for (std::size_t j = 0; j < k; ++j) {
      out[(t * k + j) * 2] = static_cast<T>(norm[j].x);
      out[(t * k + j) * 2 + 1] = static_cast<T>(norm[j].y);
    }
  }
  return out;
}

/// Inverse of stack_window for coordinates inside the clamp band.
template <typename T>
Window unstack_window(const Tensor<T>& stacked, double width, double height,
                      std::int64_t first_frame_index = 0, std::size_t label_id = 0,
                      std::int64_t signer_id = 0) {
  if (stacked.rank() != 3 || stacked.dim(2) != 2) {
    throw InvalidArgument("expected a [T, K, 2] tensor");
  }
  Window w;
  w.label_id = label_id;
  w.signer_id = signer_id;
  const std::size_t len = stacked.dim(0);
  const std::size_t k = stacked.dim(1);
  for (std::size_t t = 0; t < len; ++t) {
    Frame f;
    f.width = width;
    f.height = height;
    f.frame_index = first_frame_index + static_cast<std::int64_t>(t);
    f.coords.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
      f.coords.push_back({static_cast<double>(stacked[(t * k + j) * 2]) * width,
                          static_cast<double>(stacked[(t * k + j) * 2 + 1]) * height});
    }
    w.frames.push_back(std::move(f));
  }
  return w;
}

}  // namespace kpsign
