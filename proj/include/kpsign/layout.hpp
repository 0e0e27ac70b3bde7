// Keypoint layouts: named groups in a fixed order and the mirror table used by
// horizontal flipping.
//
// Group order is pose (33), left_hand (21), right_hand (21), face (468 or a
// subset). Indices in flip_pairs are global keypoint indices.
#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kpsign/error.hpp"
#include "kpsign/face_mesh.hpp"

namespace kpsign {

inline constexpr std::size_t kPoseKeypoints = 33;
inline constexpr std::size_t kHandKeypoints = 21;

// Pose landmark left/right pairs (nose, index 0, is on the midline).
inline constexpr std::array<std::pair<int, int>, 16> kPoseMirrorPairs{{
    {1, 4}, {2, 5}, {3, 6}, {7, 8}, {9, 10}, {11, 12}, {13, 14}, {15, 16},
    {17, 18}, {19, 20}, {21, 22}, {23, 24}, {25, 26}, {27, 28}, {29, 30}, {31, 32},
}};

struct KeypointGroup {
  std::string name;
  std::size_t count = 0;

  bool operator==(const KeypointGroup&) const = default;
};

class KeypointLayout {
 public:
  KeypointLayout(std::vector<KeypointGroup> groups,
                 std::vector<std::pair<std::size_t, std::size_t>> flip_pairs,
                 std::optional<std::vector<int>> face_subset = std::nullopt)
      : groups_(std::move(groups)),
        flip_pairs_(std::move(flip_pairs)),
        face_subset_(std::move(face_subset)) {
    validate();
  }

  const std::vector<KeypointGroup>& groups() const noexcept { return groups_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& flip_pairs() const noexcept {
    return flip_pairs_;
  }
  const std::optional<std::vector<int>>& face_subset() const noexcept {
    return face_subset_;
  }

  std::size_t total() const noexcept {
    std::size_t k = 0;
    for (const auto& g : groups_) k += g.count;
    return k;
  }

  /// First global index of the named group, or nullopt if absent.
  std::optional<std::size_t> group_offset(std::string_view name) const {
    std::size_t off = 0;
    for (const auto& g : groups_) {
      if (g.name == name) return off;
      off += g.count;
    }
    return std::nullopt;
  }

  std::size_t group_count(std::string_view name) const {
    for (const auto& g : groups_) {
      if (g.name == name) return g.count;
    }
    return 0;
  }

  /// perm[i] is the index keypoint i moves to under mirroring.
  std::vector<std::size_t> flip_permutation() const {
    std::vector<std::size_t> perm(total());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (const auto& [a, b] : flip_pairs_) {
      perm[a] = b;
      perm[b] = a;
    }
    return perm;
  }

  bool operator==(const KeypointLayout&) const = default;

 private:
  void validate() const {
    const std::size_t k = total();
    if (k == 0) throw InvalidArgument("layout must contain at least one keypoint");
    std::vector<bool> seen(k, false);
    for (const auto& [a, b] : flip_pairs_) {
      if (a >= k || b >= k || a == b) {
        throw InvalidArgument("flip pair index out of range or self-paired");
      }
      if (seen[a] || seen[b]) {
        throw InvalidArgument("keypoint appears in more than one flip pair");
      }
      seen[a] = seen[b] = true;
    }
    if (face_subset_) {
      std::vector<bool> used(face_mesh::kLandmarkCount, false);
      for (int idx : *face_subset_) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= face_mesh::kLandmarkCount) {
          throw InvalidArgument("face subset index out of range");
        }
        if (used[static_cast<std::size_t>(idx)]) {
          throw InvalidArgument("duplicate face subset index");
        }
        used[static_cast<std::size_t>(idx)] = true;
      }
      if (face_subset_->size() != group_count("face")) {
        throw InvalidArgument("face subset size does not match face group");
      }
    }
  }

  std::vector<KeypointGroup> groups_;
  std::vector<std::pair<std::size_t, std::size_t>> flip_pairs_;
  std::optional<std::vector<int>> face_subset_;
};

inline std::size_t total_keypoints(const KeypointLayout& layout) { return layout.total(); }

/// Standard body layout with the requested face group.
///
/// face_count 468 selects the full face mesh, 128 the default reduced subset.
/// Any other count (including 0) requires an explicit subset of that length.
inline KeypointLayout build_layout(std::size_t face_count,
                                   std::optional<std::vector<int>> face_subset = std::nullopt) {
  std::optional<std::vector<int>> subset;
  if (face_subset) {
    if (face_subset->size() != face_count) {
      throw InvalidArgument("face subset length must equal face_count");
    }
    subset = std::move(face_subset);
  } else if (face_count == 128) {
    subset = std::vector<int>(face_mesh::kReducedSubset.begin(),
                              face_mesh::kReducedSubset.end());
  } else if (face_count != face_mesh::kLandmarkCount) {
    throw InvalidArgument("unsupported face_count " + std::to_string(face_count) +
                          " without an explicit face subset");
  }

  std::vector<KeypointGroup> groups{{"pose", kPoseKeypoints},
                                    {"left_hand", kHandKeypoints},
                                    {"right_hand", kHandKeypoints}};
  if (face_count > 0) groups.push_back({"face", face_count});

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [a, b] : kPoseMirrorPairs) {
    pairs.emplace_back(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
  }
  const std::size_t left = kPoseKeypoints;
  const std::size_t right = kPoseKeypoints + kHandKeypoints;
  for (std::size_t i = 0; i < kHandKeypoints; ++i) pairs.emplace_back(left + i, right + i);

  const std::size_t face = right + kHandKeypoints;
  if (face_count > 0) {
    // Position of each face-mesh landmark within the face group, or -1.
    std::vector<long> position(face_mesh::kLandmarkCount, -1);
    if (subset) {
      for (std::size_t i = 0; i < subset->size(); ++i) {
        const int lm = (*subset)[i];
        if (lm >= 0 && static_cast<std::size_t>(lm) < position.size()) {
          position[static_cast<std::size_t>(lm)] = static_cast<long>(i);
        }
      }
    } else {
      for (std::size_t i = 0; i < position.size(); ++i) position[i] = static_cast<long>(i);
    }
    for (const auto& [a, b] : face_mesh::kMirrorPairs) {
      const long pa = position[static_cast<std::size_t>(a)];
      const long pb = position[static_cast<std::size_t>(b)];
      // A landmark whose mirror image is not retained keeps its own index.
      if (pa >= 0 && pb >= 0) {
        pairs.emplace_back(face + static_cast<std::size_t>(pa),
                           face + static_cast<std::size_t>(pb));
      }
    }
  }
  return KeypointLayout(std::move(groups), std::move(pairs), std::move(subset));
}

}  // namespace kpsign
