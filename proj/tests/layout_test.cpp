#include <gtest/gtest.h>

#include <set>

#include "kpsign/layout.hpp"

using namespace kpsign;

TEST(Layout, StandardCounts) {
  EXPECT_EQ(total_keypoints(build_layout(468)), 543u);
  EXPECT_EQ(total_keypoints(build_layout(128)), 203u);
  EXPECT_EQ(total_keypoints(build_layout(0, std::vector<int>{})), 75u);
}

TEST(Layout, PoseOnly) {
  KeypointLayout pose({{"pose", 33}}, {});
  EXPECT_EQ(total_keypoints(pose), 33u);
}

TEST(Layout, GroupOffsets) {
  const auto l = build_layout(128);
  EXPECT_EQ(l.group_offset("pose"), 0u);
  EXPECT_EQ(l.group_offset("left_hand"), 33u);
  EXPECT_EQ(l.group_offset("right_hand"), 54u);
  EXPECT_EQ(l.group_offset("face"), 75u);
  EXPECT_FALSE(l.group_offset("tail").has_value());
}

TEST(Layout, UnsupportedFaceCountNeedsSubset) {
  EXPECT_THROW(build_layout(100), InvalidArgument);
  EXPECT_THROW(build_layout(0), InvalidArgument);
  EXPECT_THROW(build_layout(3, std::vector<int>{1, 2}), InvalidArgument);
  EXPECT_EQ(build_layout(3, std::vector<int>{61, 291, 0}).total(), 78u);
}

TEST(Layout, FaceSubsetValidation) {
  EXPECT_THROW(build_layout(2, std::vector<int>{5, 5}), InvalidArgument);
  EXPECT_THROW(build_layout(1, std::vector<int>{468}), InvalidArgument);
  EXPECT_THROW(build_layout(1, std::vector<int>{-1}), InvalidArgument);
}

TEST(Layout, DefaultReducedSubsetIsDistinctAndInRange) {
  const auto l = build_layout(128);
  ASSERT_TRUE(l.face_subset().has_value());
  const auto& s = *l.face_subset();
  EXPECT_EQ(s.size(), 128u);
  EXPECT_EQ(std::set<int>(s.begin(), s.end()).size(), 128u);
  for (int i : s) {
    EXPECT_GE(i, 0);
    EXPECT_LT(i, 468);
  }
}

TEST(Layout, FlipPermutationIsInvolutionForStandardLayouts) {
  for (std::size_t face : {0u, 128u, 468u}) {
    const auto l = face == 0 ? build_layout(0, std::vector<int>{}) : build_layout(face);
    const auto perm = l.flip_permutation();
    ASSERT_EQ(perm.size(), l.total());
    std::vector<bool> hit(perm.size(), false);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      EXPECT_EQ(perm[perm[i]], i) << "face=" << face << " i=" << i;
      hit[perm[i]] = true;
    }
    for (bool h : hit) EXPECT_TRUE(h);
  }
}

TEST(Layout, HandsSwapIndexForIndex) {
  const auto perm = build_layout(468).flip_permutation();
  for (std::size_t i = 0; i < 21; ++i) {
    EXPECT_EQ(perm[33 + i], 54 + i);
    EXPECT_EQ(perm[54 + i], 33 + i);
  }
}

TEST(Layout, PoseMirrorsShouldersAndKeepsNose) {
  const auto perm = build_layout(128).flip_permutation();
  EXPECT_EQ(perm[0], 0u);
  EXPECT_EQ(perm[11], 12u);
  EXPECT_EQ(perm[15], 16u);
}

TEST(Layout, FullFaceMirrorCoversEveryLandmark) {
  // 220 mirrored pairs plus 28 midline landmarks.
  std::set<int> seen;
  for (const auto& [a, b] : face_mesh::kMirrorPairs) {
    EXPECT_TRUE(seen.insert(a).second);
    EXPECT_TRUE(seen.insert(b).second);
  }
  EXPECT_EQ(seen.size(), 440u);
  EXPECT_EQ(face_mesh::mirror_of(61), 291);
  EXPECT_EQ(face_mesh::mirror_of(33), 263);
  EXPECT_EQ(face_mesh::mirror_of(1), 1);
}

TEST(Layout, ReducedSubsetMirrorStaysInsideSubset) {
  // Every subset landmark's mirror image is also retained, so no face point
  // keeps its index under flipping except midline ones.
  const std::set<int> subset(face_mesh::kReducedSubset.begin(), face_mesh::kReducedSubset.end());
  for (int i : subset) EXPECT_TRUE(subset.contains(face_mesh::mirror_of(i))) << i;
}

TEST(Layout, RejectsOverlappingFlipPairs) {
  EXPECT_THROW(KeypointLayout({{"a", 3}}, {{0, 1}, {1, 2}}), InvalidArgument);
  EXPECT_THROW(KeypointLayout({{"a", 3}}, {{0, 3}}), InvalidArgument);
  EXPECT_THROW(KeypointLayout({{"a", 0}}, {}), InvalidArgument);
}
