#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "kpsign/synth.hpp"

using namespace kpsign;
using namespace kpsign::synth;

namespace {

SynthConfig small(double noise) {
  SynthConfig c;
  c.n_classes = 6;
  c.samples_per_class = 10;
  c.noise_sigma = noise;
  return c;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("kpsign_synth_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Synth, DefaultCountsAndLayout) {
  const auto ds = generate(SynthConfig{});
  EXPECT_EQ(ds.entries.size(), 1000u);
  EXPECT_EQ(ds.windows.size(), 1000u);
  EXPECT_EQ(ds.vocab.size(), 20u);
  EXPECT_EQ(ds.layout.total(), 75u);
  EXPECT_EQ(ds.files.size(), 5u);
  std::set<std::int64_t> signers;
  for (const auto& e : ds.entries) signers.insert(e.signer_id);
  EXPECT_EQ(signers.size(), 5u);
  EXPECT_EQ(layout_for_face_count(128).total(), 203u);
  EXPECT_EQ(layout_for_face_count(468).total(), 543u);
}

TEST(Synth, SameSeedWritesIdenticalFiles) {
  const auto a = scratch("a"), b = scratch("b");
  write_dataset(generate(small(1.0)), a);
  write_dataset(generate(small(1.0)), b);
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), a);
    EXPECT_EQ(read_file_bytes(entry.path()), read_file_bytes(b / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 5u + 2u);
  auto other = small(1.0);
  other.seed = 2;
  EXPECT_NE(generate(other).windows.front(), generate(small(1.0)).windows.front());
}

TEST(Synth, WrittenFilesMatchInMemoryWindows) {
  const auto dir = scratch("roundtrip");
  const auto ds = generate(small(1.0));
  write_dataset(ds, dir);
  const auto vocab = Vocabulary::load_file(dir / "vocab.txt");
  const auto entries = read_manifest_file(dir / "manifest.tsv");
  EXPECT_EQ(entries, ds.entries);
  std::size_t replaced = 99;
  const auto windows = load_windows(dir, entries, vocab, 16, &replaced);
  EXPECT_EQ(replaced, 0u);
  EXPECT_EQ(windows, ds.windows);
}

TEST(Synth, NoiselessSingleSignerSamplesAreIdentical) {
  auto c = small(0.0);
  c.n_signers = 1;
  const auto ds = generate(c);
  for (std::size_t i = 0; i < ds.windows.size(); ++i) {
    const auto& first = ds.windows[i - i % c.samples_per_class];
    for (std::size_t t = 0; t < first.frames.size(); ++t) {
      EXPECT_EQ(ds.windows[i].frames[t].coords, first.frames[t].coords);
    }
  }
  EXPECT_EQ(oracle_classify(ds.windows, ds.templates), 1.0);
}

TEST(Synth, OracleIsPerfectWithoutNoiseAndSeparableAtOnePixel) {
  EXPECT_EQ([] {
    const auto ds = generate(small(0.0));
    return oracle_classify(ds.windows, ds.templates);
  }(), 1.0);
  const auto ds = generate(SynthConfig{});
  EXPECT_GE(oracle_classify(ds.windows, ds.templates), 0.99);
}

TEST(Synth, OracleDegradesWithNoise) {
  double prev = 1.0;
  for (double sigma : {0.0, 10.0, 40.0, 160.0}) {
    const auto ds = generate(small(sigma));
    const double acc = oracle_classify(ds.windows, ds.templates);
    EXPECT_LE(acc, prev + 0.05) << sigma;
    prev = acc;
  }
  EXPECT_LT(prev, 0.9);
}

TEST(Synth, OracleIgnoresGlobalTranslation) {
  const auto ds = generate(small(20.0));
  auto moved = ds.windows;
  for (auto& w : moved) {
    for (auto& f : w.frames) {
      for (auto& p : f.coords) {
        p.x += 37.0f;
        p.y -= 11.0f;
      }
    }
  }
  EXPECT_EQ(oracle_classify(moved, ds.templates), oracle_classify(ds.windows, ds.templates));
}

TEST(Synth, SplitsAreSignerDisjointWithEveryClass) {
  const auto ds = generate(SynthConfig{});
  std::map<Split, std::set<std::int64_t>> signers;
  std::map<Split, std::set<std::string>> words;
  for (const auto& e : ds.entries) {
    signers[e.split].insert(e.signer_id);
    words[e.split].insert(e.label_word);
  }
  for (Split s : kAllSplits) EXPECT_EQ(words[s].size(), 20u) << to_string(s);
  for (Split a : kAllSplits) {
    for (Split b : kAllSplits) {
      if (a == b) continue;
      for (auto id : signers[a]) EXPECT_FALSE(signers[b].contains(id));
    }
  }
}

TEST(Synth, ValidatesConfig) {
  auto c = small(1.0);
  c.noise_sigma = -1;
  EXPECT_THROW(generate(c), InvalidArgument);
  c = small(1.0);
  c.n_classes = 1;
  EXPECT_THROW(generate(c), InvalidArgument);
}
