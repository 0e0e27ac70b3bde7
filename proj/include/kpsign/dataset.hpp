// Vocabulary, manifest TSV, and signer-disjoint splitting.
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kpsign/error.hpp"
#include "kpsign/kpsq.hpp"
#include "kpsign/rng.hpp"
#include "kpsign/window.hpp"

namespace kpsign {

class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> words) {
    for (auto& w : words) add(std::move(w));
  }

  /// One word per line; the 0-based line number is the class index.
  static Vocabulary load(std::istream& in) {
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) {
        throw FormatError(FormatError::Code::kInvalid,
                          "empty vocabulary line " + std::to_string(v.size() + 1));
      }
      v.add(line);
    }
    return v;
  }

  static Vocabulary load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(FormatError::Code::kInvalid, "cannot open " + path.string());
    return load(in);
  }

  void save(std::ostream& out) const {
    for (const auto& w : words_) out << w << '\n';
  }

  std::size_t add(std::string word) {
    if (index_.contains(word)) {
      throw FormatError(FormatError::Code::kInvalid, "duplicate vocabulary word '" + word + "'");
    }
    const std::size_t id = words_.size();
    index_.emplace(word, id);
    words_.push_back(std::move(word));
    return id;
  }

  std::optional<std::size_t> find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t lookup(std::string_view word) const {
    if (auto id = find(word)) return *id;
    throw FormatError(FormatError::Code::kInvalid,
                      "word '" + std::string(word) + "' not in vocabulary");
  }

  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Split { kTrain, kVal, kTest };

inline constexpr std::array<Split, 3> kAllSplits{Split::kTrain, Split::kVal, Split::kTest};

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw FormatError(FormatError::Code::kInvalid, "unknown split '" + std::string(s) + "'");
}

struct ManifestEntry {
  std::string file_path;
  std::int64_t start_frame = 0;
  std::string label_word;
  std::int64_t signer_id = 0;
  Split split = Split::kTrain;

  bool operator==(const ManifestEntry&) const = default;
};

namespace detail {

inline std::int64_t parse_int(std::string_view s, std::string_view what) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw FormatError(FormatError::Code::kInvalid,
                      "bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

/// Tab-separated, one entry per line:
/// file_path, start_frame, label_word, signer_id, split.
inline std::vector<ManifestEntry> read_manifest(std::istream& in) {
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 5) {
      throw FormatError(FormatError::Code::kInvalid,
                        "manifest line " + std::to_string(lineno) + ": expected 5 fields");
    }
    ManifestEntry e;
    e.file_path = std::string(fields[0]);
    e.start_frame = detail::parse_int(fields[1], "start_frame");
    if (e.start_frame < 0) {
      throw FormatError(FormatError::Code::kInvalid,
                        "manifest line " + std::to_string(lineno) + ": negative start_frame");
    }
    e.label_word = std::string(fields[2]);
    e.signer_id = detail::parse_int(fields[3], "signer_id");
    e.split = parse_split(fields[4]);
    entries.push_back(std::move(e));
  }
  return entries;
}

inline void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  for (const auto& e : entries) {
    out << e.file_path << '\t' << e.start_frame << '\t' << e.label_word << '\t' << e.signer_id
        << '\t' << to_string(e.split) << '\n';
  }
}

inline std::vector<ManifestEntry> read_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Code::kInvalid, "cannot open " + path.string());
  return read_manifest(in);
}

inline void write_manifest_file(const std::filesystem::path& path,
                                const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatError::Code::kInvalid, "cannot write " + path.string());
  write_manifest(out, entries);
}

/// Every label in the manifest must be a vocabulary word.
inline void check_labels(const std::vector<ManifestEntry>& entries, const Vocabulary& vocab) {
  for (const auto& e : entries) vocab.lookup(e.label_word);
}

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct SplitResult {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> val;
  std::vector<ManifestEntry> test;

  std::vector<ManifestEntry>& operator[](Split s) {
    return s == Split::kTrain ? train : s == Split::kVal ? val : test;
  }
  const std::vector<ManifestEntry>& operator[](Split s) const {
    return s == Split::kTrain ? train : s == Split::kVal ? val : test;
  }
};

/// Partitions entries so that no signer appears in two splits.
///
/// Signers are shuffled by seed. The first three seed one split each; every
/// later signer goes to the split furthest below its target entry count.
/// Returned entries carry the split they were assigned to.
inline SplitResult split_by_signer(const std::vector<ManifestEntry>& entries,
                                   const SplitRatios& ratios, std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double x : r) {
    if (!(x > 0.0)) throw InvalidArgument("split ratios must be positive");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
    throw InvalidArgument("split ratios must sum to 1");
  }
  std::map<std::int64_t, std::size_t> per_signer;
  for (const auto& e : entries) ++per_signer[e.signer_id];
  if (per_signer.size() < 3) {
    throw InvalidArgument("signer-disjoint split needs at least 3 signers, got " +
                          std::to_string(per_signer.size()));
  }
  std::vector<std::int64_t> signers;
  for (const auto& [s, n] : per_signer) signers.push_back(s);
  RandomStream rng(seed);
  // Fisher-Yates with our own stream so the permutation is stdlib-independent.
  for (std::size_t i = signers.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(signers[i], signers[j]);
  }

  const auto total = static_cast<double>(entries.size());
  std::array<double, 3> assigned{0.0, 0.0, 0.0};
  std::map<std::int64_t, Split> owner;
  for (std::size_t i = 0; i < signers.size(); ++i) {
    std::size_t target = i;
    if (i >= 3) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < 3; ++s) {
        const double deficit = r[s] * total - assigned[s];
        if (deficit > best) {
          best = deficit;
          target = s;
        }
      }
    }
    owner[signers[i]] = kAllSplits[target];
    assigned[target] += static_cast<double>(per_signer[signers[i]]);
  }

  SplitResult out;
  for (auto e : entries) {
    e.split = owner.at(e.signer_id);
    out[e.split].push_back(std::move(e));
  }
  return out;
}

/// Resolves manifest entries into windows. Relative file paths are taken
/// relative to `root`; each KPSQ file is read once.
inline std::vector<Window> load_windows(const std::filesystem::path& root,
                                        const std::vector<ManifestEntry>& entries,
                                        const Vocabulary& vocab, std::size_t window_len,
                                        std::size_t* nan_replaced = nullptr) {
  std::map<std::string, KpsqData> files;
  std::vector<Window> out;
  out.reserve(entries.size());
  std::size_t nans = 0;
  for (const auto& e : entries) {
    auto it = files.find(e.file_path);
    if (it == files.end()) {
      std::filesystem::path p(e.file_path);
      if (p.is_relative()) p = root / p;
      it = files.emplace(e.file_path, read_kpsq_file(p)).first;
      nans += it->second.nan_replaced;
    }
    Window w;
    try {
      w = sample_window(it->second, static_cast<std::size_t>(e.start_frame), window_len,
                        vocab.lookup(e.label_word));
    } catch (const InvalidArgument& ex) {
      throw FormatError(FormatError::Code::kInvalid, e.file_path + ": " + ex.what());
    }
    w.signer_id = e.signer_id;
    out.push_back(std::move(w));
  }
  if (nan_replaced) *nan_replaced = nans;
  return out;
}

}  // namespace kpsign
