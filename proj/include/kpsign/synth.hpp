// Deterministic synthetic keypoint-sign datasets and a nearest-template oracle.
//
// Each class owns a template: a rest pose plus, per keypoint group, a linear
// drift and a sinusoid whose frequency steps by half a cycle per window between
// neighbouring classes. A sample is its class template under a per-signer
// offset and scale plus per-coordinate Gaussian noise.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "kpsign/dataset.hpp"
#include "kpsign/error.hpp"
#include "kpsign/kpsq.hpp"
#include "kpsign/layout.hpp"
#include "kpsign/rng.hpp"
#include "kpsign/window.hpp"

namespace kpsign::synth {

/// Distinct sinusoid frequencies: class c oscillates at 0.5 * (1 + c % 7)
/// cycles per window, which stays below the Nyquist limit of a 16-frame window.
inline constexpr std::size_t kFrequencyLevels = 7;
inline constexpr double kCycleStep = 0.5;

struct SynthConfig {
  std::size_t n_classes = 20;
  std::size_t samples_per_class = 50;
  std::size_t n_signers = 5;
  std::size_t face_count = 0;
  std::size_t window_len = kDefaultWindowLength;
  double noise_sigma = 1.0;          // pixels
  double signer_offset_sigma = 4.0;  // pixels
  double signer_scale_sigma = 0.02;  // relative
  std::uint16_t width = 444;
  std::uint16_t height = 444;
  float fps = 25.0f;
  std::uint64_t seed = 1;
  SplitRatios ratios{0.6, 0.2, 0.2};

  void validate() const {
    if (n_classes == 0 || samples_per_class == 0 || n_signers == 0 || window_len == 0) {
      throw InvalidArgument("synthetic dataset counts must be at least 1");
    }
    if (n_classes < 2) throw InvalidArgument("need at least 2 classes");
    if (!(noise_sigma >= 0.0) || !(signer_offset_sigma >= 0.0) || !(signer_scale_sigma >= 0.0)) {
      throw InvalidArgument("noise parameters must be non-negative");
    }
    if (width == 0 || height == 0) throw InvalidArgument("frame dimensions must be positive");
  }
};

struct SignerFile {
  std::string relative_path;
  KpsqHeader header;
  std::vector<Frame> frames;
};

struct SynthDataset {
  KeypointLayout layout;
  Vocabulary vocab;
  std::vector<ManifestEntry> entries;
  std::vector<Window> windows;                 // aligned with entries
  std::vector<std::vector<Point>> templates;   // per class, window_len * K, frame-major
  std::vector<SignerFile> files;
};

namespace detail {

struct GroupMotion {
  double amplitude = 0.0;
  double phase = 0.0;
  double direction = 0.0;
  double drift_x = 0.0;
  double drift_y = 0.0;
};

// Rest-pose region (centre and spread as fractions of the frame) and the
// motion amplitude in pixels for each group.
struct GroupStyle {
  double cx, cy, spread, amplitude;
};

// Rounds through f32. The volatile stops GCC 11's SLP vectorizer from
// dropping the narrowing when x and y are converted as a pair at -O3.
inline double round_to_f32(double v) {
  volatile float f = static_cast<float>(v);
  return f;
}

inline GroupStyle style_for(const std::string& group) {
  if (group == "left_hand") return {0.62, 0.62, 0.04, 22.0};
  if (group == "right_hand") return {0.38, 0.62, 0.04, 22.0};
  if (group == "face") return {0.50, 0.24, 0.07, 2.5};
  return {0.50, 0.55, 0.20, 8.0};
}

}  // namespace detail

/// Standard layout with 0, 128 or 468 face keypoints.
inline KeypointLayout layout_for_face_count(std::size_t face_count) {
  if (face_count == 0) return build_layout(0, std::vector<int>{});
  return build_layout(face_count);
}

/// Class templates for the given layout: templates[c][t * K + k].
inline std::vector<std::vector<Point>> make_templates(const SynthConfig& cfg,
                                                      const KeypointLayout& layout) {
  const std::size_t k = layout.total();
  const double w = cfg.width, h = cfg.height;
  const RandomStream root(cfg.seed, 0x5E);

  std::vector<Point> rest(k);
  std::vector<std::size_t> group_of(k);
  std::vector<double> jitter(k);
  {
    RandomStream rng = root.split(0);
    std::size_t j = 0;
    for (std::size_t g = 0; g < layout.groups().size(); ++g) {
      const auto style = detail::style_for(layout.groups()[g].name);
      for (std::size_t i = 0; i < layout.groups()[g].count; ++i, ++j) {
        rest[j] = {w * (style.cx + rng.uniform(-style.spread, style.spread)),
                   h * (style.cy + rng.uniform(-style.spread, style.spread))};
        group_of[j] = g;
        jitter[j] = rng.uniform(-0.3, 0.3);
      }
    }
  }

  std::vector<std::vector<Point>> templates(cfg.n_classes);
  const double len = static_cast<double>(cfg.window_len);
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    RandomStream rng = root.split(1 + c);
    std::vector<detail::GroupMotion> motion(layout.groups().size());
    for (std::size_t g = 0; g < motion.size(); ++g) {
      const auto style = detail::style_for(layout.groups()[g].name);
      motion[g].amplitude = style.amplitude * rng.uniform(0.6, 1.0);
      motion[g].phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      motion[g].direction = rng.uniform(0.0, 2.0 * std::numbers::pi);
      motion[g].drift_x = rng.uniform(-style.amplitude, style.amplitude);
      motion[g].drift_y = rng.uniform(-style.amplitude, style.amplitude);
    }
    const double cycles = kCycleStep * static_cast<double>(1 + c % kFrequencyLevels);
    auto& tpl = templates[c];
    tpl.resize(cfg.window_len * k);
    for (std::size_t t = 0; t < cfg.window_len; ++t) {
      const double progress = len > 1 ? static_cast<double>(t) / (len - 1.0) - 0.5 : 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const auto& m = motion[group_of[j]];
        const double wave =
            m.amplitude * std::sin(2.0 * std::numbers::pi * cycles * static_cast<double>(t) / len +
                                   m.phase + jitter[j]);
        tpl[t * k + j] = {rest[j].x + m.drift_x * progress + wave * std::cos(m.direction),
                          rest[j].y + m.drift_y * progress + wave * std::sin(m.direction)};
      }
    }
  }
  return templates;
}

/// Builds the full dataset in memory. Signers are assigned round-robin over
/// the global sample index; each signer's samples are concatenated into one
/// KPSQ file and the manifest records their start frames.
inline SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthDataset ds{layout_for_face_count(cfg.face_count), {}, {}, {}, {}, {}};
  const std::size_t k = ds.layout.total();
  if (k > std::numeric_limits<std::uint16_t>::max()) throw InvalidArgument("too many keypoints");
  ds.templates = make_templates(cfg, ds.layout);
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    char word[32];
    std::snprintf(word, sizeof word, "sign%03zu", c);
    ds.vocab.add(word);
  }

  const RandomStream root(cfg.seed, 0x5A);
  struct SignerLook {
    double dx, dy, scale;
  };
  std::vector<SignerLook> looks(cfg.n_signers);
  for (std::size_t s = 0; s < cfg.n_signers; ++s) {
    RandomStream rng = root.split(s);
    std::normal_distribution<double> n01(0.0, 1.0);
    looks[s] = {cfg.signer_offset_sigma * n01(rng), cfg.signer_offset_sigma * n01(rng),
                1.0 + cfg.signer_scale_sigma * n01(rng)};
  }

  ds.files.resize(cfg.n_signers);
  for (std::size_t s = 0; s < cfg.n_signers; ++s) {
    char name[64];
    std::snprintf(name, sizeof name, "seq/signer_%03zu.kpsq", s);
    ds.files[s].relative_path = name;
  }

  const double cx = cfg.width / 2.0, cy = cfg.height / 2.0;
  const std::size_t total = cfg.n_classes * cfg.samples_per_class;
  for (std::size_t n = 0; n < total; ++n) {
    const std::size_t c = n / cfg.samples_per_class;
    const std::size_t s = n % cfg.n_signers;
    const SignerLook& look = looks[s];
    RandomStream rng = root.split(0x100000000ull + n);
    std::normal_distribution<double> noise(0.0, 1.0);
    SignerFile& file = ds.files[s];
    const std::size_t start = file.frames.size();
    Window w;
    w.label_id = c;
    w.signer_id = static_cast<std::int64_t>(s);
    for (std::size_t t = 0; t < cfg.window_len; ++t) {
      Frame f;
      f.width = cfg.width;
      f.height = cfg.height;
      f.frame_index = static_cast<std::int64_t>(start + t);
      f.coords.resize(k);
      for (std::size_t j = 0; j < k; ++j) {
        const Point& p = ds.templates[c][t * k + j];
        const double x = cx + (p.x - cx) * look.scale + look.dx + cfg.noise_sigma * noise(rng);
        const double y = cy + (p.y - cy) * look.scale + look.dy + cfg.noise_sigma * noise(rng);
        // Stored as f32 so in-memory windows equal what a KPSQ reader returns.
        f.coords[j] = {detail::round_to_f32(x), detail::round_to_f32(y)};
      }
      file.frames.push_back(f);
      w.frames.push_back(std::move(f));
    }
    ds.entries.push_back({file.relative_path, static_cast<std::int64_t>(start),
                          ds.vocab.word(c), static_cast<std::int64_t>(s), Split::kTrain});
    ds.windows.push_back(std::move(w));
  }

  for (std::size_t s = 0; s < cfg.n_signers; ++s) {
    SignerFile& file = ds.files[s];
    file.header.keypoints = static_cast<std::uint16_t>(k);
    file.header.frame_count = static_cast<std::uint32_t>(file.frames.size());
    file.header.fps = cfg.fps;
    file.header.width = cfg.width;
    file.header.height = cfg.height;
    file.header.signer_id = static_cast<std::uint32_t>(s);
  }

  if (cfg.n_signers >= 3) {
    SplitResult split = split_by_signer(ds.entries, cfg.ratios, cfg.seed);
    std::map<std::int64_t, Split> owner;
    for (Split sp : kAllSplits) {
      for (const auto& e : split[sp]) owner[e.signer_id] = sp;
    }
    for (auto& e : ds.entries) e.split = owner.at(e.signer_id);
  }
  return ds;
}

/// Writes seq/*.kpsq, manifest.tsv, and vocab.txt under dir.
inline void write_dataset(const SynthDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "seq");
  for (const auto& f : ds.files) {
    if (f.frames.empty()) continue;
    write_kpsq_file(dir / f.relative_path, f.header, f.frames);
  }
  write_manifest_file(dir / "manifest.tsv", ds.entries);
  std::ofstream vocab(dir / "vocab.txt", std::ios::trunc);
  ds.vocab.save(vocab);
}

/// Accuracy of assigning each window to the template with the smallest mean
/// squared distance, after subtracting each side's mean position.
inline double oracle_classify(const std::vector<Window>& windows,
                              const std::vector<std::vector<Point>>& templates) {
  if (windows.empty()) throw InvalidArgument("no windows to classify");
  auto centered = [](std::vector<Point> pts) {
    double sx = 0.0, sy = 0.0;
    for (const Point& p : pts) {
      sx += p.x;
      sy += p.y;
    }
    const double n = static_cast<double>(pts.size());
    for (Point& p : pts) {
      p.x -= sx / n;
      p.y -= sy / n;
    }
    return pts;
  };
  std::vector<std::vector<Point>> centered_templates;
  for (const auto& t : templates) centered_templates.push_back(centered(t));

  std::size_t correct = 0;
  for (const Window& w : windows) {
    std::vector<Point> pts;
    for (const Frame& f : w.frames) pts.insert(pts.end(), f.coords.begin(), f.coords.end());
    pts = centered(std::move(pts));
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centered_templates.size(); ++c) {
      const auto& tpl = centered_templates[c];
      if (tpl.size() != pts.size()) throw InvalidArgument("template/window size mismatch");
      double d = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double ex = pts[i].x - tpl[i].x, ey = pts[i].y - tpl[i].y;
        d += ex * ex + ey * ey;
      }
      d /= static_cast<double>(pts.size());
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == w.label_id) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(windows.size());
}

}  // namespace kpsign::synth
