// Top-k accuracy, per-class breakdowns, and the computational report.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kpsign/error.hpp"
#include "kpsign/model.hpp"

namespace kpsign::eval {

/// Parameter count of the RGB comparison model the keypoint model is measured against.
inline constexpr double kRgbReferenceParameters = 34.5e6;

/// 0-based rank of `label` among the logits. Ties rank the lower class index first.
template <typename T>
std::size_t rank_of(std::span<const T> logits, std::size_t label) {
  if (label >= logits.size()) throw InvalidArgument("label out of range");
  const T target = logits[label];
  std::size_t rank = 0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (logits[j] > target || (logits[j] == target && j < label)) ++rank;
  }
  return rank;
}

template <typename T>
std::size_t argmax(std::span<const T> logits) {
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

/// Fraction of samples whose label is among the k largest logits.
template <typename T>
double topk_accuracy(const std::vector<std::vector<T>>& logits,
                     const std::vector<std::size_t>& labels, std::size_t k) {
  if (logits.size() != labels.size()) throw InvalidArgument("logits/labels size mismatch");
  if (logits.empty()) throw InvalidArgument("no samples");
  if (k == 0 || k > logits.front().size()) throw InvalidArgument("k must be in [1, vocab_size]");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (rank_of<T>(logits[i], labels[i]) < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.size());
}

/// The k highest-scoring classes, best first, ties by lower index.
template <typename T>
std::vector<std::size_t> topk_classes(std::span<const T> logits, std::size_t k) {
  std::vector<std::size_t> idx(logits.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

struct ClassStats {
  std::size_t support = 0;
  std::size_t correct = 0;
  std::optional<double> accuracy;  // nullopt when support == 0
  std::optional<std::size_t> most_confused_with;
  std::size_t most_confused_count = 0;
};

struct PerClassReport {
  std::vector<ClassStats> classes;
  std::size_t no_support = 0;
};

template <typename T>
PerClassReport per_class_report(const std::vector<std::vector<T>>& logits,
                                const std::vector<std::size_t>& labels) {
  if (logits.size() != labels.size()) throw InvalidArgument("logits/labels size mismatch");
  PerClassReport r;
  if (logits.empty()) return r;
  const std::size_t c = logits.front().size();
  r.classes.resize(c);
  std::vector<std::map<std::size_t, std::size_t>> confusions(c);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const std::size_t pred = argmax<T>(logits[i]);
    ClassStats& s = r.classes.at(labels[i]);
    ++s.support;
    if (pred == labels[i]) {
      ++s.correct;
    } else {
      ++confusions[labels[i]][pred];
    }
  }
  for (std::size_t j = 0; j < c; ++j) {
    ClassStats& s = r.classes[j];
    if (s.support == 0) {
      ++r.no_support;
      continue;
    }
    s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.support);
    for (const auto& [pred, n] : confusions[j]) {
      if (n > s.most_confused_count) {
        s.most_confused_count = n;
        s.most_confused_with = pred;
      }
    }
  }
  return r;
}

struct ComputationalReport {
  std::uint64_t parameters = 0;
  double reference_parameters = kRgbReferenceParameters;
  double ratio = 0.0;
  std::uint64_t forward_macs = 0;

  bool operator==(const ComputationalReport&) const = default;
};

inline ComputationalReport computational_report(const ModelConfig& config) {
  ComputationalReport r;
  r.parameters = count_parameters(config);
  r.ratio = static_cast<double>(r.parameters) / r.reference_parameters;
  r.forward_macs = kpsign::forward_macs(config);
  return r;
}

inline nlohmann::json to_json(const ComputationalReport& r) {
  return {{"parameters", r.parameters},
          {"reference_parameters", r.reference_parameters},
          {"ratio", r.ratio},
          {"forward_macs", r.forward_macs}};
}

inline ComputationalReport report_from_json(const nlohmann::json& j) {
  ComputationalReport r;
  r.parameters = j.at("parameters").get<std::uint64_t>();
  r.reference_parameters = j.at("reference_parameters").get<double>();
  r.ratio = j.at("ratio").get<double>();
  r.forward_macs = j.at("forward_macs").get<std::uint64_t>();
  return r;
}

inline std::string to_csv(const ComputationalReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "parameters,reference_parameters,ratio,forward_macs\n"
      << r.parameters << ',' << r.reference_parameters << ',' << r.ratio << ','
      << r.forward_macs << '\n';
  return out.str();
}

}  // namespace kpsign::eval
