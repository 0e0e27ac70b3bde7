// INI-style configuration: [model], [train], [augment] and [synth] sections.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kpsign/augment.hpp"
#include "kpsign/error.hpp"
#include "kpsign/model.hpp"
#include "kpsign/synth.hpp"
#include "kpsign/train.hpp"

namespace kpsign::config {

using boost::property_tree::ptree;

inline ptree parse(std::istream& in) {
  ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw FormatError(FormatError::Code::kInvalid, std::string("config: ") + e.what());
  }
  return tree;
}

inline ptree parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

inline ptree load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Code::kInvalid, "cannot open config " + path.string());
  return parse(in);
}

namespace detail {

template <typename V>
void read(const ptree& section, const std::string& key, V& out) {
  auto node = section.get_child_optional(key);
  if (!node) return;
  try {
    out = node->get_value<V>();
  } catch (const boost::property_tree::ptree_bad_data&) {
    throw FormatError(FormatError::Code::kInvalid,
                      "config key '" + key + "' has bad value '" + node->data() + "'");
  }
}

inline void reject_unknown(const ptree& section, const std::string& name,
                           const std::set<std::string>& known) {
  for (const auto& [key, value] : section) {
    if (!known.contains(key)) {
      throw FormatError(FormatError::Code::kInvalid,
                        "unknown key '" + key + "' in [" + name + "]");
    }
  }
}

inline const ptree* section(const ptree& tree, const std::string& name) {
  auto child = tree.get_child_optional(name);
  return child ? &*child : nullptr;
}

inline std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return out.str();
}

}  // namespace detail

inline ModelConfig model_config(const ptree& tree, ModelConfig c = {}) {
  const ptree* s = detail::section(tree, "model");
  if (!s) return c;
  detail::reject_unknown(*s, "model",
                         {"d_model", "n_layers", "n_heads", "ffn_dim", "vocab_size",
                          "attention_mode", "window_len", "keypoints", "dropout_rate",
                          "init_seed"});
  detail::read(*s, "d_model", c.d_model);
  detail::read(*s, "n_layers", c.n_layers);
  detail::read(*s, "n_heads", c.n_heads);
  detail::read(*s, "ffn_dim", c.ffn_dim);
  detail::read(*s, "vocab_size", c.vocab_size);
  std::string mode(to_string(c.attention_mode));
  detail::read(*s, "attention_mode", mode);
  try {
    c.attention_mode = parse_attention_mode(mode);
  } catch (const InvalidArgument& e) {
    throw FormatError(FormatError::Code::kInvalid, e.what());
  }
  detail::read(*s, "window_len", c.window_len);
  detail::read(*s, "keypoints", c.keypoints);
  detail::read(*s, "dropout_rate", c.dropout_rate);
  detail::read(*s, "init_seed", c.init_seed);
  return c;
}

inline std::string model_section(const ModelConfig& c) {
  std::ostringstream o;
  o << "[model]\n"
    << "d_model = " << c.d_model << "\n"
    << "n_layers = " << c.n_layers << "\n"
    << "n_heads = " << c.n_heads << "\n"
    << "ffn_dim = " << c.ffn_dim << "\n"
    << "vocab_size = " << c.vocab_size << "\n"
    << "attention_mode = " << to_string(c.attention_mode) << "\n"
    << "window_len = " << c.window_len << "\n"
    << "keypoints = " << c.keypoints << "\n"
    << "dropout_rate = " << detail::fmt(c.dropout_rate) << "\n"
    << "init_seed = " << c.init_seed << "\n";
  return o.str();
}

inline augment::Enabled parse_enabled(const std::string& list) {
  augment::Enabled e{false, false, false, false};
  std::istringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty() || item == "none") continue;
    if (item == "shift") e.shift = true;
    else if (item == "scale") e.scale = true;
    else if (item == "rotate") e.rotate = true;
    else if (item == "flip") e.flip = true;
    else throw FormatError(FormatError::Code::kInvalid, "unknown augmentation '" + item + "'");
  }
  return e;
}

inline std::string enabled_list(const augment::Enabled& e) {
  std::vector<std::string> parts;
  if (e.flip) parts.push_back("flip");
  if (e.rotate) parts.push_back("rotate");
  if (e.scale) parts.push_back("scale");
  if (e.shift) parts.push_back("shift");
  if (parts.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

inline augment::AugmentConfig augment_config(const ptree& tree, augment::AugmentConfig c = {}) {
  const ptree* s = detail::section(tree, "augment");
  if (!s) return c;
  detail::reject_unknown(*s, "augment",
                         {"shift_range", "scale_min", "scale_max", "rotation_range", "flip_prob",
                          "enabled", "seed"});
  detail::read(*s, "shift_range", c.shift_range);
  detail::read(*s, "scale_min", c.scale_min);
  detail::read(*s, "scale_max", c.scale_max);
  detail::read(*s, "rotation_range", c.rotation_range);
  detail::read(*s, "flip_prob", c.flip_prob);
  if (auto list = s->get_optional<std::string>("enabled")) c.enabled = parse_enabled(*list);
  detail::read(*s, "seed", c.seed);
  return c;
}

inline std::string augment_section(const augment::AugmentConfig& c) {
  std::ostringstream o;
  o << "[augment]\n"
    << "shift_range = " << detail::fmt(c.shift_range) << "\n"
    << "scale_min = " << detail::fmt(c.scale_min) << "\n"
    << "scale_max = " << detail::fmt(c.scale_max) << "\n"
    << "rotation_range = " << detail::fmt(c.rotation_range) << "\n"
    << "flip_prob = " << detail::fmt(c.flip_prob) << "\n"
    << "enabled = " << enabled_list(c.enabled) << "\n"
    << "seed = " << c.seed << "\n";
  return o.str();
}

inline TrainConfig train_config(const ptree& tree, TrainConfig c = {}) {
  c.augmentation = augment_config(tree, c.augmentation);
  const ptree* s = detail::section(tree, "train");
  if (!s) return c;
  detail::reject_unknown(*s, "train",
                         {"learning_rate", "batch_size", "patience", "beta1", "beta2", "epsilon",
                          "max_epochs", "seed", "clip_norm", "threads"});
  detail::read(*s, "learning_rate", c.adam.learning_rate);
  detail::read(*s, "batch_size", c.batch_size);
  detail::read(*s, "patience", c.patience);
  detail::read(*s, "beta1", c.adam.beta1);
  detail::read(*s, "beta2", c.adam.beta2);
  detail::read(*s, "epsilon", c.adam.epsilon);
  detail::read(*s, "max_epochs", c.max_epochs);
  detail::read(*s, "seed", c.seed);
  detail::read(*s, "clip_norm", c.clip_norm);
  detail::read(*s, "threads", c.threads);
  return c;
}

inline std::string train_section(const TrainConfig& c) {
  std::ostringstream o;
  o << "[train]\n"
    << "learning_rate = " << detail::fmt(c.adam.learning_rate) << "\n"
    << "batch_size = " << c.batch_size << "\n"
    << "patience = " << c.patience << "\n"
    << "beta1 = " << detail::fmt(c.adam.beta1) << "\n"
    << "beta2 = " << detail::fmt(c.adam.beta2) << "\n"
    << "epsilon = " << detail::fmt(c.adam.epsilon) << "\n"
    << "max_epochs = " << c.max_epochs << "\n"
    << "seed = " << c.seed << "\n"
    << "clip_norm = " << detail::fmt(c.clip_norm) << "\n"
    << "threads = " << c.threads << "\n";
  return o.str() + augment_section(c.augmentation);
}

inline synth::SynthConfig synth_config(const ptree& tree, synth::SynthConfig c = {}) {
  const ptree* s = detail::section(tree, "synth");
  if (!s) return c;
  detail::reject_unknown(*s, "synth",
                         {"n_classes", "samples_per_class", "n_signers", "face_count",
                          "window_len", "noise_sigma", "signer_offset_sigma",
                          "signer_scale_sigma", "width", "height", "fps", "seed", "train_ratio",
                          "val_ratio", "test_ratio"});
  detail::read(*s, "n_classes", c.n_classes);
  detail::read(*s, "samples_per_class", c.samples_per_class);
  detail::read(*s, "n_signers", c.n_signers);
  detail::read(*s, "face_count", c.face_count);
  detail::read(*s, "window_len", c.window_len);
  detail::read(*s, "noise_sigma", c.noise_sigma);
  detail::read(*s, "signer_offset_sigma", c.signer_offset_sigma);
  detail::read(*s, "signer_scale_sigma", c.signer_scale_sigma);
  detail::read(*s, "width", c.width);
  detail::read(*s, "height", c.height);
  detail::read(*s, "fps", c.fps);
  detail::read(*s, "seed", c.seed);
  detail::read(*s, "train_ratio", c.ratios.train);
  detail::read(*s, "val_ratio", c.ratios.val);
  detail::read(*s, "test_ratio", c.ratios.test);
  return c;
}

inline std::string synth_section(const synth::SynthConfig& c) {
  std::ostringstream o;
  o << "[synth]\n"
    << "n_classes = " << c.n_classes << "\n"
    << "samples_per_class = " << c.samples_per_class << "\n"
    << "n_signers = " << c.n_signers << "\n"
    << "face_count = " << c.face_count << "\n"
    << "window_len = " << c.window_len << "\n"
    << "noise_sigma = " << detail::fmt(c.noise_sigma) << "\n"
    << "signer_offset_sigma = " << detail::fmt(c.signer_offset_sigma) << "\n"
    << "signer_scale_sigma = " << detail::fmt(c.signer_scale_sigma) << "\n"
    << "width = " << c.width << "\n"
    << "height = " << c.height << "\n"
    << "fps = " << detail::fmt(c.fps) << "\n"
    << "seed = " << c.seed << "\n"
    << "train_ratio = " << detail::fmt(c.ratios.train) << "\n"
    << "val_ratio = " << detail::fmt(c.ratios.val) << "\n"
    << "test_ratio = " << detail::fmt(c.ratios.test) << "\n";
  return o.str();
}

}  // namespace kpsign::config
