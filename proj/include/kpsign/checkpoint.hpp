// Checkpoint files: a text header holding the model config and a tensor
// shape table, followed by little-endian f32 tensor data in table order.
//
//   KPSIGN-CHECKPOINT 1
//   [model]
//   d_model = 64
//   ...
//   [tensors]
//   count = <n>
//   <name> <rank> <dim0> ... <dimN>
//   ...
//   [data]
//   <binary payload>
#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "kpsign/config_file.hpp"
#include "kpsign/error.hpp"
#include "kpsign/kpsq.hpp"
#include "kpsign/model.hpp"

namespace kpsign {

inline constexpr std::string_view kCheckpointMagic = "KPSIGN-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParameters<float> parameters;
};

inline std::vector<std::uint8_t> write_checkpoint(const ModelConfig& config,
                                                  const ModelParameters<float>& params) {
  std::ostringstream head;
  head << kCheckpointMagic << ' ' << kCheckpointVersion << '\n'
       << config::model_section(config) << "[tensors]\n";
  std::size_t count = 0;
  std::ostringstream table;
  params.for_each([&](const std::string& name, const Tensor<float>& t) {
    ++count;
    table << name << ' ' << t.rank();
    for (std::size_t d : t.shape()) table << ' ' << d;
    table << '\n';
  });
  head << "count = " << count << '\n' << table.str() << "[data]\n";
  const std::string text = head.str();
  std::vector<std::uint8_t> out(text.begin(), text.end());
  params.for_each([&](const std::string&, const Tensor<float>& t) {
    for (float v : t.values()) detail::put_le(out, v);
  });
  return out;
}

inline Checkpoint read_checkpoint(std::span<const std::uint8_t> bytes) {
  auto bad = [](const std::string& why) {
    return FormatError(FormatError::Code::kInvalid, "checkpoint: " + why);
  };
  const std::string_view all(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!all.starts_with(kCheckpointMagic)) {
    throw FormatError(FormatError::Code::kBadMagic, "not a checkpoint file");
  }
  const std::string_view marker = "\n[data]\n";
  const auto data_pos = all.find(marker);
  if (data_pos == std::string_view::npos) {
    throw FormatError(FormatError::Code::kTruncated, "checkpoint header is truncated");
  }
  std::istringstream head{std::string(all.substr(0, data_pos + 1))};
  std::string magic;
  int version = 0;
  head >> magic >> version;
  if (version != kCheckpointVersion) {
    throw FormatError(FormatError::Code::kVersionMismatch,
                      "unsupported checkpoint version " + std::to_string(version));
  }
  std::string line, ini;
  std::getline(head, line);
  while (std::getline(head, line) && line != "[tensors]") ini += line + '\n';
  if (line != "[tensors]") throw bad("missing [tensors] table");
  Checkpoint ck;
  ck.config = config::model_config(config::parse_string(ini));
  try {
    ck.config.validate();
    ck.parameters = ModelParameters<float>::zeros(ck.config);
  } catch (const InvalidArgument& e) {
    throw bad(e.what());
  }

  std::getline(head, line);
  std::size_t count = 0;
  if (std::sscanf(line.c_str(), "count = %zu", &count) != 1) throw bad("missing tensor count");
  const auto tensors = ck.parameters.tensors();
  std::vector<std::string> names;
  ck.parameters.for_each([&](const std::string& n, const Tensor<float>&) { names.push_back(n); });
  if (count != tensors.size()) throw bad("tensor count does not match config");
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(head, line)) throw bad("tensor table is truncated");
    std::istringstream row(line);
    std::string name;
    std::size_t rank = 0;
    row >> name >> rank;
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) row >> d;
    if (!row || name != names[i] || shape != tensors[i]->shape()) {
      throw bad("tensor '" + name + "' does not match the model layout");
    }
  }

  std::size_t off = data_pos + marker.size();
  std::size_t needed = 0;
  for (auto* t : tensors) needed += t->size() * sizeof(float);
  if (bytes.size() - off < needed) {
    throw FormatError(FormatError::Code::kTruncated, "checkpoint tensor data is truncated");
  }
  if (bytes.size() - off > needed) throw bad("trailing bytes after tensor data");
  for (auto* t : tensors) {
    for (float& v : t->values()) {
      v = detail::get_le<float>(bytes, off);
      off += sizeof(float);
    }
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                            const ModelParameters<float>& params) {
  write_file_bytes(path, write_checkpoint(config, params));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return read_checkpoint(read_file_bytes(path));
}

}  // namespace kpsign
