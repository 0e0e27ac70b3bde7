// KPSQ: binary keypoint-sequence files.
//
// Layout (all little-endian):
//   offset  size  field
//   0       4     magic "KPSQ"
//   4       2     version (u16, == 1)
//   6       2     K keypoints per frame (u16)
//   8       4     frame_count (u32)
//   12      4     fps (f32)
//   16      2     width (u16)
//   18      2     height (u16)
//   20      4     signer_id (u32)
//   24      ...   frame_count * K * 2 f32, frame-major, (x, y) interleaved
//
// A missing detection is stored as NaN; readers replace it with 0.0 and count it.
#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "kpsign/error.hpp"
#include "kpsign/window.hpp"

namespace kpsign {

inline constexpr std::array<char, 4> kKpsqMagic{'K', 'P', 'S', 'Q'};
inline constexpr std::uint16_t kKpsqVersion = 1;
inline constexpr std::size_t kKpsqHeaderBytes = 24;

struct KpsqHeader {
  std::uint16_t version = kKpsqVersion;
  std::uint16_t keypoints = 0;
  std::uint32_t frame_count = 0;
  float fps = 25.0f;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint32_t signer_id = 0;

  std::size_t payload_bytes() const noexcept {
    return static_cast<std::size_t>(frame_count) * keypoints * 2 * sizeof(float);
  }

  bool operator==(const KpsqHeader&) const = default;
};

struct KpsqData {
  KpsqHeader header;
  std::vector<Frame> frames;
  std::size_t nan_replaced = 0;
};

namespace detail {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  using Bits = std::conditional_t<sizeof(U) == 2, std::uint16_t, std::uint32_t>;
  const auto bits = std::bit_cast<Bits>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFFu));
  }
}

template <typename U>
U get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  using Bits = std::conditional_t<sizeof(U) == 2, std::uint16_t, std::uint32_t>;
  Bits bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits = static_cast<Bits>(bits | (static_cast<Bits>(in[offset + i]) << (8 * i)));
  }
  return std::bit_cast<U>(bits);
}

}  // namespace detail

/// Serializes frames; coordinates are narrowed to f32.
inline std::vector<std::uint8_t> write_kpsq(const KpsqHeader& header,
                                            std::span<const Frame> frames) {
  if (header.version != kKpsqVersion) {
    throw InvalidArgument("only KPSQ version 1 can be written");
  }
  if (header.keypoints == 0 || header.frame_count == 0) {
    throw InvalidArgument("KPSQ requires K > 0 and frame_count > 0");
  }
  if (frames.size() != header.frame_count) {
    throw InvalidArgument("frame_count does not match the number of frames");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kKpsqHeaderBytes + header.payload_bytes());
  for (char c : kKpsqMagic) out.push_back(static_cast<std::uint8_t>(c));
  detail::put_le(out, header.version);
  detail::put_le(out, header.keypoints);
  detail::put_le(out, header.frame_count);
  detail::put_le(out, header.fps);
  detail::put_le(out, header.width);
  detail::put_le(out, header.height);
  detail::put_le(out, header.signer_id);
  for (const Frame& f : frames) {
    if (f.coords.size() != header.keypoints) {
      throw InvalidArgument("frame keypoint count does not match header K");
    }
    for (const Point& p : f.coords) {
      detail::put_le(out, static_cast<float>(p.x));
      detail::put_le(out, static_cast<float>(p.y));
    }
  }
  return out;
}

inline KpsqHeader read_kpsq_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kKpsqMagic.size() ||
      std::memcmp(bytes.data(), kKpsqMagic.data(), kKpsqMagic.size()) != 0) {
    throw FormatError(FormatError::Code::kBadMagic, "not a KPSQ file (bad magic)");
  }
  if (bytes.size() < kKpsqHeaderBytes) {
    throw FormatError(FormatError::Code::kTruncated, "KPSQ header is truncated");
  }
  KpsqHeader h;
  h.version = detail::get_le<std::uint16_t>(bytes, 4);
  if (h.version != kKpsqVersion) {
    throw FormatError(FormatError::Code::kVersionMismatch,
                      "unsupported KPSQ version " + std::to_string(h.version));
  }
  h.keypoints = detail::get_le<std::uint16_t>(bytes, 6);
  h.frame_count = detail::get_le<std::uint32_t>(bytes, 8);
  h.fps = detail::get_le<float>(bytes, 12);
  h.width = detail::get_le<std::uint16_t>(bytes, 16);
  h.height = detail::get_le<std::uint16_t>(bytes, 18);
  h.signer_id = detail::get_le<std::uint32_t>(bytes, 20);
  if (h.keypoints == 0 || h.frame_count == 0) {
    throw FormatError(FormatError::Code::kInvalid, "KPSQ header has K or frame_count of 0");
  }
  if (h.width == 0 || h.height == 0) {
    throw FormatError(FormatError::Code::kInvalid, "KPSQ header has zero frame dimensions");
  }
  return h;
}

/// Parses a KPSQ byte stream. NaN coordinates become 0.0 and are counted.
inline KpsqData read_kpsq(std::span<const std::uint8_t> bytes) {
  KpsqData data;
  data.header = read_kpsq_header(bytes);
  const KpsqHeader& h = data.header;
  const std::size_t expected = kKpsqHeaderBytes + h.payload_bytes();
  if (bytes.size() < expected) {
    throw FormatError(FormatError::Code::kTruncated,
                      "KPSQ payload is truncated: expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw FormatError(FormatError::Code::kInvalid, "KPSQ file has trailing bytes");
  }
  data.frames.resize(h.frame_count);
  std::size_t off = kKpsqHeaderBytes;
  auto next = [&] {
    float v = detail::get_le<float>(bytes, off);
    off += sizeof(float);
    if (std::isnan(v)) {
      ++data.nan_replaced;
      return 0.0;
    }
    return static_cast<double>(v);
  };
  for (std::uint32_t t = 0; t < h.frame_count; ++t) {
    Frame& f = data.frames[t];
    f.width = h.width;
    f.height = h.height;
    f.frame_index = t;
    f.coords.resize(h.keypoints);
    for (Point& p : f.coords) {
      p.x = next();
      p.y = next();
    }
  }
  return data;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Code::kInvalid, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path,
                             std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Code::kInvalid, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

inline KpsqData read_kpsq_file(const std::filesystem::path& path) {
  return read_kpsq(read_file_bytes(path));
}

inline void write_kpsq_file(const std::filesystem::path& path, const KpsqHeader& header,
                            std::span<const Frame> frames) {
  write_file_bytes(path, write_kpsq(header, frames));
}

/// Extracts window_len consecutive frames starting at start_frame. No padding.
inline Window sample_window(const KpsqData& file, std::size_t start_frame,
                            std::size_t window_len, std::size_t label_id = 0) {
  if (window_len == 0) throw InvalidArgument("window_len must be positive");
  if (start_frame + window_len > file.frames.size()) {
    throw InvalidArgument("window [" + std::to_string(start_frame) + ", " +
                          std::to_string(start_frame + window_len) + ") exceeds " +
                          std::to_string(file.frames.size()) + " frames");
  }
  Window w;
  w.label_id = label_id;
  w.signer_id = file.header.signer_id;
  w.frames.assign(file.frames.begin() + static_cast<std::ptrdiff_t>(start_frame),
                  file.frames.begin() + static_cast<std::ptrdiff_t>(start_frame + window_len));
  return w;
}

}  // namespace kpsign
