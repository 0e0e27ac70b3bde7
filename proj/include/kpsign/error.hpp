// Exception hierarchy shared by every kpsign module.
#pragma once

#include <stdexcept>
#include <string>

namespace kpsign {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed an argument that violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// On-disk data (KPSQ, manifest, vocabulary, checkpoint, config) failed to parse.
class FormatError : public Error {
 public:
  enum class Code { kBadMagic, kVersionMismatch, kTruncated, kInvalid };

  FormatError(Code code, const std::string& what) : Error(what), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

/// Training produced a non-finite loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace kpsign
