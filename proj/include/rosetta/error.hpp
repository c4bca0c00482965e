// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rosetta {

/// Base of every error raised by the library. `exit_code()` is what the CLI
/// returns when the error escapes a command: 1 for validation, 2 for I/O.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& what, std::string path)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }
  int exit_code() const noexcept override { return 2; }

 private:
  std::string path_;
};

class DistinctSymbolOverflow : public ValidationError {
 public:
  DistinctSymbolOverflow(std::size_t distinct, std::size_t limit)
      : ValidationError("context has " + std::to_string(distinct) +
                        " distinct symbols, vocabulary holds " + std::to_string(limit)),
        distinct_(distinct),
        limit_(limit) {}
  std::size_t distinct() const noexcept { return distinct_; }
  std::size_t limit() const noexcept { return limit_; }

 private:
  std::size_t distinct_;
  std::size_t limit_;
};

class MissingGlyph : public ValidationError {
 public:
  MissingGlyph(char32_t symbol, std::size_t font_id)
      : ValidationError("font " + std::to_string(font_id) + " has no glyph for U+" + hex(symbol)),
        symbol_(symbol),
        font_id_(font_id) {}
  char32_t symbol() const noexcept { return symbol_; }
  std::size_t font_id() const noexcept { return font_id_; }

 private:
  static std::string hex(char32_t c) {
    static constexpr char digits[] = "0123456789ABCDEF";
    std::string s;
    for (int shift = 20; shift >= 0; shift -= 4) {
      unsigned d = (static_cast<unsigned>(c) >> shift) & 0xF;
      if (!s.empty() || d != 0 || shift < 16) s.push_back(digits[d]);
    }
    return s;
  }
  char32_t symbol_;
  std::size_t font_id_;
};

class SequenceOverflow : public ValidationError {
 public:
  SequenceOverflow(std::size_t length, std::size_t limit)
      : ValidationError("assembled sequence length " + std::to_string(length) +
                        " exceeds max_seq_len " + std::to_string(limit)) {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::string sample_id)
      : Error("non-finite loss on sample " + sample_id), sample_id_(std::move(sample_id)) {}
  const std::string& sample_id() const noexcept { return sample_id_; }

 private:
  std::string sample_id_;
};

class ConfigMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyGroundTruth : public ValidationError {
 public:
  EmptyGroundTruth() : ValidationError("ground truth is empty") {}
};

}  // namespace rosetta
