#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spancl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (JSON syntax, truncated checkpoint, ...).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

/// Well-formed input that violates a data contract.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range ids or positions handed to a numeric routine.
class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Zero-norm vector handed to a cosine similarity.
class DegenerateRepresentation : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, std::vector<std::string> missing_ids)
      : Error(what), missing_ids_(std::move(missing_ids)) {}
  const std::vector<std::string>& missing_ids() const { return missing_ids_; }

 private:
  std::vector<std::string> missing_ids_;
};

// Seeds. Every random stream in the library is derived from one user seed
// through a named sub-seed, so components stay independent of each other's
// consumption order.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view s);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

namespace utf8 {

std::u32string decode(std::string_view s);
std::string encode(char32_t cp);
std::string encode(std::u32string_view s);
/// Number of code points in a UTF-8 string.
std::size_t length(std::string_view s);
/// Substring by code-point offsets; clamps at the end of the string.
std::string substr(std::string_view s, std::size_t cp_start, std::size_t cp_len);

}  // namespace utf8

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace spancl
