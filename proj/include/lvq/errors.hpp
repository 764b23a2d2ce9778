#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lvq {

/// Base class for every error thrown by this library.
class error : public std::runtime_error {
public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/layer shape mismatches and invalid extents.
class shape_error : public error {
public:
  explicit shape_error(const std::string& msg) : error("shape error: " + msg) {}
};

/// Bad configuration values (unsupported kappa, fold count, empty dataset, ...).
class config_error : public error {
public:
  explicit config_error(const std::string& msg) : error("config error: " + msg) {}
};

/// Bad runtime values (label out of range, empty series, length mismatch).
class value_error : public error {
public:
  explicit value_error(const std::string& msg) : error("value error: " + msg) {}
};

/// Out-of-range index into a sequence or dataset.
class index_error : public error {
public:
  explicit index_error(const std::string& msg) : error("index error: " + msg) {}
};

/// Internal state no longer consistent (cache/params mismatch, corrupt argmax).
class state_error : public error {
public:
  explicit state_error(const std::string& msg) : error("state error: " + msg) {}
};

/// File format violations; carries the byte offset where parsing failed.
class format_error : public error {
public:
  format_error(const std::string& msg, std::size_t byte_offset)
      : error("format error at byte " + std::to_string(byte_offset) + ": " + msg),
        offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// Numeric failures: NaN losses, undefined correlations, threshold breaches.
class numeric_error : public error {
public:
  explicit numeric_error(const std::string& msg) : error("numeric error: " + msg) {}
};

}  // namespace lvq
