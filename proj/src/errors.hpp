// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dpl {

// Error taxonomy shared by the library and the C API. The kind determines
// the C status code and the CLI exit code.
enum class ErrorKind {
  InvalidArgument,  // bad config, bad dimensions, bad indices
  Format,           // malformed file content (CSV, DPLF, checkpoint JSON)
  Io,               // filesystem failures
  Numeric,          // non-finite values, failed numeric checks
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& msg)
      : Error(ErrorKind::InvalidArgument, msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg)
      : Error(ErrorKind::InvalidArgument, msg) {}
};

struct IndexError : Error {
  explicit IndexError(const std::string& msg)
      : Error(ErrorKind::InvalidArgument, msg) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& msg)
      : Error(ErrorKind::Format, msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(ErrorKind::Io, msg) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& msg)
      : Error(ErrorKind::Numeric, msg) {}
};

}  // namespace dpl
