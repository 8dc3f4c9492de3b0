// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exception hierarchy shared by every module. The CLI maps ValidationFailure
// subclasses to exit code 1 and everything else to exit code 2.

#pragma once

#include <stdexcept>
#include <string>

namespace gnosis {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input supplied by the caller (exit code 1 at the CLI).
class ValidationFailure : public Error {
 public:
  using Error::Error;
};

class ValidationError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

class ShapeError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

class DomainError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

class ConfigError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

// Input is well-formed but carries no usable signal (zero-mass map,
// single-class dataset, ...).
class DegenerateError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

class UndefinedMetricError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

// Runtime failures (exit code 2 at the CLI).
class IoError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Raised by read_trace / checkpoint readers. `check` names the first failed
// check: "magic", "version", "header_crc", "size", "checksum", "dimension",
// "label", "finiteness", "meta".
class FormatError : public ValidationFailure {
 public:
  FormatError(std::string check, const std::string& what)
      : ValidationFailure(check + ": " + what), check_(std::move(check)) {}
  const std::string& check() const noexcept { return check_; }

 private:
  std::string check_;
};

}  // namespace gnosis
