// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace surgvl {

/// Base of every error raised by the library. Each subclass corresponds to
/// one failure category so callers (and the CLI exit-code mapping) can
/// dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  DegenerateInputError(const std::string& what, long row)
      : Error(what), row_(row) {}
  long row() const noexcept { return row_; }

 private:
  long row_;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& what, int round)
      : Error(what), round_(round) {}
  int round() const noexcept { return round_; }

 private:
  int round_;
};

class NoSupervisionError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  CheckpointError(const std::string& what, std::string field)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Raised when backend output cannot be turned into Q/A rounds. Keeps the
/// raw text so it can be audited.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

/// Retryable backend failure (timeouts, rate limits, 5xx).
class TransientBackendError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Credentials missing or rejected. Never retried.
class AuthError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class JudgeProtocolError : public Error {
 public:
  using Error::Error;
};

class InvalidComparisonError : public Error {
 public:
  using Error::Error;
};

}  // namespace surgvl
