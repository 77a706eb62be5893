#pragma once

#include <stdexcept>
#include <string>

namespace senserate {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data, arguments or configuration. Maps to CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Undefined or ill-posed metric (length mismatch, constant input, ...).
class MetricError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Network failures after retries, or a batch aborted by failures. Exit code 2.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Non-retryable HTTP response (4xx other than 429).
class PermanentHttpError : public TransportError {
 public:
  PermanentHttpError(int status, std::string body_excerpt)
      : TransportError("HTTP " + std::to_string(status) + ": " + body_excerpt),
        status_(status),
        body_excerpt_(std::move(body_excerpt)) {}

  int status() const noexcept { return status_; }
  const std::string& body_excerpt() const noexcept { return body_excerpt_; }

 private:
  int status_;
  std::string body_excerpt_;
};

class RatingParseError : public Error {
 public:
  RatingParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// STRICT parse found an integer, but outside 1..5.
class RatingRangeError : public RatingParseError {
 public:
  using RatingParseError::RatingParseError;
};

}  // namespace senserate
