#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace memloop {

/// Base of every error raised by the library. Callers that only care about
/// "something in the pipeline failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& detail)
      : Error(source + ":" + std::to_string(line) + ": " + detail), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input is well-formed but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration or command-line usage (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The live backend could not be reached after all retries.
class BackendUnavailableError : public Error {
 public:
  using Error::Error;
};

/// The backend answered, but not in the shape the protocol requires.
class BackendProtocolError : public Error {
 public:
  using Error::Error;
};

/// Fixture mode was asked for a response that was never recorded.
class FixtureMissError : public Error {
 public:
  FixtureMissError(const std::string& kind, std::string digest)
      : Error("fixture miss (" + kind + "): no recorded entry for digest " + digest),
        digest_(std::move(digest)) {}

  const std::string& digest() const noexcept { return digest_; }

 private:
  std::string digest_;
};

/// A model response to an extraction prompt had no usable list items.
class ExtractionFormatError : public Error {
 public:
  ExtractionFormatError(const std::string& detail, std::string raw)
      : Error("extraction format error: " + detail), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// A question or judge response could not be interpreted.
class VerificationFormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace memloop
