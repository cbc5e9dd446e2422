#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lupiet {

// Base of every error raised by the library. Callers that only care about
// "did it work" catch this; the subclasses exist so tests and the CLI can
// tell the failure classes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

// KL(p || q) with q_i == 0 where p_i > 0.
class DivergenceUndefinedError : public Error {
 public:
  using Error::Error;
};

class GradientCheckError : public Error {
 public:
  using Error::Error;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

class SubsampleError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training.
class TrainingDivergenceError : public Error {
 public:
  using Error::Error;
};

// Config problems reported with the offending field path, e.g. "distill.tau[1]".
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace lupiet
