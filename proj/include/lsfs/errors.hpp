#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lsfs {

// Bad numeric argument or flag value.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Skip plan does not match the manifest, or a manifest breaks block/group invariants.
class StructureError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Query outside the tabulated domain of a profile (no extrapolation).
class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Malformed input file. line() is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnderdeterminedError : public FitError {
 public:
  using FitError::FitError;
};

enum class Infeasibility { accuracy, latency };

class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(Infeasibility kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Infeasibility kind() const { return kind_; }

 private:
  Infeasibility kind_;
};

}  // namespace lsfs
