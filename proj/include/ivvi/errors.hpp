#pragma once

#include <stdexcept>
#include <string>

namespace ivvi {

/// Base class for every error raised by the library. The category string is
/// what the CLI reports next to its nonzero exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

/// Malformed configuration or an argument outside an operation's domain.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("invalid-argument", what) {}
};

/// Data problems: empty datasets, exhausted streams, non-finite samples.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error("data", what) {}
};

/// Nondegeneracy of the feature moments fails (singular B, rank-deficient A,
/// singular normal matrix or design).
class IdentificationError : public Error {
 public:
  explicit IdentificationError(const std::string& what) : Error("identification", what) {}
};

/// A stochastic iterate became non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(long long step, double norm, const std::string& what)
      : Error("divergence", what), step_(step), norm_(norm) {}

  long long step() const noexcept { return step_; }
  double norm() const noexcept { return norm_; }

 private:
  long long step_;
  double norm_;
};

}  // namespace ivvi
