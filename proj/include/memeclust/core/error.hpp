#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace memeclust {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed persisted artifact. Carries the 1-based line number when known.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input violates a domain invariant (duplicate id, self-edge, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but numerically degenerate (zero vector, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// An image could not be decoded.
class ExtractionError : public Error {
 public:
  ExtractionError(const std::string& image_id, const std::string& why)
      : Error("cannot extract features from '" + image_id + "': " + why), image_id_(image_id) {}
  const std::string& image_id() const noexcept { return image_id_; }

 private:
  std::string image_id_;
};

/// No evaluation result exists for the given input.
class UndefinedResultError : public Error {
 public:
  using Error::Error;
};

/// Coverage target cannot be met by any threshold.
class UnreachableTargetError : public Error {
 public:
  UnreachableTargetError(std::size_t target, std::size_t max_coverage)
      : Error("coverage target " + std::to_string(target) + " unreachable; max achievable coverage is " +
              std::to_string(max_coverage)),
        target_(target),
        max_coverage_(max_coverage) {}
  std::size_t target() const noexcept { return target_; }
  std::size_t max_coverage() const noexcept { return max_coverage_; }

 private:
  std::size_t target_;
  std::size_t max_coverage_;
};

/// A pipeline stage was run before the stage producing its input.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(const std::string& path, const std::string& producer)
      : Error("missing artifact '" + path + "'; run `" + producer + "` first"), producer_(producer) {}
  const std::string& producer() const noexcept { return producer_; }

 private:
  std::string producer_;
};

}  // namespace memeclust
