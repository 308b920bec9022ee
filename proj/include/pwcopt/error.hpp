#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pwcopt {

enum class ErrorKind {
  kZeroGenerator,
  kZeroCoupling,
  kDegenerateMoments,
  kNoRealRoot,
  kInvalidTail,
  kNoConvergence,
  kAllSeedsFailed,
  kDomainError,
  kInsufficientData,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kZeroGenerator: return "ZeroGenerator";
    case ErrorKind::kZeroCoupling: return "ZeroCoupling";
    case ErrorKind::kDegenerateMoments: return "DegenerateMoments";
    case ErrorKind::kNoRealRoot: return "NoRealRoot";
    case ErrorKind::kInvalidTail: return "InvalidTail";
    case ErrorKind::kNoConvergence: return "NoConvergence";
    case ErrorKind::kAllSeedsFailed: return "AllSeedsFailed";
    case ErrorKind::kDomainError: return "DomainError";
    case ErrorKind::kInsufficientData: return "InsufficientData";
  }
  return "Unknown";
}

/// Every failure raised by the library. `interval()` is set when the error
/// comes from a specific sampling interval of an extremal trajectory and
/// `seed()` when it was raised inside a multistart run.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what,
        std::optional<int> interval = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        interval_(interval) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<int> interval() const noexcept { return interval_; }
  std::optional<int> seed() const noexcept { return seed_; }

  Error with_seed(int seed) const {
    Error copy = *this;
    copy.seed_ = seed;
    return copy;
  }

 private:
  ErrorKind kind_;
  std::optional<int> interval_;
  std::optional<int> seed_;
};

}  // namespace pwcopt
