#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace seqtoa {

enum class ErrorKind {
  kInvalidInput,
  kUnderdetermined,
  kRankDeficient,
  kConditioning,
  kDegenerateGeometry,
  kSingularGeometry,
  kUnobservable,
  kDivision,
};

const char* to_string(ErrorKind kind);

// Numerical or structural failure raised by the estimation and analysis code.
// `detail` carries the numerical rank for kRankDeficient and the offending
// agent index for kDivision / kSingularGeometry.
class EstimationError : public std::runtime_error {
 public:
  EstimationError(ErrorKind kind, const std::string& what,
                  std::optional<int> detail = std::nullopt)
      : std::runtime_error(what), kind_(kind), detail_(detail) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<int> detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::optional<int> detail_;
};

}  // namespace seqtoa
