#pragma once

#include <stdexcept>
#include <string>

namespace bsmf {

enum class ErrorCode {
    InvalidArgument,
    InvalidSegmentation,
    NoUniqueStationaryVector,
    NoServiceAtFloor,
    NoArrivalAtCeiling,
    RetrySeriesDivergence,
    FactorizationFailure,
    DegenerateBoundary,
    IntegrationAbort,
    NoConvergence,
};

/// Library-wide exception. `detail` carries the offending level, time, or
/// residual where the failure site has one.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what, double detail = 0.0)
        : std::runtime_error(what), code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    double detail() const noexcept { return detail_; }

  private:
    ErrorCode code_;
    double detail_;
};

} // namespace bsmf
