// ============================================================================
// chc/rate_fit.hpp - least-squares slope of log(error) against log(h or k)
// ============================================================================
#pragma once

#include <span>

namespace chc {

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double residual = 0.0;  // root-mean-square residual in log space
};

/// Requires at least two points with positive x and y; otherwise slope and r2
/// are NaN.
LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y);

}  // namespace chc
