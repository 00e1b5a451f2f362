#pragma once

#include <span>

namespace ivvi {

/// Sample mean with its standard error.
struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
};

McEstimate mean_stderr(std::span<const double> samples);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace ivvi
