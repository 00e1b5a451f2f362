#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace ivvi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Every stochastic routine takes one of these by reference; seeding it is the
/// caller's job.
using Rng = std::mt19937_64;

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  bool contains(double v) const { return v >= lo && v <= hi; }
  double max_abs() const;
};

/// Axis-aligned box, one interval per coordinate.
using Box = std::vector<Interval>;

Vector clamp_to_box(const Box& box, const Vector& v);

/// Derive an independent generator from a base seed and a stream id. Used so
/// that replications, rollouts and MC draws never share a stream.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace ivvi
