#pragma once

#include "ivvi/cmdp_env.hpp"
#include "ivvi/feature_maps.hpp"
#include "ivvi/moments.hpp"

namespace ivvi {

/// A one-dimensional instance whose population moments are closed-form:
///   x ~ U[-1, 1], z ~ U[-1, 1], e ~ N(0, sigma^2),
///   a = c0 + cx x + cz z + ce e + s_a n,  n ~ N(0, 1),
///   phi = (1, x, a) / sqrt(2 + amax^2),  psi = (1, x, z) / sqrt(3),
///   x' = W* phi + e.
/// The closed forms assume the action bound `amax` is never hit; choose it
/// several standard deviations beyond |c0| + |cx| + |cz|.
struct AnalyticInstance {
  double sigma = 0.1;
  double c0 = 0.0;
  double cx = 0.0;
  double cz = 1.0;
  double ce = 0.0;
  double action_noise_std = 0.0;
  double action_bound = 1.0;
  Vector w_star = Vector::Zero(3);  // coefficients on the normalized phi

  FeatureMap feature_map() const;
  /// Horizon-1 model (x_1 ~ xi_0 = U[-1, 1] so the visitation law is exact).
  CmdpIvModel model(RewardFn reward = nullptr, int horizon = 1) const;
  MomentMatrices population_moments() const;
  /// E[e phi^T], the confounding covariance that biases least squares.
  Matrix confounding_covariance() const;
  /// Population least-squares coefficients E[x' phi^T] D^-1.
  Matrix ols_limit() const;
  /// Largest |a| before clamping, in units of the action's Gaussian std.
  double bound_margin_sigmas() const;
};

}  // namespace ivvi
