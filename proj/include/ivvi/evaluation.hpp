#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "ivvi/cmdp_env.hpp"
#include "ivvi/feature_maps.hpp"
#include "ivvi/planner.hpp"
#include "ivvi/stats.hpp"
#include "ivvi/types.hpp"

namespace ivvi {

/// Per-state values of the reference policy and the evaluated policy, and
/// their paired difference (both rollouts share noise paths).
struct SuboptimalityReport {
  std::vector<Vector> init_states;
  std::vector<McEstimate> v_star;
  std::vector<McEstimate> v_hat;
  std::vector<McEstimate> gap;
  double sup_gap = 0.0;
  double sup_gap_se = 0.0;  // standard error of the maximizing state's gap
  std::size_t argmax_state = 0;
  int n_rollouts = 0;
};

/// The sup runs over `init_states` only, so it under-estimates the sup over
/// the whole state space.
SuboptimalityReport estimate_suboptimality(const CmdpIvModel& model, const Policy& policy_hat,
                                           const Policy& policy_star,
                                           const std::vector<Vector>& init_states,
                                           int n_rollouts, Rng& rng);

/// Columns x_1.., v_star, v_star_se, v_hat, v_hat_se, gap, gap_se.
void write_suboptimality_csv(std::ostream& out, const SuboptimalityReport& report);

/// Least squares of x' on phi(x, a), through a factorization of the design.
/// Throws IdentificationError when sum phi phi^T is singular.
Matrix ols_baseline(const Dataset& data, const FeatureMap& map);

/// 2 H^2 min{||W_hat - W*||_2 / sigma, 1} with the spectral norm.
double model_error_bound(const Matrix& w_hat, const Matrix& w_star, double sigma, int horizon);

struct GaussianShiftCheck {
  double lhs = 0.0;  // E_N1[g] - E_N2[g]
  double lhs_se = 0.0;
  double rhs = 0.0;  // min{||mu1 - mu2|| / sigma, 1} sqrt(E_N1[g^2])
  double rhs_se = 0.0;
  bool holds = false;  // lhs <= rhs + 3 sqrt(lhs_se^2 + rhs_se^2)
};

/// Monte Carlo check of E_N1[g] - E_N2[g] <= min{||mu1 - mu2|| / sigma, 1}
/// sqrt(E_N1[g^2]) for N_k = N(mu_k, sigma^2 I) and g >= 0. Both means use
/// the same standard-normal draws. Throws InvalidArgument if g returns a
/// negative value.
GaussianShiftCheck check_gaussian_shift_bound(const Vector& mu1, const Vector& mu2, double sigma,
                                              const std::function<double(const Vector&)>& g,
                                              int n_mc, Rng& rng);

/// Rollout estimates of the three sums in
///   V^{pi*}_1 - V^{pi_hat}_1
///     = sum_h E_{pi*}[xi_h] + sum_h E_{pi*}[iota_h] - sum_h E_{pi_hat}[iota_h],
/// with Q_h from the W_hat plan, V_h(x) = max_a Q_h(x, a), pi_hat greedy in Q,
/// iota_h = r_h + V_{h+1}(x_{h+1}) - Q_h(x_h, a_h) and
/// xi_h = Q_h(x_h, a*_h) - V_h(x_h). pi* is greedy in the W* plan.
struct DecompositionReport {
  Vector x1;
  McEstimate xi_star;
  McEstimate iota_star;
  McEstimate iota_hat;
  McEstimate reconstruction;  // xi_star + iota_star - iota_hat
  McEstimate direct;          // paired rollouts from an independent batch
  double v_hat_1 = 0.0;       // V_1(x1) of the W_hat plan
  double combined_se = 0.0;
  bool identity_holds = false;  // |reconstruction - direct| <= 3 combined_se
  bool xi_nonpositive = false;  // xi_star.mean <= 3 xi_star.se
};

DecompositionReport lemma_d1_decomposition(const CmdpIvModel& model, const Plan& plan_hat,
                                           const Plan& plan_star, const Vector& x1,
                                           int n_rollouts, Rng& rng);

}  // namespace ivvi
