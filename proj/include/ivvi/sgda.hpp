#pragma once

#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "ivvi/cmdp_env.hpp"
#include "ivvi/feature_maps.hpp"
#include "ivvi/moments.hpp"
#include "ivvi/types.hpp"

namespace ivvi {

enum class ScheduleMode { kTheoremConstants, kManual };

std::string_view to_string(ScheduleMode mode);
ScheduleMode parse_schedule_mode(std::string_view name);

/// eta_theta(t) = beta / (gamma + t), eta_omega(t) = alpha * eta_theta(t).
struct StepsizeSchedule {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  ScheduleMode mode = ScheduleMode::kManual;
  // The conditioning values the schedule was built from (0 in manual mode
  // when none were supplied).
  double mu_iv = 0.0;
  double mu_b = 0.0;
  double lambda = 0.0;         // sqrt(mu_b), the dual weight in the potential
  double gamma_requested = 0.0;  // gamma before the max{beta, alpha beta} floor

  double eta_theta(long long t) const { return beta / (gamma + static_cast<double>(t)); }
  double eta_omega(long long t) const { return alpha * eta_theta(t); }
};

/// Theorem-constants mode multiplies the default prefactors by these scales
/// (alpha = 2^8 a mu_B^-1.5 mu_IV^-1, beta = 8 b / mu_IV, gamma = c times the
/// six-term max). Manual mode requires alpha, beta and gamma.
struct ScheduleOverrides {
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> gamma;
  double alpha_scale = 1.0;
  double beta_scale = 1.0;
  double gamma_scale = 1.0;
};

/// The six-term expression for gamma, before any scale or floor:
///   2^8 max{ b/(mB mIV), a^2 l b/(mB mIV), b l/(mB^2 mIV),
///            a b/mB, b/(a mB^2), b/(a l mB) }.
double theorem_gamma(double alpha, double beta, double mu_iv, double mu_b);

/// Throws InvalidArgument for mu values outside (0, 1] in theorem mode, for
/// missing manual constants, or for nonpositive alpha/beta. Gamma is always
/// raised to at least max{beta, alpha beta} so that both stepsizes stay <= 1.
StepsizeSchedule make_schedule(double mu_iv, double mu_b, ScheduleMode mode,
                               const ScheduleOverrides& overrides = {});

/// nu = max{gamma P0, 4 lambda alpha^2 beta^2 d_x sigma^2 / (mu_IV beta / 4 - 1)}.
/// Returns +inf when mu_IV beta <= 4 (the recursion then gives no bound).
double nu_bound(const StepsizeSchedule& s, double potential0, int d_x, double sigma);

struct SgdaState {
  Matrix W;
  Matrix K;
  long long t = 0;
  StepsizeSchedule schedule;
};

SgdaState make_sgda_state(const StepsizeSchedule& schedule, const Matrix& W0, const Matrix& K0);

/// Update for one output coordinate i (theta = row i of W, omega = row i of K):
///   theta <- theta - eta_theta (omega . psi) phi
///   omega <- omega + eta_omega (theta_old . phi - x'_i - omega_old . psi) psi
/// Both inner products use the pre-update iterates. The matrix step calls this
/// row by row, so the two forms are bit-identical.
template <class ThetaT, class OmegaT>
void coordinate_step(ThetaT&& theta, OmegaT&& omega, const Vector& phi, const Vector& psi,
                     double x_next_i, double eta_theta, double eta_omega) {
  double k_psi = 0.0;
  for (Eigen::Index j = 0; j < psi.size(); ++j) k_psi += omega(j) * psi(j);
  double w_phi = 0.0;
  for (Eigen::Index j = 0; j < phi.size(); ++j) w_phi += theta(j) * phi(j);
  const double g_theta = eta_theta * k_psi;
  for (Eigen::Index j = 0; j < phi.size(); ++j) theta(j) -= g_theta * phi(j);
  const double g_omega = eta_omega * (w_phi - x_next_i - k_psi);
  for (Eigen::Index j = 0; j < psi.size(); ++j) omega(j) += g_omega * psi(j);
}

/// One SGDA step on precomputed features. Throws DivergenceError when an
/// iterate becomes non-finite.
void sgda_step(SgdaState& state, const Vector& phi, const Vector& psi, const Vector& x_next);
void sgda_step(SgdaState& state, const Transition& tr, const FeatureMap& map);

/// Reference for the estimator: W* and the moments of the sampling law.
struct Truth {
  Matrix w_star;
  MomentMatrices moments;
};

struct Checkpoint {
  long long t = 0;
  Matrix W;
  // NaN when no truth was supplied.
  double err_w = 0.0;
  double err_k = 0.0;
  double potential = 0.0;
  double eta_theta = 0.0;
  double eta_omega = 0.0;
};

struct EstimateTrace {
  std::vector<Checkpoint> checkpoints;
  /// Largest Frobenius norm of W or K seen over the whole run.
  double max_iterate_norm = 0.0;
};

struct Phase1Result {
  Matrix W;
  Matrix K;
  EstimateTrace trace;
};

/// ceil(start) * 2^k for k = 0, 1, ... while below T, then T itself.
std::vector<long long> geometric_checkpoints(double start, long long T);

/// Applies T steps drawn from `stream`. Checkpoints must be strictly
/// increasing; entries above T are ignored and t = 0 is allowed.
Phase1Result run_phase1(TransitionStream& stream, const FeatureMap& map,
                        const StepsizeSchedule& schedule, long long T, const Matrix& W0,
                        const Matrix& K0, const std::vector<long long>& checkpoints,
                        const std::optional<Truth>& truth = std::nullopt);

/// Columns t, frob_err_sq_W, frob_err_sq_K, potential, eta_theta, eta_omega.
void write_trace_csv(std::ostream& out, const EstimateTrace& trace);

}  // namespace ivvi
