#include "ivvi/sgda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "ivvi/csv.hpp"
#include "ivvi/errors.hpp"

namespace ivvi {

std::string_view to_string(ScheduleMode mode) {
  return mode == ScheduleMode::kTheoremConstants ? "theorem-constants" : "manual";
}

ScheduleMode parse_schedule_mode(std::string_view name) {
  if (name == "theorem-constants") return ScheduleMode::kTheoremConstants;
  if (name == "manual") return ScheduleMode::kManual;
  throw InvalidArgument("unknown schedule mode '" + std::string(name) +
                        "' (expected theorem-constants or manual)");
}

double theorem_gamma(double alpha, double beta, double mu_iv, double mu_b) {
  const double l = std::sqrt(mu_b);
  const double terms[] = {
      beta / (mu_b * mu_iv),
      alpha * alpha * l * beta / (mu_b * mu_iv),
      beta * l / (mu_b * mu_b * mu_iv),
      alpha * beta / mu_b,
      beta / (alpha * mu_b * mu_b),
      beta / (alpha * l * mu_b),
  };
  return 256.0 * *std::max_element(std::begin(terms), std::end(terms));
}

StepsizeSchedule make_schedule(double mu_iv, double mu_b, ScheduleMode mode,
                               const ScheduleOverrides& overrides) {
  StepsizeSchedule s;
  s.mode = mode;
  if (mode == ScheduleMode::kTheoremConstants) {
    if (!(mu_iv > 0.0 && mu_iv <= 1.0) || !(mu_b > 0.0 && mu_b <= 1.0)) {
      std::ostringstream os;
      os << "theorem-constants schedule needs mu_IV, mu_B in (0, 1]; got mu_IV=" << mu_iv
         << ", mu_B=" << mu_b;
      throw InvalidArgument(os.str());
    }
    s.mu_iv = mu_iv;
    s.mu_b = mu_b;
    s.lambda = std::sqrt(mu_b);
    s.alpha = overrides.alpha.value_or(256.0 * overrides.alpha_scale * std::pow(mu_b, -1.5) / mu_iv);
    s.beta = overrides.beta.value_or(8.0 * overrides.beta_scale / mu_iv);
    if (!(s.alpha > 0.0) || !(s.beta > 0.0)) throw InvalidArgument("alpha and beta must be > 0");
    s.gamma_requested = overrides.gamma.value_or(
        overrides.gamma_scale * theorem_gamma(s.alpha, s.beta, mu_iv, mu_b));
  } else {
    if (!overrides.alpha || !overrides.beta || !overrides.gamma)
      throw InvalidArgument("manual schedule needs alpha, beta and gamma");
    s.alpha = *overrides.alpha;
    s.beta = *overrides.beta;
    s.gamma_requested = *overrides.gamma;
    if (!(s.alpha > 0.0) || !(s.beta > 0.0)) throw InvalidArgument("alpha and beta must be > 0");
    if (!(s.gamma_requested >= 0.0)) throw InvalidArgument("gamma must be >= 0");
    if (mu_iv > 0.0) s.mu_iv = mu_iv;
    if (mu_b > 0.0) {
      s.mu_b = mu_b;
      s.lambda = std::sqrt(mu_b);
    }
  }
  s.gamma = std::max({s.gamma_requested, s.beta, s.alpha * s.beta});
  return s;
}

double nu_bound(const StepsizeSchedule& s, double potential0, int d_x, double sigma) {
  const double denom = 0.25 * s.mu_iv * s.beta - 1.0;
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  const double noise = 4.0 * s.lambda * s.alpha * s.alpha * s.beta * s.beta * d_x * sigma * sigma;
  return std::max(s.gamma * potential0, noise / denom);
}

SgdaState make_sgda_state(const StepsizeSchedule& schedule, const Matrix& W0, const Matrix& K0) {
  if (W0.rows() != K0.rows()) throw InvalidArgument("W0 and K0 must have the same row count");
  if (!W0.allFinite() || !K0.allFinite()) throw InvalidArgument("initial iterates must be finite");
  return SgdaState{W0, K0, 0, schedule};
}

void sgda_step(SgdaState& state, const Vector& phi, const Vector& psi, const Vector& x_next) {
  if (phi.size() != state.W.cols() || psi.size() != state.K.cols() ||
      x_next.size() != state.W.rows())
    throw InvalidArgument("feature or state size does not match the iterates");
  const double et = state.schedule.eta_theta(state.t);
  const double eo = state.schedule.eta_omega(state.t);
  for (Eigen::Index i = 0; i < state.W.rows(); ++i)
    coordinate_step(state.W.row(i), state.K.row(i), phi, psi, x_next(i), et, eo);
  ++state.t;
  if (!state.W.allFinite() || !state.K.allFinite()) {
    const double norm = std::max(state.W.norm(), state.K.norm());
    std::ostringstream os;
    os << "SGDA iterate became non-finite at step " << state.t
       << "; reduce the stepsizes (raise gamma or lower beta)";
    throw DivergenceError(state.t, norm, os.str());
  }
}

void sgda_step(SgdaState& state, const Transition& tr, const FeatureMap& map) {
  sgda_step(state, map.eval_phi(tr.x, tr.a), map.eval_psi(tr.x, tr.z), tr.x_next);
}

std::vector<long long> geometric_checkpoints(double start, long long T) {
  std::vector<long long> out;
  if (T < 1) return out;
  long long t = std::max<long long>(1, static_cast<long long>(std::ceil(start)));
  while (t < T) {
    out.push_back(t);
    t *= 2;
  }
  out.push_back(T);
  return out;
}

namespace {

Checkpoint make_checkpoint(const SgdaState& s, const std::optional<Truth>& truth) {
  Checkpoint c;
  c.t = s.t;
  c.W = s.W;
  c.eta_theta = s.schedule.eta_theta(s.t);
  c.eta_omega = s.schedule.eta_omega(s.t);
  if (truth) {
    c.err_w = (s.W - truth->w_star).squaredNorm();
    c.err_k = (s.K - optimal_dual(truth->moments, s.W)).squaredNorm();
    const double lambda = std::sqrt(dual_conditioning(truth->moments));
    c.potential = c.err_w + lambda * c.err_k;
  } else {
    c.err_w = c.err_k = c.potential = std::numeric_limits<double>::quiet_NaN();
  }
  return c;
}

}  // namespace

Phase1Result run_phase1(TransitionStream& stream, const FeatureMap& map,
                        const StepsizeSchedule& schedule, long long T, const Matrix& W0,
                        const Matrix& K0, const std::vector<long long>& checkpoints,
                        const std::optional<Truth>& truth) {
  if (T < 0) throw InvalidArgument("T must be >= 0");
  if (W0.cols() != map.d_phi() || K0.cols() != map.d_psi())
    throw InvalidArgument("initial iterates do not match the feature dimensions");
  for (std::size_t i = 1; i < checkpoints.size(); ++i)
    if (checkpoints[i] <= checkpoints[i - 1])
      throw InvalidArgument("checkpoint times must be strictly increasing");

  SgdaState state = make_sgda_state(schedule, W0, K0);
  Phase1Result out;
  out.trace.max_iterate_norm = std::max(W0.norm(), K0.norm());
  auto next_cp = checkpoints.begin();
  while (next_cp != checkpoints.end() && *next_cp < 0) ++next_cp;
  if (next_cp != checkpoints.end() && *next_cp == 0) {
    out.trace.checkpoints.push_back(make_checkpoint(state, truth));
    ++next_cp;
  }
  for (long long t = 0; t < T; ++t) {
    sgda_step(state, stream.next(), map);
    out.trace.max_iterate_norm =
        std::max({out.trace.max_iterate_norm, state.W.norm(), state.K.norm()});
    if (next_cp != checkpoints.end() && state.t == *next_cp) {
      out.trace.checkpoints.push_back(make_checkpoint(state, truth));
      ++next_cp;
    }
  }
  out.W = std::move(state.W);
  out.K = std::move(state.K);
  return out;
}

void write_trace_csv(std::ostream& out, const EstimateTrace& trace) {
  csv::write_row(out, std::vector<std::string>{"t", "frob_err_sq_W", "frob_err_sq_K", "potential",
                                               "eta_theta", "eta_omega"});
  for (const Checkpoint& c : trace.checkpoints) {
    csv::write_row(out, std::vector<double>{static_cast<double>(c.t), c.err_w, c.err_k,
                                            c.potential, c.eta_theta, c.eta_omega});
  }
}

}  // namespace ivvi
