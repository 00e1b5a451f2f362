#include "ivvi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "ivvi/csv.hpp"
#include "ivvi/errors.hpp"
#include "ivvi/moments.hpp"

namespace ivvi {

SuboptimalityReport estimate_suboptimality(const CmdpIvModel& model, const Policy& policy_hat,
                                           const Policy& policy_star,
                                           const std::vector<Vector>& init_states,
                                           int n_rollouts, Rng& rng) {
  if (n_rollouts < 1) throw InvalidArgument("n_rollouts must be >= 1");
  if (init_states.empty()) throw InvalidArgument("no initial states to evaluate");
  SuboptimalityReport rep;
  rep.init_states = init_states;
  rep.n_rollouts = n_rollouts;
  std::vector<double> rs(n_rollouts), rh(n_rollouts), diff(n_rollouts);
  for (std::size_t s = 0; s < init_states.size(); ++s) {
    for (int r = 0; r < n_rollouts; ++r) {
      const std::uint64_t path_seed = rng();
      Rng a = make_rng(path_seed);
      Rng b = make_rng(path_seed);
      rs[r] = rollout_evaluation(model, policy_star, init_states[s], a).total_return;
      rh[r] = rollout_evaluation(model, policy_hat, init_states[s], b).total_return;
      diff[r] = rs[r] - rh[r];
    }
    rep.v_star.push_back(mean_stderr(rs));
    rep.v_hat.push_back(mean_stderr(rh));
    rep.gap.push_back(mean_stderr(diff));
    if (s == 0 || rep.gap.back().mean > rep.sup_gap) {
      rep.sup_gap = rep.gap.back().mean;
      rep.sup_gap_se = rep.gap.back().se;
      rep.argmax_state = s;
    }
  }
  return rep;
}

void write_suboptimality_csv(std::ostream& out, const SuboptimalityReport& rep) {
  std::vector<std::string> header;
  const int d = rep.init_states.empty() ? 0 : static_cast<int>(rep.init_states[0].size());
  for (int i = 0; i < d; ++i) header.push_back("x_" + std::to_string(i + 1));
  for (const char* c : {"v_star", "v_star_se", "v_hat", "v_hat_se", "gap", "gap_se"})
    header.emplace_back(c);
  csv::write_row(out, header);
  for (std::size_t s = 0; s < rep.init_states.size(); ++s) {
    std::vector<double> row(rep.init_states[s].data(), rep.init_states[s].data() + d);
    row.insert(row.end(), {rep.v_star[s].mean, rep.v_star[s].se, rep.v_hat[s].mean,
                           rep.v_hat[s].se, rep.gap[s].mean, rep.gap[s].se});
    csv::write_row(out, row);
  }
}

Matrix ols_baseline(const Dataset& data, const FeatureMap& map) {
  if (data.empty()) throw DataError("cannot regress on an empty dataset");
  const int dp = map.d_phi();
  const int dx = static_cast<int>(data.transitions.front().x_next.size());
  Matrix gram = Matrix::Zero(dp, dp);
  Matrix cross = Matrix::Zero(dx, dp);
  for (const Transition& tr : data.transitions) {
    const Vector phi = map.eval_phi(tr.x, tr.a);
    gram.noalias() += phi * phi.transpose();
    cross.noalias() += tr.x_next * phi.transpose();
  }
  gram = 0.5 * (gram + gram.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= kSingularTolerance * hi)
    throw IdentificationError("least-squares design sum phi phi^T is singular");
  return Eigen::LDLT<Matrix>(gram).solve(cross.transpose()).transpose();
}

double model_error_bound(const Matrix& w_hat, const Matrix& w_star, double sigma, int horizon) {
  if (w_hat.rows() != w_star.rows() || w_hat.cols() != w_star.cols())
    throw InvalidArgument("W_hat and W* have different shapes");
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be > 0");
  const Matrix diff = w_hat - w_star;
  const double spectral =
      diff.size() == 0 ? 0.0 : Eigen::JacobiSVD<Matrix>(diff).singularValues()(0);
  const double h = static_cast<double>(horizon);
  return 2.0 * h * h * std::min(spectral / sigma, 1.0);
}

GaussianShiftCheck check_gaussian_shift_bound(const Vector& mu1, const Vector& mu2, double sigma,
                                              const std::function<double(const Vector&)>& g,
                                              int n_mc, Rng& rng) {
  if (mu1.size() != mu2.size()) throw InvalidArgument("mu1 and mu2 differ in dimension");
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be > 0");
  if (n_mc < 2) throw InvalidArgument("n_mc must be >= 2");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> diff(n_mc), sq(n_mc);
  Vector eps(mu1.size());
  for (int k = 0; k < n_mc; ++k) {
    for (Eigen::Index d = 0; d < eps.size(); ++d) eps[d] = normal(rng);
    const double g1 = g(mu1 + sigma * eps);
    const double g2 = g(mu2 + sigma * eps);
    if (g1 < 0.0 || g2 < 0.0 || !std::isfinite(g1) || !std::isfinite(g2))
      throw InvalidArgument("test function must be finite and nonnegative");
    diff[k] = g1 - g2;
    sq[k] = g1;
  }
  // Work in units of the largest g1 so that g1^2 cannot underflow when g is
  // tiny but positive (the left side would then beat a spurious zero).
  const double unit = *std::max_element(sq.begin(), sq.end());
  if (unit > 0.0)
    for (double& v : sq) v = (v / unit) * (v / unit);
  const McEstimate lhs = mean_stderr(diff);
  const McEstimate m2 = mean_stderr(sq);
  const double scale = std::min((mu1 - mu2).norm() / sigma, 1.0);
  GaussianShiftCheck out;
  out.lhs = lhs.mean;
  out.lhs_se = lhs.se;
  out.rhs = scale * std::sqrt(m2.mean) * unit;
  out.rhs_se = m2.mean > 0.0 ? scale * unit * m2.se / (2.0 * std::sqrt(m2.mean)) : 0.0;
  out.holds = out.lhs <= out.rhs + 3.0 * std::hypot(out.lhs_se, out.rhs_se);
  return out;
}

namespace {

int argmax_lowest(const std::vector<double>& q) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(q.size()); ++j)
    if (q[j] > q[best]) best = j;
  return best;
}

Vector true_step(const CmdpIvModel& model, const Vector& x, double a, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector next = model.mean_next(x, a);
  for (Eigen::Index i = 0; i < next.size(); ++i) next[i] += model.sigma * normal(rng);
  return next;
}

}  // namespace

DecompositionReport lemma_d1_decomposition(const CmdpIvModel& model, const Plan& plan_hat,
                                           const Plan& plan_star, const Vector& x1,
                                           int n_rollouts, Rng& rng) {
  if (n_rollouts < 2) throw InvalidArgument("n_rollouts must be >= 2");
  const int H = model.horizon;
  if (plan_hat.horizon() != H || plan_star.horizon() != H)
    throw InvalidArgument("plans and model disagree on the horizon");

  DecompositionReport rep;
  rep.x1 = x1;
  rep.v_hat_1 = plan_hat.greedy_value(1, x1);

  std::vector<double> xi(n_rollouts), iota_s(n_rollouts), iota_h(n_rollouts),
      star_minus_hat(n_rollouts), direct(n_rollouts);

  // Rollouts under pi*: xi and iota along the path.
  for (int r = 0; r < n_rollouts; ++r) {
    Rng path = make_rng(rng(), 1);
    Vector x = x1;
    std::vector<double> q = plan_hat.q_row(1, x);
    double v = q[argmax_lowest(q)];
    double sx = 0.0, si = 0.0;
    for (int h = 1; h <= H; ++h) {
      const double a = plan_star.action_grid()[plan_star.greedy_index(h, x)];
      const double q_a = plan_hat.q_value(h, x, a);
      const double rew = model.reward(h, x, a);
      x = true_step(model, x, a, path);
      double v_next = 0.0;
      if (h < H) {
        q = plan_hat.q_row(h + 1, x);
        v_next = q[argmax_lowest(q)];
      }
      sx += q_a - v;
      si += rew + v_next - q_a;
      v = v_next;
    }
    xi[r] = sx;
    iota_s[r] = si;
    star_minus_hat[r] = sx + si;
  }

  // Rollouts under pi_hat: Q at the greedy action equals V.
  for (int r = 0; r < n_rollouts; ++r) {
    Rng path = make_rng(rng(), 2);
    Vector x = x1;
    std::vector<double> q = plan_hat.q_row(1, x);
    double si = 0.0;
    for (int h = 1; h <= H; ++h) {
      const int j = argmax_lowest(q);
      const double a = plan_hat.action_grid()[j];
      const double q_a = q[j];
      const double rew = model.reward(h, x, a);
      x = true_step(model, x, a, path);
      double v_next = 0.0;
      if (h < H) {
        q = plan_hat.q_row(h + 1, x);
        v_next = q[argmax_lowest(q)];
      }
      si += rew + v_next - q_a;
    }
    iota_h[r] = si;
  }

  // Independent batch: paired returns of pi* and pi_hat.
  const Policy pi_star = plan_star.greedy_policy();
  const Policy pi_hat = plan_hat.greedy_policy();
  for (int r = 0; r < n_rollouts; ++r) {
    const std::uint64_t seed = rng();
    Rng a = make_rng(seed, 3);
    Rng b = make_rng(seed, 3);
    direct[r] = rollout_evaluation(model, pi_star, x1, a).total_return -
                rollout_evaluation(model, pi_hat, x1, b).total_return;
  }

  rep.xi_star = mean_stderr(xi);
  rep.iota_star = mean_stderr(iota_s);
  rep.iota_hat = mean_stderr(iota_h);
  const McEstimate first = mean_stderr(star_minus_hat);
  rep.reconstruction.mean = first.mean - rep.iota_hat.mean;
  rep.reconstruction.se = std::hypot(first.se, rep.iota_hat.se);
  rep.direct = mean_stderr(direct);
  rep.combined_se = std::hypot(rep.reconstruction.se, rep.direct.se);
  rep.identity_holds =
      std::abs(rep.reconstruction.mean - rep.direct.mean) <= 3.0 * rep.combined_se;
  rep.xi_nonpositive = rep.xi_star.mean <= 3.0 * rep.xi_star.se;
  return rep;
}

}  // namespace ivvi
