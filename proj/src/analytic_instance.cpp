#include "ivvi/analytic_instance.hpp"

#include <cmath>
#include <limits>

#include "ivvi/errors.hpp"

namespace ivvi {
namespace {

FeatureBasis primal_basis(double amax) {
  return FeatureBasis(FeatureKind::kIdentityAffine, Box{{-1.0, 1.0}, {-amax, amax}}, 3);
}

FeatureBasis dual_basis() {
  return FeatureBasis(FeatureKind::kIdentityAffine, Box{{-1.0, 1.0}, {-1.0, 1.0}}, 3);
}

}  // namespace

FeatureMap AnalyticInstance::feature_map() const {
  return FeatureMap(primal_basis(action_bound), dual_basis(), true);
}

CmdpIvModel AnalyticInstance::model(RewardFn reward, int horizon) const {
  if (w_star.size() != 3) throw InvalidArgument("analytic instance needs a 3-entry W*");
  if (!reward) reward = [](int, const Vector&, double) { return 1.0; };
  BehaviorPolicy behavior;
  behavior.c0 = c0;
  behavior.c_x = Vector::Constant(1, cx);
  behavior.c_z = Vector::Constant(1, cz);
  behavior.c_e = ce;
  behavior.action_noise_std = action_noise_std;
  behavior.action_bounds = {-action_bound, action_bound};
  CmdpIvModel m{
      .w_star = w_star.transpose(),
      .dynamics_features = primal_basis(action_bound),
      .sigma = sigma,
      .horizon = horizon,
      .reward = std::move(reward),
      .init_box = Box{{-1.0, 1.0}},
      .instrument_box = Box{{-1.0, 1.0}},
      .z_dist = InstrumentDistribution::kUniform,
      .behavior = behavior,
  };
  m.validate();
  return m;
}

MomentMatrices AnalyticInstance::population_moments() const {
  const double s_phi = std::sqrt(2.0 + action_bound * action_bound);
  const double s_psi = std::sqrt(3.0);
  const double third = 1.0 / 3.0;
  const double ea2 = c0 * c0 + (cx * cx + cz * cz) * third + ce * ce * sigma * sigma +
                     action_noise_std * action_noise_std;

  Matrix a_raw(3, 3);
  a_raw << 1.0, 0.0, c0,
           0.0, third, cx * third,
           0.0, 0.0, cz * third;
  Matrix d_raw(3, 3);
  d_raw << 1.0, 0.0, c0,
           0.0, third, cx * third,
           c0, cx * third, ea2;

  MomentMatrices m;
  m.A = a_raw / (s_psi * s_phi);
  m.B = Vector::Constant(3, third).asDiagonal();
  m.B(0, 0) = 1.0;
  m.B /= s_psi * s_psi;
  m.D = d_raw / (s_phi * s_phi);
  // e is independent of (x, z), so E[x' psi^T] = W* E[phi psi^T].
  m.C = w_star.transpose() * m.A.transpose();
  m.n_samples = std::numeric_limits<long long>::max();
  return m;
}

Matrix AnalyticInstance::confounding_covariance() const {
  const double s_phi = std::sqrt(2.0 + action_bound * action_bound);
  Matrix c = Matrix::Zero(1, 3);
  c(0, 2) = ce * sigma * sigma / s_phi;
  return c;
}

Matrix AnalyticInstance::ols_limit() const {
  const MomentMatrices m = population_moments();
  Eigen::LDLT<Matrix> fact(m.D);
  const Matrix cross = w_star.transpose() * m.D + confounding_covariance();  // E[x' phi^T]
  return fact.solve(cross.transpose()).transpose();
}

double AnalyticInstance::bound_margin_sigmas() const {
  const double sd = std::sqrt(ce * ce * sigma * sigma + action_noise_std * action_noise_std);
  const double reach = std::abs(c0) + std::abs(cx) + std::abs(cz);
  if (sd == 0.0) return reach < action_bound ? std::numeric_limits<double>::infinity() : 0.0;
  return (action_bound - reach) / sd;
}

}  // namespace ivvi
