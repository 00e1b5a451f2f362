#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ivvi/errors.hpp"
#include "ivvi/planner.hpp"
#include "oracles.hpp"

using namespace ivvi;

namespace {

const FeatureBasis kFeatures(FeatureKind::kIdentityAffine, Box{{-1.5, 1.5}, {-1.0, 1.0}}, 3);

Matrix raw_w(double c, double x, double a) {
  return (Matrix(1, 3) << c, x, a).finished() / kFeatures.normalization();
}

RewardFn target_reward() {
  RewardSpec rs;
  rs.kind = RewardSpec::Kind::kTarget;
  rs.target = Vector::Constant(1, 0.5);
  rs.width = 1.5;
  rs.action_cost = 0.1;
  return rs.make();
}

std::vector<double> node_values(const StateGrid& g, double (*f)(const Vector&)) {
  std::vector<double> v(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) v[n] = f(g.node(n));
  return v;
}

}  // namespace

TEST_CASE("backup of a constant value function is that constant") {
  const StateGrid g = StateGrid::uniform(Box{{-1.0, 1.0}}, {11});
  const std::vector<double> v(g.size(), 0.7);
  Rng rng(1);
  const McEstimate e = gaussian_backup(g, v, Interpolation::kMultilinear, Vector::Constant(1, 0.3), 0.5, 500, rng);
  CHECK(e.mean == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(e.se <= 1e-12);
}

TEST_CASE("backup of a linear value function is its value at the mean") {
  const StateGrid g = StateGrid::uniform(Box{{-10.0, 10.0}}, {2001});
  const auto v = node_values(g, [](const Vector& x) { return 2.0 * x[0] + 1.0; });
  // Calibration over independent draws: the z-scores should look standard normal.
  double z2 = 0.0;
  int beyond3 = 0;
  const int reps = 200;
  for (int s = 0; s < reps; ++s) {
    Rng rng(1000 + s);
    const McEstimate e = gaussian_backup(g, v, Interpolation::kMultilinear, Vector::Constant(1, 0.3), 0.2, 2000, rng);
    const double z = (e.mean - 1.6) / e.se;
    z2 += z * z;
    beyond3 += std::abs(z) > 3.0;
  }
  // Mean of 200 chi-square(1) draws has sd 0.1.
  CHECK(z2 / reps == doctest::Approx(1.0).epsilon(0.4));
  CHECK(beyond3 <= 4);
}

TEST_CASE("backup of a quadratic adds the variance term") {
  const StateGrid g = StateGrid::uniform(Box{{-3.0, 3.0}}, {6001});
  const auto v = node_values(g, [](const Vector& x) { return x[0] * x[0]; });
  Rng rng(3);
  const McEstimate e = gaussian_backup(g, v, Interpolation::kMultilinear, Vector::Constant(1, 0.5), 0.3, 100000, rng);
  // E[(m + s eps)^2] = m^2 + s^2; piecewise-linear interpolation adds at most h^2 / 4.
  CHECK(std::abs(e.mean - 0.34) <= 3.0 * e.se + 2.5e-7);
}

TEST_CASE("multilinear interpolation reproduces bilinear functions") {
  const StateGrid g({{-1.0, -0.2, 0.5, 1.0}, {0.0, 1.0, 3.0}});
  auto f = [](const Vector& x) { return 1.0 + 2.0 * x[0] - 3.0 * x[1] + 4.0 * x[0] * x[1]; };
  std::vector<double> v(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) v[n] = f(g.node(n));
  // Last coordinate varies fastest.
  CHECK(g.node(1) == (Vector(2) << -1.0, 1.0).finished());
  CHECK(g.node(3) == (Vector(2) << -0.2, 0.0).finished());
  Rng rng(4);
  std::uniform_real_distribution<double> u0(-1.0, 1.0), u1(0.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    const Vector x = (Vector(2) << u0(rng), u1(rng)).finished();
    CHECK(g.interpolate(v, x, Interpolation::kMultilinear) == doctest::Approx(f(x)).epsilon(1e-12));
  }
  // Outside the box the state is clamped first.
  const Vector out = (Vector(2) << 5.0, -2.0).finished();
  CHECK(g.interpolate(v, out, Interpolation::kMultilinear) == doctest::Approx(f((Vector(2) << 1.0, 0.0).finished())));
  CHECK(g.interpolate(v, out, Interpolation::kNearest) == v[g.nearest(out)]);
}

TEST_CASE("grid construction errors") {
  CHECK_THROWS_AS(StateGrid(std::vector<std::vector<double>>{{0.0, 0.0}}), InvalidArgument);
  CHECK_THROWS_AS(StateGrid(std::vector<std::vector<double>>{{}}), InvalidArgument);
  CHECK_THROWS_AS(StateGrid::uniform(Box{{-1.0, 1.0}}, {0}), InvalidArgument);
  CHECK_THROWS_AS(parse_interpolation("cubic"), InvalidArgument);
}

TEST_CASE("one-step horizon: V_1 is the best immediate reward whatever W is") {
  const StateGrid g = StateGrid::uniform(Box{{-1.5, 1.5}}, {31});
  const auto actions = uniform_action_grid({-1.0, 1.0}, 11);
  const PlannerModel model{0.1, target_reward(), 1};
  Rng r1(5), r2(6);
  const Plan p1 = value_iteration(raw_w(0.0, 0.5, 0.4), model, kFeatures, g, actions, {}, r1);
  const Plan p2 = value_iteration(raw_w(0.3, -0.9, 1.0), model, kFeatures, g, actions, {}, r2);
  for (std::size_t n = 0; n < g.size(); ++n) {
    double best = 0.0;
    for (double a : actions) best = std::max(best, model.reward(1, g.node(n), a));
    CHECK(p1.values().values[0][n] == best);
    CHECK(p2.values().values[0][n] == best);
    CHECK(p1.values().values[1][n] == 0.0);
  }
}

TEST_CASE("unit reward gives V_h = H - h + 1 everywhere") {
  const StateGrid g = StateGrid::uniform(Box{{-1.5, 1.5}}, {21});
  const PlannerModel model{0.1, [](int, const Vector&, double) { return 1.0; }, 5};
  Rng rng(7);
  const Plan p = value_iteration(raw_w(0.1, 0.7, 0.5), model, kFeatures, g, uniform_action_grid({-1.0, 1.0}, 5), {}, rng);
  for (int h = 1; h <= 6; ++h)
    for (double v : p.values().values[h - 1]) CHECK(v == doctest::Approx(6.0 - h).epsilon(1e-12));
}

TEST_CASE("degenerate backups match tabular dynamic programming on a closed instance") {
  Rng rng(8);
  const oracle::ClosedInstance inst(rng);
  const auto sol = oracle::tabular_dp(inst.next, inst.reward);
  const PlannerModel model{0.1, inst.reward_fn(), inst.horizon};
  for (Interpolation interp : {Interpolation::kMultilinear, Interpolation::kNearest}) {
    PlannerOptions opt;
    opt.backup = BackupMode::kDegenerate;
    opt.interpolation = interp;
    const Plan p = value_iteration(inst.w, model, inst.features, inst.grid, inst.actions, opt, rng);
    double worst = 0.0;
    for (int h = 1; h <= inst.horizon; ++h)
      for (std::size_t n = 0; n < inst.grid.size(); ++n) {
        worst = std::max(worst, std::abs(p.values().values[h - 1][n] - sol.value[h - 1][n]));
        CHECK(p.policy().action_index[h - 1][n] == sol.action[h - 1][n]);
      }
    CHECK(worst <= 1e-6);
  }
  // Monte Carlo backups with vanishing noise agree as well.
  const PlannerModel quiet{1e-10, inst.reward_fn(), inst.horizon};
  const Plan p = value_iteration(inst.w, quiet, inst.features, inst.grid, inst.actions, {}, rng);
  for (std::size_t n = 0; n < inst.grid.size(); ++n) CHECK(std::abs(p.values().values[0][n] - sol.value[0][n]) <= 1e-6);
}

TEST_CASE("stored values equal the Q-value of the stored action") {
  const StateGrid g = StateGrid::uniform(Box{{-1.5, 1.5}}, {25});
  const PlannerModel model{0.15, target_reward(), 3};
  PlannerOptions opt;
  opt.n_mc = 50;
  Rng rng(9);
  const Plan p = value_iteration(raw_w(0.0, 0.5, 0.4), model, kFeatures, g, uniform_action_grid({-1.0, 1.0}, 9), opt, rng);
  for (int h = 1; h <= 3; ++h)
    for (std::size_t n = 0; n < g.size(); ++n) {
      const Vector x = g.node(n);
      const double v = p.values().values[h - 1][n];
      CHECK(v == p.q_value(h, x, p.policy().action(h, n)));
      CHECK(v == p.greedy_value(h, x));
      CHECK(p.greedy_index(h, x) == p.policy().action_index[h - 1][n]);
      CHECK(v >= 0.0);
      CHECK(v <= 4.0 - h);
      const auto q = p.q_row(h, x);
      CHECK(*std::max_element(q.begin(), q.end()) == v);
    }
  CHECK(p.greedy_value(4, g.node(0)) == 0.0);
}

TEST_CASE("policy lookup uses the nearest node with ties to the lower index") {
  const StateGrid g({{0.0, 1.0, 2.0}});
  PolicyTable t{g, {-1.0, 0.0, 1.0}, {{0, 1, 2}}};
  CHECK(policy_lookup(t, 1, Vector::Constant(1, 1.0)) == 0.0);
  CHECK(policy_lookup(t, 1, Vector::Constant(1, 0.5)) == -1.0);
  CHECK(policy_lookup(t, 1, Vector::Constant(1, 1.5)) == 0.0);
  CHECK(policy_lookup(t, 1, Vector::Constant(1, 1.6)) == 1.0);
  CHECK(policy_lookup(t, 1, Vector::Constant(1, 9.0)) == 1.0);
  CHECK(policy_lookup(t, 1, Vector::Constant(1, -9.0)) == -1.0);
  CHECK_THROWS_AS(policy_lookup(t, 2, Vector::Constant(1, 0.0)), InvalidArgument);
}

TEST_CASE("planned values move by at most the model-error bound") {
  const StateGrid g = StateGrid::uniform(Box{{-1.5, 1.5}}, {41});
  const auto actions = uniform_action_grid({-1.0, 1.0}, 11);
  const int H = 3;
  const double sigma = 0.1;
  const PlannerModel model{sigma, target_reward(), H};
  PlannerOptions opt;
  opt.n_mc = 400;
  const Matrix w_star = raw_w(0.0, 0.5, 0.4);
  Rng base(10);
  const Plan star = value_iteration(w_star, model, kFeatures, g, actions, opt, base);
  Rng rng(11);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int k = 0; k < 10; ++k) {
    Matrix w = w_star;
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += u(rng);
    Rng same(10);  // shared draws
    const Plan hat = value_iteration(w, model, kFeatures, g, actions, opt, same);
    const double bound = 2.0 * H * H * std::min((w - w_star).operatorNorm() / sigma, 1.0);
    double gap = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n)
      gap = std::max(gap, std::abs(hat.values().values[0][n] - star.values().values[0][n]));
    CHECK(gap <= bound + 0.02);
  }
}

TEST_CASE("value iteration is reproducible and validates inputs") {
  const StateGrid g = StateGrid::uniform(Box{{-1.5, 1.5}}, {11});
  const PlannerModel model{0.1, target_reward(), 2};
  const auto actions = uniform_action_grid({-1.0, 1.0}, 5);
  Rng a(12), b(12);
  const Plan pa = value_iteration(raw_w(0.0, 0.5, 0.4), model, kFeatures, g, actions, {}, a);
  const Plan pb = value_iteration(raw_w(0.0, 0.5, 0.4), model, kFeatures, g, actions, {}, b);
  CHECK(pa.values().values == pb.values().values);
  Rng r(0);
  CHECK_THROWS_AS(value_iteration(raw_w(0, 0, 0), model, kFeatures, g, {}, {}, r), InvalidArgument);
  CHECK_THROWS_AS(value_iteration(raw_w(NAN, 0, 0), model, kFeatures, g, actions, {}, r), InvalidArgument);
  CHECK_THROWS_AS(value_iteration(Matrix::Zero(1, 2), model, kFeatures, g, actions, {}, r), InvalidArgument);
  CHECK(uniform_action_grid({-1.0, 1.0}, 1) == std::vector<double>{0.0});
  CHECK(uniform_action_grid({-1.0, 1.0}, 3) == std::vector<double>{-1.0, 0.0, 1.0});
}

TEST_CASE("plan CSV has one row per node and step") {
  const StateGrid g = StateGrid::uniform(Box{{-1.5, 1.5}}, {4});
  const PlannerModel model{0.1, target_reward(), 2};
  Rng rng(13);
  const Plan p = value_iteration(raw_w(0.0, 0.5, 0.4), model, kFeatures, g, uniform_action_grid({-1.0, 1.0}, 3), {}, rng);
  std::ostringstream os;
  write_plan_csv(os, p);
  const std::string s = os.str();
  CHECK(s.rfind("h,x_1,value,action\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 3 * 4);
}
