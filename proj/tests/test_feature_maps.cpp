#include <doctest.h>

#include <cmath>
#include <random>

#include "ivvi/errors.hpp"
#include "ivvi/feature_maps.hpp"

using namespace ivvi;

namespace {

Vector uniform_in(const Box& box, Rng& rng, double overshoot = 0.0) {
  Vector u(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) {
    const double pad = overshoot * box[i].width();
    u[i] = std::uniform_real_distribution<double>(box[i].lo - pad, box[i].hi + pad)(rng);
  }
  return u;
}

}  // namespace

TEST_CASE("identity-affine map on the unit square") {
  const Box box{{-1.0, 1.0}, {-1.0, 1.0}};
  const FeatureBasis f = make_feature_map(FeatureKind::kIdentityAffine, 2, 3, box, 0);
  CHECK(f.normalization() == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));

  const Vector corner = f.evaluate(Vector::Constant(2, 1.0));
  for (int i = 0; i < 3; ++i) CHECK(corner[i] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(corner.norm() == doctest::Approx(1.0).epsilon(1e-14));

  const Vector origin = f.evaluate(Vector::Zero(2));
  CHECK(origin[0] == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(origin[1] == 0.0);
  CHECK(origin[2] == 0.0);
}

TEST_CASE("dual map (1, z) on [-1, 1]") {
  const FeatureBasis f = make_feature_map(FeatureKind::kIdentityAffine, 1, 2, Box{{-1.0, 1.0}}, 0);
  const Vector psi = f.evaluate(Vector::Zero(1));
  CHECK(psi[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(psi[1] == 0.0);
}

TEST_CASE("polynomial degree two on a 100 x 100 grid stays in the unit ball") {
  const Box box{{-1.0, 1.0}, {-1.0, 1.0}};
  const FeatureBasis f = make_feature_map(FeatureKind::kPolynomial, 2, 6, box, 0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      Vector u(2);
      u << -1.0 + 2.0 * i / 99.0, -1.0 + 2.0 * j / 99.0;
      worst = std::max(worst, f.evaluate(u).norm());
    }
  }
  CHECK(worst <= 1.0 + 1e-12);
  // The corner attains the sup, so the normalization is tight.
  CHECK(worst == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("norm bound holds on random inputs for every kind, including out-of-box points") {
  const Box box{{-1.5, 1.5}, {-0.5, 2.0}, {-3.0, 3.0}};
  Rng rng(42);
  const FeatureKind kinds[] = {FeatureKind::kIdentityAffine, FeatureKind::kPolynomial,
                               FeatureKind::kRandomFourier};
  const int dims[] = {4, 10, 16};
  for (int k = 0; k < 3; ++k) {
    const FeatureBasis f = make_feature_map(kinds[k], 3, dims[k], box, 9);
    double worst = 0.0;
    for (int n = 0; n < 100000; ++n) worst = std::max(worst, f.evaluate(uniform_in(box, rng, 0.2)).norm());
    CAPTURE(to_string(kinds[k]));
    CHECK(worst <= 1.0 + 1e-12);
  }
}

TEST_CASE("evaluation is deterministic and seeds fix the random frequencies") {
  const Box box{{-1.0, 1.0}, {-2.0, 2.0}};
  const FeatureBasis a = make_feature_map(FeatureKind::kRandomFourier, 2, 8, box, 7);
  const FeatureBasis b = make_feature_map(FeatureKind::kRandomFourier, 2, 8, box, 7);
  const FeatureBasis c = make_feature_map(FeatureKind::kRandomFourier, 2, 8, box, 8);
  CHECK(a.frequencies() == b.frequencies());
  CHECK(a.offsets() == b.offsets());
  CHECK(a.frequencies() != c.frequencies());
  Rng rng(1);
  for (int n = 0; n < 100; ++n) {
    const Vector u = uniform_in(box, rng);
    const Vector first = a.evaluate(u);
    CHECK(first == a.evaluate(u));
    CHECK(first == b.evaluate(u));
  }
}

TEST_CASE("inputs outside the domain are clamped") {
  const Box box{{-1.0, 1.0}, {-1.0, 1.0}};
  const FeatureBasis f = make_feature_map(FeatureKind::kPolynomial, 2, 6, box, 0);
  Vector out(2), in(2);
  out << 5.0, -0.25;
  in << 1.0, -0.25;
  CHECK(f.evaluate(out) == f.evaluate(in));
}

TEST_CASE("feature construction and evaluation errors") {
  const Box box{{-1.0, 1.0}};
  CHECK_THROWS_AS(FeatureBasis(FeatureKind::kIdentityAffine, box, 0), InvalidArgument);
  CHECK_THROWS_AS(FeatureBasis(FeatureKind::kIdentityAffine, Box{{1.0, 1.0}}, 2), InvalidArgument);
  CHECK_THROWS_AS(FeatureBasis(FeatureKind::kIdentityAffine, Box{}, 1), InvalidArgument);
  CHECK_THROWS_AS(FeatureBasis(FeatureKind::kIdentityAffine, box, 3), InvalidArgument);
  CHECK_THROWS_AS(parse_feature_kind("wavelet"), InvalidArgument);
  CHECK_THROWS_AS(make_feature_map(FeatureKind::kPolynomial, 2, 3, box, 0), InvalidArgument);

  const FeatureBasis f(FeatureKind::kIdentityAffine, box, 2);
  CHECK_THROWS_AS(f.evaluate(Vector::Constant(1, std::nan(""))), DataError);
  CHECK_THROWS_AS(f.evaluate(Vector::Constant(1, INFINITY)), DataError);
  CHECK_THROWS_AS(f.evaluate(Vector::Zero(2)), InvalidArgument);
}

TEST_CASE("feature map joins state into the dual input on request") {
  const FeatureBasis primal(FeatureKind::kIdentityAffine, Box{{-1.0, 1.0}, {-1.0, 1.0}}, 3);
  const FeatureBasis dual_xz(FeatureKind::kIdentityAffine, Box{{-1.0, 1.0}, {-1.0, 1.0}}, 3);
  const FeatureBasis dual_z(FeatureKind::kIdentityAffine, Box{{-1.0, 1.0}}, 2);
  const FeatureMap with_state(primal, dual_xz, true);
  const FeatureMap without(primal, dual_z, false);
  const Vector x = Vector::Constant(1, 0.5);
  const Vector z = Vector::Constant(1, -0.25);
  CHECK(with_state.dual_input(x, z) == (Vector(2) << 0.5, -0.25).finished());
  CHECK(without.dual_input(x, z) == z);
  CHECK(with_state.d_phi() == 3);
  CHECK(with_state.d_psi() == 3);
  CHECK(without.d_psi() == 2);
  CHECK(with_state.state_dim() == 1);
  CHECK(with_state.eval_phi(x, 0.1) == primal.evaluate((Vector(2) << 0.5, 0.1).finished()));
  CHECK_THROWS_AS(FeatureMap(primal, dual_z, true), InvalidArgument);
}
