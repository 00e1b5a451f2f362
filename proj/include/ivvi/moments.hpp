#pragma once

#include <iosfwd>

#include "ivvi/cmdp_env.hpp"
#include "ivvi/feature_maps.hpp"
#include "ivvi/types.hpp"

namespace ivvi {

/// Uncentered moments under the average visitation distribution:
///   A = E[psi phi^T], B = E[psi psi^T], C = E[x' psi^T], D = E[phi phi^T].
/// Row i of C is b_i^T.
struct MomentMatrices {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;
  long long n_samples = 0;

  int d_phi() const { return static_cast<int>(A.cols()); }
  int d_psi() const { return static_cast<int>(A.rows()); }
  int d_x() const { return static_cast<int>(C.rows()); }
};

MomentMatrices estimate_moments(const Dataset& data, const FeatureMap& map);

/// Relative eigenvalue floor below which B is treated as singular.
inline constexpr double kSingularTolerance = 1e-10;

/// Spectral summary of a moment set.
struct IvDiagnostics {
  double mu_iv = 0.0;  // sigma_min(A^T B^-1 A)
  double l_p = 0.0;    // sigma_max(A^T B^-1 A)
  double mu_b = 0.0;   // sigma_min(B)
  double l_b = 0.0;    // sigma_max(B)
  double mu_a = 0.0;   // sigma_min(A)
  double l_a = 0.0;    // sigma_max(A)
  bool rank_deficient = false;  // rank(A) < d_phi
};

/// Throws IdentificationError when B is singular.
IvDiagnostics iv_diagnostics(const MomentMatrices& m);

/// mu_IV = sigma_min(A^T B^-1 A), computed as the squared smallest singular
/// value of B^{-1/2} A. Returns 0 (with a logged warning) if A is rank
/// deficient; throws IdentificationError if B is singular.
double iv_strength(const MomentMatrices& m);

/// mu_B = smallest eigenvalue of B.
double dual_conditioning(const MomentMatrices& m);

struct SaddlePoint {
  Matrix W;
  Matrix K;
};

/// Closed-form saddle of L(W, K) = tr(K A W^T) - tr(C K^T) - tr(K B K^T) / 2:
///   W = C B^-1 A (A^T B^-1 A)^-1,  K = (W A^T - C) B^-1.
/// Computed through factorizations, never explicit inverses. Throws
/// IdentificationError when the normal matrix is singular.
SaddlePoint oracle_saddle(const MomentMatrices& m);

/// K*(W) = (W A^T - C) B^-1, the inner maximizer for fixed W.
Matrix optimal_dual(const MomentMatrices& m, const Matrix& W);

double lagrangian(const MomentMatrices& m, const Matrix& W, const Matrix& K);

/// Partial derivatives of L: dL/dW = K A and dL/dK = -(K B + C - W A^T).
struct LagrangianGradient {
  Matrix dW;
  Matrix dK;
};
LagrangianGradient lagrangian_gradient(const MomentMatrices& m, const Matrix& W, const Matrix& K);

void write_moments_csv(std::ostream& out, const MomentMatrices& m);

}  // namespace ivvi
