#include "ivvi/moments.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "ivvi/csv.hpp"
#include "ivvi/errors.hpp"
#include "ivvi/log.hpp"

namespace ivvi {
namespace {

Eigen::SelfAdjointEigenSolver<Matrix> checked_dual_eigen(const Matrix& B) {
  if (B.rows() == 0 || B.rows() != B.cols())
    throw InvalidArgument("moment matrix B must be square and non-empty");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(B);
  if (eig.info() != Eigen::Success) throw IdentificationError("eigendecomposition of B failed");
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo < kSingularTolerance * hi) {
    std::ostringstream os;
    os << "dual second-moment matrix B is singular (sigma_min=" << lo << ", sigma_max=" << hi
       << "); drop redundant dual features";
    throw IdentificationError(os.str());
  }
  return eig;
}

// Singular values of B^{-1/2} A, in decreasing order.
Vector whitened_singular_values(const MomentMatrices& m) {
  const auto eig = checked_dual_eigen(m.B);
  const Matrix inv_sqrt = eig.eigenvectors() *
                          eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                          eig.eigenvectors().transpose();
  Eigen::JacobiSVD<Matrix> svd(inv_sqrt * m.A);
  return svd.singularValues();
}

void check_shapes(const MomentMatrices& m) {
  if (m.B.rows() != m.A.rows() || m.B.cols() != m.A.rows() || m.C.cols() != m.A.rows())
    throw InvalidArgument("moment matrices have inconsistent shapes");
}

}  // namespace

MomentMatrices estimate_moments(const Dataset& data, const FeatureMap& map) {
  if (data.empty()) throw DataError("cannot estimate moments from an empty dataset");
  const int dp = map.d_phi();
  const int dq = map.d_psi();
  const int dx = static_cast<int>(data.transitions.front().x_next.size());
  MomentMatrices m;
  m.A = Matrix::Zero(dq, dp);
  m.B = Matrix::Zero(dq, dq);
  m.C = Matrix::Zero(dx, dq);
  m.D = Matrix::Zero(dp, dp);
  for (const Transition& tr : data.transitions) {
    if (tr.x_next.size() != dx) throw DataError("transition next-state sizes disagree");
    const Vector phi = map.eval_phi(tr.x, tr.a);
    const Vector psi = map.eval_psi(tr.x, tr.z);
    m.A.noalias() += psi * phi.transpose();
    m.B.noalias() += psi * psi.transpose();
    m.C.noalias() += tr.x_next * psi.transpose();
    m.D.noalias() += phi * phi.transpose();
  }
  const double n = static_cast<double>(data.size());
  m.A /= n;
  m.B /= n;
  m.C /= n;
  m.D /= n;
  m.B = 0.5 * (m.B + m.B.transpose()).eval();
  m.D = 0.5 * (m.D + m.D.transpose()).eval();
  m.n_samples = static_cast<long long>(data.size());
  return m;
}

IvDiagnostics iv_diagnostics(const MomentMatrices& m) {
  check_shapes(m);
  IvDiagnostics d;
  const auto eig = checked_dual_eigen(m.B);
  d.mu_b = eig.eigenvalues().minCoeff();
  d.l_b = eig.eigenvalues().maxCoeff();

  Eigen::JacobiSVD<Matrix> svd_a(m.A);
  const Vector sa = svd_a.singularValues();
  d.l_a = sa.size() ? sa(0) : 0.0;
  d.mu_a = m.A.rows() < m.A.cols() ? 0.0 : sa(sa.size() - 1);

  const Vector s = whitened_singular_values(m);
  d.l_p = s.size() ? s(0) * s(0) : 0.0;
  if (m.A.rows() < m.A.cols() || s(s.size() - 1) <= kSingularTolerance * s(0)) {
    d.rank_deficient = true;
    d.mu_iv = 0.0;
  } else {
    const double lo = s(s.size() - 1);
    d.mu_iv = lo * lo;
  }
  return d;
}

double iv_strength(const MomentMatrices& m) {
  const IvDiagnostics d = iv_diagnostics(m);
  if (d.rank_deficient)
    log::warning("A = E[psi phi^T] is rank deficient; the instrument does not identify W (mu_IV = 0)");
  return d.mu_iv;
}

double dual_conditioning(const MomentMatrices& m) {
  return checked_dual_eigen(m.B).eigenvalues().minCoeff();
}

SaddlePoint oracle_saddle(const MomentMatrices& m) {
  check_shapes(m);
  checked_dual_eigen(m.B);
  Eigen::LDLT<Matrix> b_fact(m.B);
  const Matrix G = b_fact.solve(m.A);  // B^-1 A
  Matrix P = m.A.transpose() * G;
  P = 0.5 * (P + P.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> p_eig(P);
  const double lo = p_eig.eigenvalues().minCoeff();
  const double hi = p_eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= kSingularTolerance * hi)
    throw IdentificationError("A^T B^-1 A is singular; the saddle point is not identified");
  Eigen::LDLT<Matrix> p_fact(P);
  SaddlePoint sp;
  // Row i: (A^T B^-1 A)^-1 A^T B^-1 b_i.
  sp.W = p_fact.solve(G.transpose() * m.C.transpose()).transpose();
  sp.K = optimal_dual(m, sp.W);
  return sp;
}

Matrix optimal_dual(const MomentMatrices& m, const Matrix& W) {
  Eigen::LDLT<Matrix> b_fact(m.B);
  const Matrix rhs = m.A * W.transpose() - m.C.transpose();  // (W A^T - C)^T
  return b_fact.solve(rhs).transpose();
}

double lagrangian(const MomentMatrices& m, const Matrix& W, const Matrix& K) {
  return (K * m.A * W.transpose()).trace() - (m.C * K.transpose()).trace() -
         0.5 * (K * m.B * K.transpose()).trace();
}

LagrangianGradient lagrangian_gradient(const MomentMatrices& m, const Matrix& W, const Matrix& K) {
  LagrangianGradient g;
  g.dW = K * m.A;
  g.dK = W * m.A.transpose() - m.C - K * m.B;
  return g;
}

void write_moments_csv(std::ostream& out, const MomentMatrices& m) {
  csv::write_matrix(out, "A", m.A);
  csv::write_matrix(out, "B", m.B);
  csv::write_matrix(out, "C", m.C);
  csv::write_matrix(out, "D", m.D);
}

}  // namespace ivvi
