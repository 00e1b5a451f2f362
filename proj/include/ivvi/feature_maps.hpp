#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ivvi/types.hpp"

namespace ivvi {

enum class FeatureKind { kIdentityAffine, kPolynomial, kRandomFourier };

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view name);

/// A bounded basis u -> R^d on a declared box. Raw features are multiplied by
/// a normalization constant chosen so that the Euclidean norm never exceeds
/// one on the box. Inputs outside the box are clamped first, so the bound
/// holds everywhere.
///
/// Raw features per kind:
///   identity-affine: (1, u_1, ..., u_k), truncated to the first d entries.
///   polynomial:      monomials of total degree <= p in graded order
///                    (1, u_1, .., u_k, u_1^2, u_1 u_2, ...), where p is the
///                    smallest degree with at least d monomials; truncated to d.
///   random-fourier:  cos(w_j . u + b_j), w_j ~ N(0, I / l^2) with l the mean
///                    box half-width, b_j ~ U[0, 2 pi), drawn from the seed.
class FeatureBasis {
 public:
  FeatureBasis(FeatureKind kind, Box domain, int output_dim, std::uint64_t seed = 0);

  FeatureKind kind() const { return kind_; }
  int input_dim() const { return static_cast<int>(domain_.size()); }
  int output_dim() const { return output_dim_; }
  const Box& domain() const { return domain_; }
  double normalization() const { return normalization_; }
  std::uint64_t seed() const { return seed_; }
  const Matrix& frequencies() const { return frequencies_; }
  const Vector& offsets() const { return offsets_; }

  /// Throws DataError on a non-finite input and InvalidArgument on a size
  /// mismatch.
  Vector evaluate(const Vector& u) const;

  /// Sup of the raw (unnormalized) feature norm over the domain. Exact for
  /// affine and polynomial kinds; a dense-grid estimate for random-fourier.
  double raw_sup_norm() const;

 private:
  Vector raw(const Vector& clamped) const;

  FeatureKind kind_;
  Box domain_;
  int output_dim_;
  std::uint64_t seed_;
  // Exponent table for polynomial features, one row per monomial.
  std::vector<std::vector<int>> exponents_;
  Matrix frequencies_;
  Vector offsets_;
  double normalization_ = 1.0;
};

FeatureBasis make_feature_map(FeatureKind kind, int input_dim, int output_dim,
                              const Box& domain, std::uint64_t seed);

/// The primal map phi(x, a) over states and a scalar action, and the dual map
/// psi over the instrument input. When `dual_includes_state` is set the dual
/// input is (x, z); the current state is exogenous with respect to the
/// innovation of the same step, so it is a valid instrument coordinate.
class FeatureMap {
 public:
  FeatureMap(FeatureBasis primal, FeatureBasis dual, bool dual_includes_state);

  int d_phi() const { return primal_.output_dim(); }
  int d_psi() const { return dual_.output_dim(); }
  int state_dim() const { return primal_.input_dim() - 1; }
  bool dual_includes_state() const { return dual_includes_state_; }
  const FeatureBasis& primal() const { return primal_; }
  const FeatureBasis& dual() const { return dual_; }

  Vector eval_phi(const Vector& x, double a) const;
  /// `z` is the full dual input (see dual_input()).
  Vector eval_psi(const Vector& z) const;
  Vector dual_input(const Vector& x, const Vector& z) const;
  Vector eval_psi(const Vector& x, const Vector& z) const { return eval_psi(dual_input(x, z)); }

 private:
  FeatureBasis primal_;
  FeatureBasis dual_;
  bool dual_includes_state_;
};

}  // namespace ivvi
