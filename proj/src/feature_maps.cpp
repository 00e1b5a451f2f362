#include "ivvi/feature_maps.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ivvi/errors.hpp"

namespace ivvi {
namespace {

// Monomials of total degree exactly `degree` in `k` variables, as
// nondecreasing index sequences i_1 <= ... <= i_degree.
void append_monomials(int k, int degree, std::vector<std::vector<int>>& out) {
  std::vector<int> idx(degree, 0);
  while (true) {
    std::vector<int> exps(k, 0);
    for (int i : idx) ++exps[i];
    out.push_back(std::move(exps));
    int pos = degree - 1;
    while (pos >= 0 && idx[pos] == k - 1) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int j = pos + 1; j < degree; ++j) idx[j] = idx[pos];
  }
}

constexpr int kGridBudget = 200000;

}  // namespace

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kIdentityAffine: return "identity-affine";
    case FeatureKind::kPolynomial: return "polynomial";
    case FeatureKind::kRandomFourier: return "random-fourier";
  }
  return "unknown";
}

FeatureKind parse_feature_kind(std::string_view name) {
  if (name == "identity-affine") return FeatureKind::kIdentityAffine;
  if (name == "polynomial") return FeatureKind::kPolynomial;
  if (name == "random-fourier") return FeatureKind::kRandomFourier;
  throw InvalidArgument("unsupported feature kind '" + std::string(name) + "'");
}

FeatureBasis::FeatureBasis(FeatureKind kind, Box domain, int output_dim, std::uint64_t seed)
    : kind_(kind), domain_(std::move(domain)), output_dim_(output_dim), seed_(seed) {
  if (output_dim_ < 1) throw InvalidArgument("feature output_dim must be >= 1");
  if (domain_.empty()) throw InvalidArgument("feature domain must have at least one coordinate");
  for (const auto& iv : domain_) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.hi > iv.lo)) {
      throw InvalidArgument("degenerate feature domain interval [" + std::to_string(iv.lo) + ", " +
                            std::to_string(iv.hi) + "]");
    }
  }
  const int k = input_dim();
  switch (kind_) {
    case FeatureKind::kIdentityAffine:
      if (output_dim_ > k + 1) {
        throw InvalidArgument("identity-affine map has at most " + std::to_string(k + 1) +
                              " features");
      }
      break;
    case FeatureKind::kPolynomial: {
      for (int degree = 0; static_cast<int>(exponents_.size()) < output_dim_; ++degree) {
        if (degree > 12) throw InvalidArgument("polynomial feature dimension too large");
        if (degree == 0) {
          exponents_.emplace_back(k, 0);
        } else {
          append_monomials(k, degree, exponents_);
        }
      }
      exponents_.resize(output_dim_);
      break;
    }
    case FeatureKind::kRandomFourier: {
      Rng rng = make_rng(seed_, 0x5eed);
      double half_width = 0.0;
      for (const auto& iv : domain_) half_width += 0.5 * iv.width();
      half_width /= k;
      std::normal_distribution<double> normal(0.0, 1.0 / half_width);
      std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
      frequencies_.resize(output_dim_, k);
      offsets_.resize(output_dim_);
      for (int j = 0; j < output_dim_; ++j) {
        for (int i = 0; i < k; ++i) frequencies_(j, i) = normal(rng);
        offsets_[j] = phase(rng);
      }
      break;
    }
  }

  double sup = raw_sup_norm();
  if (kind_ == FeatureKind::kRandomFourier) {
    sup = std::min(1.1 * sup, std::sqrt(static_cast<double>(output_dim_)));
  }
  normalization_ = 1.0 / sup;
}

Vector FeatureBasis::raw(const Vector& u) const {
  Vector out(output_dim_);
  switch (kind_) {
    case FeatureKind::kIdentityAffine:
      out[0] = 1.0;
      for (int j = 1; j < output_dim_; ++j) out[j] = u[j - 1];
      break;
    case FeatureKind::kPolynomial:
      for (int j = 0; j < output_dim_; ++j) {
        double m = 1.0;
        for (int i = 0; i < input_dim(); ++i) {
          for (int p = 0; p < exponents_[j][i]; ++p) m *= u[i];
        }
        out[j] = m;
      }
      break;
    case FeatureKind::kRandomFourier:
      for (int j = 0; j < output_dim_; ++j) {
        out[j] = std::cos(frequencies_.row(j).dot(u) + offsets_[j]);
      }
      break;
  }
  return out;
}

Vector FeatureBasis::evaluate(const Vector& u) const {
  if (u.size() != input_dim()) {
    throw InvalidArgument("feature input has dimension " + std::to_string(u.size()) +
                          ", expected " + std::to_string(input_dim()));
  }
  if (!u.allFinite()) throw DataError("non-finite feature input");
  return normalization_ * raw(clamp_to_box(domain_, u));
}

double FeatureBasis::raw_sup_norm() const {
  const int k = input_dim();
  switch (kind_) {
    case FeatureKind::kIdentityAffine: {
      double s = 1.0;
      for (int j = 1; j < output_dim_; ++j) s += std::pow(domain_[j - 1].max_abs(), 2);
      return std::sqrt(s);
    }
    case FeatureKind::kPolynomial: {
      // Every squared monomial is coordinatewise nondecreasing in |u_i|, so all
      // of them peak together at the corner of largest magnitudes.
      Vector corner(k);
      for (int i = 0; i < k; ++i) corner[i] = domain_[i].max_abs();
      return raw(corner).norm();
    }
    case FeatureKind::kRandomFourier: {
      const int per_dim = std::clamp(
          static_cast<int>(std::floor(std::pow(kGridBudget, 1.0 / k))), 2, 2001);
      std::vector<int> idx(k, 0);
      double best = 0.0;
      Vector u(k);
      while (true) {
        for (int i = 0; i < k; ++i) {
          u[i] = domain_[i].lo + domain_[i].width() * idx[i] / (per_dim - 1);
        }
        best = std::max(best, raw(u).norm());
        int pos = 0;
        while (pos < k && ++idx[pos] == per_dim) idx[pos++] = 0;
        if (pos == k) break;
      }
      return best;
    }
  }
  return 1.0;
}

FeatureBasis make_feature_map(FeatureKind kind, int input_dim, int output_dim, const Box& domain,
                              std::uint64_t seed) {
  if (static_cast<int>(domain.size()) != input_dim) {
    throw InvalidArgument("domain has " + std::to_string(domain.size()) +
                          " intervals, expected " + std::to_string(input_dim));
  }
  return FeatureBasis(kind, domain, output_dim, seed);
}

FeatureMap::FeatureMap(FeatureBasis primal, FeatureBasis dual, bool dual_includes_state)
    : primal_(std::move(primal)), dual_(std::move(dual)), dual_includes_state_(dual_includes_state) {
  if (primal_.input_dim() < 2) {
    throw InvalidArgument("primal features need at least one state and one action coordinate");
  }
  if (dual_includes_state_ && dual_.input_dim() <= state_dim()) {
    throw InvalidArgument("dual input (x, z) needs more than " + std::to_string(state_dim()) +
                          " coordinates");
  }
}

Vector FeatureMap::eval_phi(const Vector& x, double a) const {
  Vector u(x.size() + 1);
  u.head(x.size()) = x;
  u[x.size()] = a;
  return primal_.evaluate(u);
}

Vector FeatureMap::eval_psi(const Vector& z) const { return dual_.evaluate(z); }

Vector FeatureMap::dual_input(const Vector& x, const Vector& z) const {
  if (!dual_includes_state_) return z;
  Vector u(x.size() + z.size());
  u << x, z;
  return u;
}

}  // namespace ivvi
