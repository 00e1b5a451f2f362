#include "ivvi/types.hpp"

#include <algorithm>
#include <cmath>

namespace ivvi {

double Interval::max_abs() const { return std::max(std::abs(lo), std::abs(hi)); }

Vector clamp_to_box(const Box& box, const Vector& v) {
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = box[i].clamp(v[i]);
  return out;
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x1f1f1f1fu};
  return Rng(seq);
}

}  // namespace ivvi
