#include "ivvi/cmdp_env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "ivvi/csv.hpp"
#include "ivvi/errors.hpp"

namespace ivvi {

RewardFn RewardSpec::make() const {
  switch (kind) {
    case Kind::kConstant: {
      const double c = value;
      return [c](int, const Vector&, double) { return c; };
    }
    case Kind::kTarget: {
      const Vector t = target;
      const double w2 = width * width;
      const double cost = action_cost;
      return [t, w2, cost](int, const Vector& x, double a) {
        const double r = 1.0 - (x - t).squaredNorm() / w2 - cost * a * a;
        return std::clamp(r, 0.0, 1.0);
      };
    }
  }
  return {};
}

double BehaviorPolicy::act(const Vector& x, const Vector& z, const Vector& e, double noise) const {
  double a = c0 + c_x.dot(x) + c_z.dot(z) + c_e * e[0] + noise;
  return action_bounds.clamp(a);
}

Vector CmdpIvModel::mean_next(const Vector& x, double a) const {
  Vector u(x.size() + 1);
  u.head(x.size()) = x;
  u[x.size()] = a;
  return w_star * dynamics_features.evaluate(u);
}

Vector CmdpIvModel::sample_init(Rng& rng) const {
  Vector x(state_dim());
  for (int i = 0; i < state_dim(); ++i) {
    x[i] = std::uniform_real_distribution<double>(init_box[i].lo, init_box[i].hi)(rng);
  }
  return x;
}

Vector CmdpIvModel::sample_instrument(Rng& rng) const {
  Vector z(instrument_dim());
  for (int i = 0; i < instrument_dim(); ++i) {
    const Interval& iv = instrument_box[i];
    if (z_dist == InstrumentDistribution::kUniform) {
      z[i] = std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
    } else {
      // Centered on the box with the half-width at two standard deviations.
      const double mid = 0.5 * (iv.lo + iv.hi);
      z[i] = std::normal_distribution<double>(mid, 0.25 * iv.width())(rng);
    }
  }
  return z;
}

void CmdpIvModel::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be > 0");
  if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
  if (w_star.rows() < 1) throw InvalidArgument("W* must have at least one row");
  if (w_star.cols() != dynamics_features.output_dim()) {
    throw InvalidArgument("W* has " + std::to_string(w_star.cols()) +
                          " columns but the dynamics basis has " +
                          std::to_string(dynamics_features.output_dim()) + " features");
  }
  if (dynamics_features.input_dim() != state_dim() + 1) {
    throw InvalidArgument("dynamics basis input must be (state, action)");
  }
  if (static_cast<int>(init_box.size()) != state_dim()) {
    throw InvalidArgument("init box dimension differs from the state dimension");
  }
  if (behavior.c_x.size() != state_dim()) throw InvalidArgument("behavior c_x has wrong size");
  if (behavior.c_z.size() != instrument_dim()) throw InvalidArgument("behavior c_z has wrong size");
  if (behavior.action_noise_std < 0.0) throw InvalidArgument("action_noise_std must be >= 0");
  if (!reward) throw InvalidArgument("model has no reward function");
}

Transition step_offline(const CmdpIvModel& model, const Vector& x, Rng& rng) {
  if (!x.allFinite()) throw DataError("non-finite state passed to step_offline");
  std::normal_distribution<double> normal(0.0, 1.0);
  Transition tr;
  tr.x = x;
  tr.z = model.sample_instrument(rng);
  Vector e(model.state_dim());
  for (int i = 0; i < e.size(); ++i) e[i] = model.sigma * normal(rng);
  const double noise =
      model.behavior.action_noise_std > 0.0 ? model.behavior.action_noise_std * normal(rng) : 0.0;
  tr.a = model.behavior.act(x, tr.z, e, noise);
  tr.x_next = model.mean_next(x, tr.a) + e;
  if (!tr.x_next.allFinite()) throw DataError("non-finite next state in step_offline");
  return tr;
}

Dataset collect_offline_dataset(const CmdpIvModel& model, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw InvalidArgument("n_episodes must be >= 1");
  Rng rng = make_rng(seed, 0xda7a);
  Dataset data;
  data.n_episodes = n_episodes;
  data.horizon = model.horizon;
  data.seed = seed;
  data.transitions.reserve(static_cast<std::size_t>(n_episodes) * model.horizon);
  for (int ep = 0; ep < n_episodes; ++ep) {
    Vector x = model.sample_init(rng);
    for (int h = 1; h <= model.horizon; ++h) {
      Transition tr = step_offline(model, x, rng);
      tr.h = h;
      x = tr.x_next;
      data.transitions.push_back(std::move(tr));
    }
  }
  return data;
}

TransitionStream::TransitionStream(const Dataset& data, SamplingMode mode, Rng rng)
    : data_(&data), mode_(mode), rng_(std::move(rng)) {
  if (data.empty()) throw DataError("cannot stream from an empty dataset");
  if (mode_ == SamplingMode::kShuffled) {
    order_.resize(data.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }
}

const Transition& TransitionStream::next() {
  if (mode_ == SamplingMode::kWithReplacement) {
    std::uniform_int_distribution<std::size_t> pick(0, data_->size() - 1);
    return data_->transitions[pick(rng_)];
  }
  if (cursor_ >= order_.size()) {
    throw DataError("shuffled stream exhausted after " + std::to_string(order_.size()) +
                    " transitions");
  }
  return data_->transitions[order_[cursor_++]];
}

Rollout rollout_evaluation(const CmdpIvModel& model, const Policy& policy, const Vector& x1,
                           Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Rollout out;
  out.states.reserve(model.horizon + 1);
  out.states.push_back(x1);
  Vector x = x1;
  for (int h = 1; h <= model.horizon; ++h) {
    const double a = policy(h, x);
    const double r = model.reward(h, x, a);
    Vector next = model.mean_next(x, a);
    for (int i = 0; i < next.size(); ++i) next[i] += model.sigma * normal(rng);
    out.actions.push_back(a);
    out.rewards.push_back(r);
    out.total_return += r;
    out.states.push_back(next);
    x = std::move(next);
  }
  return out;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  if (data.empty()) throw DataError("cannot write an empty dataset");
  const auto& first = data.transitions.front();
  std::vector<std::string> header{"h"};
  for (int i = 0; i < first.x.size(); ++i) header.push_back("x_" + std::to_string(i + 1));
  header.push_back("a_1");
  for (int i = 0; i < first.z.size(); ++i) header.push_back("z_" + std::to_string(i + 1));
  for (int i = 0; i < first.x_next.size(); ++i) header.push_back("xn_" + std::to_string(i + 1));
  csv::write_row(out, header);
  for (const auto& tr : data.transitions) {
    std::vector<std::string> row{std::to_string(tr.h)};
    for (int i = 0; i < tr.x.size(); ++i) row.push_back(csv::format(tr.x[i]));
    row.push_back(csv::format(tr.a));
    for (int i = 0; i < tr.z.size(); ++i) row.push_back(csv::format(tr.z[i]));
    for (int i = 0; i < tr.x_next.size(); ++i) row.push_back(csv::format(tr.x_next[i]));
    csv::write_row(out, row);
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset CSV is empty");
  const auto header = csv::split(line);
  int dx = 0, dz = 0, dxn = 0, da = 0;
  for (const auto& name : header) {
    if (name.rfind("xn_", 0) == 0) ++dxn;
    else if (name.rfind("x_", 0) == 0) ++dx;
    else if (name.rfind("z_", 0) == 0) ++dz;
    else if (name.rfind("a_", 0) == 0) ++da;
  }
  if (header.empty() || header[0] != "h" || dx == 0 || da != 1 || dxn != dx) {
    throw DataError("dataset CSV header is malformed");
  }
  Dataset data;
  int max_h = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    if (static_cast<int>(cells.size()) != 2 + dx + dz + dxn) {
      throw DataError("dataset CSV row has " + std::to_string(cells.size()) + " cells");
    }
    Transition tr;
    std::size_t c = 0;
    tr.h = std::stoi(cells[c++]);
    tr.x.resize(dx);
    for (int i = 0; i < dx; ++i) tr.x[i] = std::stod(cells[c++]);
    tr.a = std::stod(cells[c++]);
    tr.z.resize(dz);
    for (int i = 0; i < dz; ++i) tr.z[i] = std::stod(cells[c++]);
    tr.x_next.resize(dxn);
    for (int i = 0; i < dxn; ++i) tr.x_next[i] = std::stod(cells[c++]);
    max_h = std::max(max_h, tr.h);
    data.transitions.push_back(std::move(tr));
  }
  data.horizon = max_h;
  data.n_episodes = max_h > 0 ? static_cast<int>(data.transitions.size()) / max_h : 0;
  return data;
}

}  // namespace ivvi
