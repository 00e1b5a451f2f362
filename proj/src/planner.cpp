#include "ivvi/planner.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "ivvi/csv.hpp"
#include "ivvi/errors.hpp"

namespace ivvi {

std::string_view to_string(Interpolation interp) {
  return interp == Interpolation::kMultilinear ? "multilinear" : "nearest";
}

Interpolation parse_interpolation(std::string_view name) {
  if (name == "multilinear") return Interpolation::kMultilinear;
  if (name == "nearest") return Interpolation::kNearest;
  throw InvalidArgument("unknown interpolation '" + std::string(name) +
                        "' (expected multilinear or nearest)");
}

// ---------------------------------------------------------------- StateGrid

StateGrid::StateGrid(std::vector<std::vector<double>> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw InvalidArgument("state grid needs at least one axis");
  strides_.assign(axes_.size(), 1);
  size_ = 1;
  for (int d = dim() - 1; d >= 0; --d) {
    const auto& ax = axes_[d];
    if (ax.empty()) throw InvalidArgument("state grid axis is empty");
    for (std::size_t i = 0; i < ax.size(); ++i) {
      if (!std::isfinite(ax[i])) throw InvalidArgument("state grid node is not finite");
      if (i && !(ax[i] > ax[i - 1])) throw InvalidArgument("state grid axis must be increasing");
    }
    strides_[d] = size_;
    size_ *= ax.size();
  }
}

StateGrid StateGrid::uniform(const Box& box, const std::vector<int>& counts) {
  if (box.size() != counts.size()) throw InvalidArgument("grid box and counts differ in size");
  std::vector<std::vector<double>> axes;
  for (std::size_t d = 0; d < box.size(); ++d) {
    if (counts[d] < 1) throw InvalidArgument("grid counts must be >= 1");
    std::vector<double> ax(counts[d]);
    if (counts[d] == 1) {
      ax[0] = 0.5 * (box[d].lo + box[d].hi);
    } else {
      for (int i = 0; i < counts[d]; ++i)
        ax[i] = box[d].lo + box[d].width() * static_cast<double>(i) / (counts[d] - 1);
      ax.back() = box[d].hi;
    }
    axes.push_back(std::move(ax));
  }
  return StateGrid(std::move(axes));
}

Box StateGrid::box() const {
  Box b;
  for (const auto& ax : axes_) b.push_back({ax.front(), ax.back()});
  return b;
}

Vector StateGrid::node(std::size_t flat) const {
  Vector x(dim());
  for (int d = 0; d < dim(); ++d) {
    x[d] = axes_[d][flat / strides_[d]];
    flat %= strides_[d];
  }
  return x;
}

double StateGrid::interpolate(std::span<const double> values, const Vector& x,
                              Interpolation interp) const {
  if (values.size() != size_) throw InvalidArgument("value array does not match the grid");
  if (x.size() != dim()) throw InvalidArgument("state has the wrong dimension for the grid");
  if (interp == Interpolation::kNearest) return values[nearest(x)];

  // Cell lower index and weight of the upper neighbour, per axis.
  constexpr int kMaxDim = 8;
  if (dim() > kMaxDim) throw InvalidArgument("multilinear interpolation supports up to 8 axes");
  std::size_t base = 0;
  std::size_t step[kMaxDim];
  double frac[kMaxDim];
  for (int d = 0; d < dim(); ++d) {
    const auto& ax = axes_[d];
    const double v = std::clamp(x[d], ax.front(), ax.back());
    if (ax.size() == 1) {
      step[d] = 0;
      frac[d] = 0.0;
      continue;
    }
    std::size_t i = static_cast<std::size_t>(std::upper_bound(ax.begin(), ax.end(), v) - ax.begin());
    i = std::clamp<std::size_t>(i, 1, ax.size() - 1) - 1;
    base += i * strides_[d];
    step[d] = strides_[d];
    frac[d] = (v - ax[i]) / (ax[i + 1] - ax[i]);
  }
  if (dim() == 1) return (1.0 - frac[0]) * values[base] + frac[0] * values[base + step[0]];
  double out = 0.0;
  for (unsigned corner = 0; corner < (1u << dim()); ++corner) {
    double w = 1.0;
    std::size_t idx = base;
    for (int d = 0; d < dim(); ++d) {
      if (corner & (1u << d)) {
        w *= frac[d];
        idx += step[d];
      } else {
        w *= 1.0 - frac[d];
      }
    }
    if (w != 0.0) out += w * values[idx];
  }
  return out;
}

std::size_t StateGrid::nearest(const Vector& x) const {
  if (x.size() != dim()) throw InvalidArgument("state has the wrong dimension for the grid");
  std::size_t flat = 0;
  for (int d = 0; d < dim(); ++d) {
    const auto& ax = axes_[d];
    const double v = std::clamp(x[d], ax.front(), ax.back());
    std::size_t i = static_cast<std::size_t>(std::lower_bound(ax.begin(), ax.end(), v) - ax.begin());
    if (i == ax.size()) i = ax.size() - 1;
    if (i > 0 && v - ax[i - 1] <= ax[i] - v) --i;
    flat += i * strides_[d];
  }
  return flat;
}

double ValueGrid::value(int h, const Vector& x) const {
  if (h < 1 || h > horizon() + 1) throw InvalidArgument("step index out of range");
  return grid.interpolate(values[h - 1], x, interpolation);
}

double policy_lookup(const PolicyTable& table, int h, const Vector& x) {
  if (h < 1 || h > table.horizon()) throw InvalidArgument("step index out of range");
  return table.action(h, table.grid.nearest(x));
}

// ----------------------------------------------------------- GaussianBackup

GaussianBackup::GaussianBackup(int state_dim, int n_mc, Rng& rng) {
  if (n_mc < 1) throw InvalidArgument("n_mc must be >= 1");
  if (state_dim < 1) throw InvalidArgument("state_dim must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  draws_.resize(n_mc, state_dim);
  for (int k = 0; k < n_mc; ++k)
    for (int d = 0; d < state_dim; ++d) draws_(k, d) = normal(rng);
}

McEstimate GaussianBackup::operator()(const StateGrid& grid, std::span<const double> next_values,
                                      Interpolation interp, const Vector& mean,
                                      double sigma) const {
  if (mean.size() != draws_.cols()) throw InvalidArgument("backup mean has the wrong dimension");
  const int n = n_mc();
  // Welford's update keeps the variance exact for constant integrands.
  double mean_acc = 0.0, m2 = 0.0;
  Vector x(mean.size());
  for (int k = 0; k < n; ++k) {
    for (Eigen::Index d = 0; d < x.size(); ++d) x[d] = mean[d] + sigma * draws_(k, d);
    const double v = grid.interpolate(next_values, x, interp);
    const double delta = v - mean_acc;
    mean_acc += delta / (k + 1);
    m2 += delta * (v - mean_acc);
  }
  McEstimate out;
  out.mean = mean_acc;
  if (n > 1) out.se = std::sqrt(std::max(0.0, m2) / (n - 1) / n);
  return out;
}

McEstimate gaussian_backup(const StateGrid& grid, std::span<const double> next_values,
                           Interpolation interp, const Vector& mean, double sigma, int n_mc,
                           Rng& rng) {
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be > 0");
  GaussianBackup b(static_cast<int>(mean.size()), n_mc, rng);
  return b(grid, next_values, interp, mean, sigma);
}

// --------------------------------------------------------------------- Plan

Plan::Plan(ValueGrid values, PolicyTable policy, Matrix w, PlannerModel model,
           FeatureBasis features, PlannerOptions options, std::vector<GaussianBackup> backups)
    : values_(std::move(values)),
      policy_(std::move(policy)),
      w_(std::move(w)),
      model_(std::move(model)),
      features_(std::move(features)),
      options_(options),
      backups_(std::move(backups)) {}

double Plan::backup(int h, const Vector& mean) const {
  const auto& next = values_.values[h];  // V_{h+1}
  if (options_.backup == BackupMode::kDegenerate)
    return values_.grid.interpolate(next, mean, values_.interpolation);
  return backups_[h - 1](values_.grid, next, values_.interpolation, mean, model_.sigma).mean;
}

double Plan::q_value(int h, const Vector& x, double a) const {
  if (h < 1 || h > horizon()) throw InvalidArgument("step index out of range");
  Vector u(x.size() + 1);
  u.head(x.size()) = x;
  u[x.size()] = a;
  return model_.reward(h, x, a) + backup(h, w_ * features_.evaluate(u));
}

std::vector<double> Plan::q_row(int h, const Vector& x) const {
  std::vector<double> q(action_grid().size());
  for (std::size_t j = 0; j < q.size(); ++j) q[j] = q_value(h, x, action_grid()[j]);
  return q;
}

namespace {
int argmax_lowest(const std::vector<double>& q) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(q.size()); ++j)
    if (q[j] > q[best]) best = j;
  return best;
}
}  // namespace

int Plan::greedy_index(int h, const Vector& x) const { return argmax_lowest(q_row(h, x)); }

double Plan::greedy_value(int h, const Vector& x) const {
  if (h == horizon() + 1) return 0.0;
  const auto q = q_row(h, x);
  return q[argmax_lowest(q)];
}

Policy Plan::table_policy() const {
  return [this](int h, const Vector& x) { return policy_lookup(policy_, h, x); };
}

Policy Plan::greedy_policy() const {
  return [this](int h, const Vector& x) { return action_grid()[greedy_index(h, x)]; };
}

Plan value_iteration(const Matrix& w, const PlannerModel& model, const FeatureBasis& features,
                     const StateGrid& grid, const std::vector<double>& action_grid,
                     const PlannerOptions& options, Rng& rng) {
  if (action_grid.empty()) throw InvalidArgument("action grid is empty");
  if (!w.allFinite()) throw InvalidArgument("W passed to value iteration is not finite");
  if (model.horizon < 1) throw InvalidArgument("horizon must be >= 1");
  if (!(model.sigma > 0.0)) throw InvalidArgument("sigma must be > 0");
  if (!model.reward) throw InvalidArgument("planner model has no reward");
  if (w.rows() != grid.dim() || w.cols() != features.output_dim() ||
      features.input_dim() != grid.dim() + 1)
    throw InvalidArgument("W, feature basis and state grid dimensions disagree");
  if (options.backup == BackupMode::kMonteCarlo && options.n_mc < 1)
    throw InvalidArgument("n_mc must be >= 1");

  const int H = model.horizon;
  ValueGrid values{grid, options.interpolation,
                   std::vector<std::vector<double>>(H + 1, std::vector<double>(grid.size(), 0.0))};
  PolicyTable policy{grid, action_grid,
                     std::vector<std::vector<int>>(H, std::vector<int>(grid.size(), 0))};

  // Draws for every step, generated up front from h = H down to 1 so the
  // stream does not depend on the grid sizes.
  std::vector<GaussianBackup> backups;
  if (options.backup == BackupMode::kMonteCarlo) {
    std::vector<GaussianBackup> reversed;
    for (int h = H; h >= 1; --h) reversed.emplace_back(grid.dim(), options.n_mc, rng);
    backups.assign(std::make_move_iterator(reversed.rbegin()),
                   std::make_move_iterator(reversed.rend()));
  }
  Plan plan(std::move(values), std::move(policy), w, model, features, options, std::move(backups));

  // Fill V_h, pi_h in place; q_row at step h only reads V_{h+1}.
  auto& v = plan.values_;
  auto& pi = plan.policy_;
  for (int h = H; h >= 1; --h) {
    for (std::size_t n = 0; n < grid.size(); ++n) {
      const auto q = plan.q_row(h, grid.node(n));
      const int best = argmax_lowest(q);
      pi.action_index[h - 1][n] = best;
      v.values[h - 1][n] = q[best];
    }
  }
  return plan;
}

std::vector<double> uniform_action_grid(const Interval& bounds, int count) {
  if (count < 1) throw InvalidArgument("action grid count must be >= 1");
  if (count == 1) return {0.5 * (bounds.lo + bounds.hi)};
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i) g[i] = bounds.lo + bounds.width() * i / (count - 1);
  g.back() = bounds.hi;
  return g;
}

void write_plan_csv(std::ostream& out, const Plan& plan) {
  const StateGrid& grid = plan.values().grid;
  std::vector<std::string> header{"h"};
  for (int d = 0; d < grid.dim(); ++d) header.push_back("x_" + std::to_string(d + 1));
  header.push_back("value");
  header.push_back("action");
  csv::write_row(out, header);
  for (int h = 1; h <= plan.horizon() + 1; ++h) {
    for (std::size_t n = 0; n < grid.size(); ++n) {
      std::vector<std::string> row{std::to_string(h)};
      const Vector x = grid.node(n);
      for (int d = 0; d < grid.dim(); ++d) row.push_back(csv::format(x[d]));
      row.push_back(csv::format(plan.values().values[h - 1][n]));
      row.push_back(h <= plan.horizon() ? csv::format(plan.policy().action(h, n)) : "");
      csv::write_row(out, row);
    }
  }
}

}  // namespace ivvi
