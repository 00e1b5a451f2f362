#pragma once

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "ivvi/cmdp_env.hpp"
#include "ivvi/feature_maps.hpp"
#include "ivvi/stats.hpp"
#include "ivvi/types.hpp"

namespace ivvi {

enum class Interpolation { kMultilinear, kNearest };

std::string_view to_string(Interpolation interp);
Interpolation parse_interpolation(std::string_view name);

/// Tensor-product grid. Nodes are flattened lexicographically with the last
/// coordinate varying fastest.
class StateGrid {
 public:
  /// Each axis must be nonempty and strictly increasing.
  explicit StateGrid(std::vector<std::vector<double>> axes);
  static StateGrid uniform(const Box& box, const std::vector<int>& counts);

  int dim() const { return static_cast<int>(axes_.size()); }
  std::size_t size() const { return size_; }
  const std::vector<double>& axis(int d) const { return axes_[d]; }
  Box box() const;
  Vector node(std::size_t flat) const;

  /// Interpolates node values at x (clamped to the box first).
  double interpolate(std::span<const double> values, const Vector& x, Interpolation interp) const;
  /// Nearest node after clamping; equidistant candidates resolve to the lower
  /// index.
  std::size_t nearest(const Vector& x) const;

 private:
  std::vector<std::vector<double>> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// V_h on the grid for h = 1..H+1 (values[h-1]); V_{H+1} = 0.
struct ValueGrid {
  StateGrid grid;
  Interpolation interpolation = Interpolation::kMultilinear;
  std::vector<std::vector<double>> values;

  int horizon() const { return static_cast<int>(values.size()) - 1; }
  double value(int h, const Vector& x) const;
};

/// Greedy action index per step and node; actions come from `action_grid`.
struct PolicyTable {
  StateGrid grid;
  std::vector<double> action_grid;
  std::vector<std::vector<int>> action_index;  // [h-1][node]

  int horizon() const { return static_cast<int>(action_index.size()); }
  double action(int h, std::size_t node) const { return action_grid[action_index[h - 1][node]]; }
};

/// Action of the nearest node to x (clamped to the grid box).
double policy_lookup(const PolicyTable& table, int h, const Vector& x);

/// A fixed block of standard-normal draws reused for every (x, a) of one
/// backup sweep. Each backup shifts the same draws by its own mean.
class GaussianBackup {
 public:
  GaussianBackup(int state_dim, int n_mc, Rng& rng);

  int n_mc() const { return static_cast<int>(draws_.rows()); }
  const Matrix& draws() const { return draws_; }

  /// Mean of V(clamp(mean + sigma * eps_k)) over the stored draws, with its
  /// standard error.
  McEstimate operator()(const StateGrid& grid, std::span<const double> next_values,
                        Interpolation interp, const Vector& mean, double sigma) const;

 private:
  Matrix draws_;  // n_mc x d_x
};

/// One-off backup with fresh draws.
McEstimate gaussian_backup(const StateGrid& grid, std::span<const double> next_values,
                           Interpolation interp, const Vector& mean, double sigma, int n_mc,
                           Rng& rng);

struct PlannerModel {
  double sigma = 0.1;
  RewardFn reward;
  int horizon = 1;
};

/// kDegenerate replaces the Gaussian integral by V(clamp(mean)), i.e. a
/// deterministic transition to the model mean.
enum class BackupMode { kMonteCarlo, kDegenerate };

struct PlannerOptions {
  int n_mc = 200;
  Interpolation interpolation = Interpolation::kMultilinear;
  BackupMode backup = BackupMode::kMonteCarlo;
};

class Plan;
Plan value_iteration(const Matrix& w, const PlannerModel& model, const FeatureBasis& features,
                     const StateGrid& grid, const std::vector<double>& action_grid,
                     const PlannerOptions& options, Rng& rng);

/// Output of value iteration under P_W for one W. Q_h(x, a) is defined for
/// every state, not just grid nodes, as r_h(x, a) plus the step-h backup of
/// the interpolated V_{h+1}; the step-h draws are kept so that repeated
/// evaluations are deterministic.
class Plan {
 public:
  Plan(ValueGrid values, PolicyTable policy, Matrix w, PlannerModel model, FeatureBasis features,
       PlannerOptions options, std::vector<GaussianBackup> backups);

  const ValueGrid& values() const { return values_; }
  const PolicyTable& policy() const { return policy_; }
  const Matrix& w() const { return w_; }
  const PlannerModel& model() const { return model_; }
  int horizon() const { return model_.horizon; }
  const std::vector<double>& action_grid() const { return policy_.action_grid; }

  double q_value(int h, const Vector& x, double a) const;
  /// Q_h(x, a) for every action on the grid.
  std::vector<double> q_row(int h, const Vector& x) const;
  /// argmax of q_row (lowest index on ties).
  int greedy_index(int h, const Vector& x) const;
  /// max_a Q_h(x, a); 0 for h = H + 1.
  double greedy_value(int h, const Vector& x) const;

  /// The stored table, extended off-grid by nearest node. The returned
  /// policies refer to this plan, which must stay alive and in place.
  Policy table_policy() const;
  /// argmax_a Q_h(x, a) evaluated at x itself.
  Policy greedy_policy() const;

 private:
  friend Plan value_iteration(const Matrix&, const PlannerModel&, const FeatureBasis&,
                              const StateGrid&, const std::vector<double>&,
                              const PlannerOptions&, Rng&);
  double backup(int h, const Vector& mean) const;

  ValueGrid values_;
  PolicyTable policy_;
  Matrix w_;
  PlannerModel model_;
  FeatureBasis features_;
  PlannerOptions options_;
  std::vector<GaussianBackup> backups_;  // [h-1]
};

/// Backward induction h = H..1 over state and action grids with mean
/// dynamics W phi(x, a). Throws InvalidArgument on empty grids or a
/// non-finite W.
Plan value_iteration(const Matrix& w, const PlannerModel& model, const FeatureBasis& features,
                     const StateGrid& grid, const std::vector<double>& action_grid,
                     const PlannerOptions& options, Rng& rng);

/// Uniform action grid with `count` nodes over the interval.
std::vector<double> uniform_action_grid(const Interval& bounds, int count);

/// Columns h, x_1.., value, action (action is empty at h = H + 1).
void write_plan_csv(std::ostream& out, const Plan& plan);

}  // namespace ivvi
