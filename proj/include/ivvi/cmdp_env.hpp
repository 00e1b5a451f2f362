#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ivvi/feature_maps.hpp"
#include "ivvi/types.hpp"

namespace ivvi {

/// r_h(x, a) for h in 1..H. Must map into [0, 1].
using RewardFn = std::function<double(int h, const Vector& x, double a)>;

/// Evaluation-time policy (h, x) -> a. It sees neither the instrument nor the
/// confounder.
using Policy = std::function<double(int h, const Vector& x)>;

/// Parametric reward families the experiment configs can name.
struct RewardSpec {
  enum class Kind { kConstant, kTarget };
  Kind kind = Kind::kConstant;
  double value = 1.0;          // kConstant
  Vector target;               // kTarget: 1 - |x - target|^2 / width^2 - cost a^2, clipped
  double width = 1.0;
  double action_cost = 0.0;

  RewardFn make() const;
};

/// Linear-Gaussian behavior policy
///   a = clamp(c0 + c_x.x + c_z.z + c_e * e_1 + noise, action_bounds).
/// The confounder reaches the action only through its first coordinate.
struct BehaviorPolicy {
  double c0 = 0.0;
  Vector c_x;
  Vector c_z;
  double c_e = 0.0;
  double action_noise_std = 0.0;
  Interval action_bounds{-1.0, 1.0};

  bool instrument_relevant() const { return c_z.size() > 0 && c_z.cwiseAbs().maxCoeff() > 0.0; }
  double act(const Vector& x, const Vector& z, const Vector& e, double noise) const;
};

enum class InstrumentDistribution { kUniform, kGaussian };

/// Ground-truth environment. The true transition is
///   x' = W* phi_true(x, a) + e,  e ~ N(0, sigma^2 I),
/// with phi_true the model's own dynamics basis (which need not equal the
/// features an estimator fits).
struct CmdpIvModel {
  Matrix w_star;
  FeatureBasis dynamics_features;
  double sigma = 0.1;
  int horizon = 1;
  RewardFn reward;
  Box init_box;         // xi_0 = uniform on this box
  Box instrument_box;   // support of P_z
  InstrumentDistribution z_dist = InstrumentDistribution::kUniform;
  BehaviorPolicy behavior;

  int state_dim() const { return static_cast<int>(w_star.rows()); }
  int instrument_dim() const { return static_cast<int>(instrument_box.size()); }
  /// F*(x, a).
  Vector mean_next(const Vector& x, double a) const;
  Vector sample_init(Rng& rng) const;
  Vector sample_instrument(Rng& rng) const;
  /// Throws InvalidArgument when dimensions disagree or sigma <= 0.
  void validate() const;
};

struct Transition {
  Vector x;
  double a = 0.0;
  Vector z;
  Vector x_next;
  int h = 1;
};

struct Dataset {
  std::vector<Transition> transitions;
  int n_episodes = 0;
  int horizon = 0;
  std::uint64_t seed = 0;

  bool empty() const { return transitions.empty(); }
  std::size_t size() const { return transitions.size(); }
};

/// One step of the confounded data-collection dynamics. The innovation that
/// drives the action is the same one added to the next state.
Transition step_offline(const CmdpIvModel& model, const Vector& x, Rng& rng);

/// n_episodes full episodes from x_1 ~ xi_0, recorded in order.
Dataset collect_offline_dataset(const CmdpIvModel& model, int n_episodes, std::uint64_t seed);

enum class SamplingMode { kWithReplacement, kShuffled };

/// Draws transitions from a dataset: uniformly with replacement (an i.i.d.
/// proxy for the average visitation distribution) or as one shuffled pass.
/// The dataset must outlive the stream.
class TransitionStream {
 public:
  TransitionStream(const Dataset& data, SamplingMode mode, Rng rng);

  /// Throws DataError once a shuffled pass is exhausted.
  const Transition& next();
  SamplingMode mode() const { return mode_; }

 private:
  const Dataset* data_;
  SamplingMode mode_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct Rollout {
  std::vector<Vector> states;  // x_1 .. x_{H+1}
  std::vector<double> actions;  // a_1 .. a_H
  std::vector<double> rewards;
  double total_return = 0.0;
};

/// Simulates H steps of the evaluation (intervened) dynamics under the true
/// model.
Rollout rollout_evaluation(const CmdpIvModel& model, const Policy& policy, const Vector& x1,
                           Rng& rng);

/// CSV with header h,x_1..,a_1,z_1..,xn_1..; 17 significant digits.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in);

}  // namespace ivvi
