#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivvi/analytic_instance.hpp"
#include "ivvi/cmdp_env.hpp"
#include "ivvi/feature_maps.hpp"
#include "ivvi/planner.hpp"
#include "ivvi/sgda.hpp"

namespace ivvi {

inline constexpr int kSummarySchemaVersion = 1;

struct FeatureSpec {
  FeatureKind kind = FeatureKind::kIdentityAffine;
  int dim = 1;
  std::uint64_t seed = 0;
};

/// Environment section of a config.
struct InstanceConfig {
  int state_dim = 1;
  int horizon = 1;
  double sigma = 0.1;
  Box state_box;
  Box init_box;
  Interval action_bounds{-1.0, 1.0};
  Box instrument_box;
  InstrumentDistribution z_dist = InstrumentDistribution::kUniform;
  FeatureSpec dynamics;
  Matrix w_star;             // as given in the file
  bool w_star_raw = false;   // coefficients on unnormalized dynamics features
  BehaviorPolicy behavior;
  RewardSpec reward;

  CmdpIvModel model() const;
  /// Closed-form description when the instance matches the analytic family.
  std::optional<AnalyticInstance> analytic(const FeatureSpec& primal, const FeatureSpec& dual,
                                           bool dual_includes_state) const;
};

struct EstimatorConfig {
  std::vector<long long> T;
  SamplingMode sampling = SamplingMode::kShuffled;
  std::optional<long long> n_episodes;  // default: enough episodes for max T
  ScheduleMode mode = ScheduleMode::kManual;
  ScheduleOverrides overrides;
  bool mu_from_data = false;  // schedule uses estimated rather than reference mu values
  std::optional<double> checkpoint_start;
  double fit_lo = 1e3;
  double fit_hi = 1e5;
};

struct EvaluationConfig {
  std::vector<int> grid_counts;
  int action_count = 21;
  int n_mc = 200;
  Interpolation interpolation = Interpolation::kMultilinear;
  int star_refine = 1;  // the W* plan uses grids refined by this factor
  int n_rollouts = 500;
  int init_count = 5;   // evaluated x1 per axis, uniform over the init box
  long long truth_episodes = 200000;
  long long n_eval = 100000;
};

/// Behavior or dual-feature changes applied per level of a sweep.
struct SweepLevel {
  std::string label;
  std::optional<double> c_z;
  std::optional<double> c_e;
  std::optional<double> action_noise_std;
  std::optional<int> dual_dim;
};

struct AuditConfig {
  long long shift_trials = 100000;
  int shift_n_mc = 64;
  int shift_dim = 2;
  int d1_instances = 20;
  int d1_rollouts = 400;
  double d1_perturbation = 0.5;  // max entrywise perturbation of W*, relative
};

struct ExperimentConfig {
  std::string experiment;
  std::filesystem::path output_dir;
  std::vector<std::uint64_t> seeds;
  int threads = 0;  // 0: hardware concurrency
  InstanceConfig instance;
  FeatureSpec primal;
  FeatureSpec dual;
  bool dual_includes_state = true;
  EstimatorConfig estimator;
  EvaluationConfig evaluation;
  std::vector<SweepLevel> levels;
  double weak_iv_threshold = 1e-6;
  AuditConfig audits;
  nlohmann::json raw;

  FeatureMap feature_map() const;
};

/// Names accepted in the "experiment" field.
const std::vector<std::string>& list_experiments();

/// Throws InvalidArgument with the offending field path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;
  std::uint64_t seed_offset = 0;
  std::optional<int> threads;
  bool write_files = true;
};

/// Runs the named experiment and returns the summary that is also written to
/// summary.json. Output files go to a staging directory that replaces
/// output_dir only on success.
nlohmann::json run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace ivvi
