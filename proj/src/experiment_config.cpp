#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ivvi/errors.hpp"
#include "ivvi/experiment.hpp"

namespace ivvi {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw InvalidArgument("config field '" + path + "': " + msg);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void reject_unknown(const json& obj, const std::string& path, std::set<std::string> known) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key())) fail(join(path, it.key()), "unknown field");
}

const json& object_at(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) fail(join(path, key), "missing");
  const json& v = obj.at(key);
  if (!v.is_object()) fail(join(path, key), "must be an object");
  return v;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "must be finite");
  return d;
}

double number(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) fail(join(path, key), "missing");
  return as_number(obj.at(key), join(path, key));
}

double number_or(const json& obj, const std::string& key, const std::string& path, double dflt) {
  return obj.contains(key) ? as_number(obj.at(key), join(path, key)) : dflt;
}

std::optional<double> number_opt(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) return std::nullopt;
  return as_number(obj.at(key), join(path, key));
}

long long as_integer(const json& v, const std::string& path) {
  const double d = as_number(v, path);
  if (d != std::floor(d) || std::abs(d) > 9.0e15) fail(path, "must be an integer");
  return static_cast<long long>(d);
}

long long integer_or(const json& obj, const std::string& key, const std::string& path,
                     long long dflt) {
  return obj.contains(key) ? as_integer(obj.at(key), join(path, key)) : dflt;
}

std::string string_or(const json& obj, const std::string& key, const std::string& path,
                      const std::string& dflt) {
  if (!obj.contains(key)) return dflt;
  if (!obj.at(key).is_string()) fail(join(path, key), "must be a string");
  return obj.at(key).get<std::string>();
}

bool bool_or(const json& obj, const std::string& key, const std::string& path, bool dflt) {
  if (!obj.contains(key)) return dflt;
  if (!obj.at(key).is_boolean()) fail(join(path, key), "must be true or false");
  return obj.at(key).get<bool>();
}

Vector vector_at(const json& obj, const std::string& key, const std::string& path) {
  const std::string p = join(path, key);
  if (!obj.contains(key)) fail(p, "missing");
  const json& v = obj.at(key);
  if (v.is_number()) return Vector::Constant(1, as_number(v, p));
  if (!v.is_array()) fail(p, "must be a number or an array of numbers");
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = as_number(v[i], p + "[" + std::to_string(i) + "]");
  return out;
}

Interval interval(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) fail(path, "must be a [lo, hi] pair");
  Interval iv{as_number(v[0], path + "[0]"), as_number(v[1], path + "[1]")};
  if (!(iv.hi > iv.lo)) fail(path, "needs lo < hi");
  return iv;
}

Box box_at(const json& obj, const std::string& key, const std::string& path) {
  const std::string p = join(path, key);
  if (!obj.contains(key)) fail(p, "missing");
  const json& v = obj.at(key);
  if (!v.is_array() || v.empty()) fail(p, "must be a nonempty list of [lo, hi] pairs");
  Box b;
  for (std::size_t i = 0; i < v.size(); ++i) b.push_back(interval(v[i], p + "[" + std::to_string(i) + "]"));
  return b;
}

Matrix matrix_at(const json& obj, const std::string& key, const std::string& path) {
  const std::string p = join(path, key);
  if (!obj.contains(key)) fail(p, "missing");
  const json& v = obj.at(key);
  if (!v.is_array() || v.empty()) fail(p, "must be a nonempty list of rows");
  // A flat list is a single row.
  if (!v[0].is_array()) {
    Vector row = vector_at(obj, key, path);
    return row.transpose();
  }
  const std::size_t cols = v[0].size();
  Matrix m(v.size(), cols);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string pi = p + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != cols) fail(pi, "rows must have equal length");
    for (std::size_t j = 0; j < cols; ++j)
      m(i, j) = as_number(v[i][j], pi + "[" + std::to_string(j) + "]");
  }
  return m;
}

FeatureSpec feature_spec(const json& obj, const std::string& key, const std::string& path) {
  const json& f = object_at(obj, key, path);
  const std::string p = join(path, key);
  reject_unknown(f, p, {"kind", "dim", "seed"});
  FeatureSpec s;
  try {
    s.kind = parse_feature_kind(string_or(f, "kind", p, "identity-affine"));
  } catch (const InvalidArgument& e) {
    fail(join(p, "kind"), e.what());
  }
  s.dim = static_cast<int>(integer_or(f, "dim", p, -1));
  if (s.dim < 1) fail(join(p, "dim"), "must be an integer >= 1");
  const long long seed = integer_or(f, "seed", p, 0);
  if (seed < 0) fail(join(p, "seed"), "must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);
  return s;
}

InstanceConfig parse_instance(const json& root) {
  const std::string p = "instance";
  const json& j = object_at(root, "instance", "");
  reject_unknown(j, p, {"state_dim", "horizon", "sigma", "state_box", "init_box", "action_bounds",
                        "instrument_box", "instrument_distribution", "dynamics", "behavior",
                        "reward"});
  InstanceConfig c;
  c.state_dim = static_cast<int>(integer_or(j, "state_dim", p, 1));
  if (c.state_dim < 1) fail("instance.state_dim", "must be >= 1");
  c.horizon = static_cast<int>(integer_or(j, "horizon", p, 1));
  if (c.horizon < 1) fail("instance.horizon", "must be >= 1");
  c.sigma = number(j, "sigma", p);
  if (!(c.sigma > 0.0)) fail("instance.sigma", "must be > 0");
  c.state_box = box_at(j, "state_box", p);
  if (static_cast<int>(c.state_box.size()) != c.state_dim)
    fail("instance.state_box", "needs one interval per state coordinate");
  c.init_box = j.contains("init_box") ? box_at(j, "init_box", p) : c.state_box;
  if (c.init_box.size() != c.state_box.size())
    fail("instance.init_box", "needs one interval per state coordinate");
  if (!j.contains("action_bounds")) fail("instance.action_bounds", "missing");
  c.action_bounds = interval(j.at("action_bounds"), "instance.action_bounds");
  c.instrument_box = box_at(j, "instrument_box", p);
  const std::string zd = string_or(j, "instrument_distribution", p, "uniform");
  if (zd == "uniform") {
    c.z_dist = InstrumentDistribution::kUniform;
  } else if (zd == "gaussian") {
    c.z_dist = InstrumentDistribution::kGaussian;
  } else {
    fail("instance.instrument_distribution", "must be uniform or gaussian");
  }

  const json& dyn = object_at(j, "dynamics", p);
  reject_unknown(dyn, "instance.dynamics", {"features", "w_star", "coefficients"});
  c.dynamics = feature_spec(dyn, "features", "instance.dynamics");
  c.w_star = matrix_at(dyn, "w_star", "instance.dynamics");
  if (c.w_star.rows() != c.state_dim) fail("instance.dynamics.w_star", "needs state_dim rows");
  if (c.w_star.cols() != c.dynamics.dim)
    fail("instance.dynamics.w_star", "needs one column per dynamics feature");
  const std::string coeff = string_or(dyn, "coefficients", "instance.dynamics", "normalized");
  if (coeff != "normalized" && coeff != "raw")
    fail("instance.dynamics.coefficients", "must be normalized or raw");
  c.w_star_raw = coeff == "raw";

  const json& beh = object_at(j, "behavior", p);
  const std::string pb = "instance.behavior";
  reject_unknown(beh, pb, {"c0", "c_x", "c_z", "c_e", "action_noise_std"});
  c.behavior.c0 = number_or(beh, "c0", pb, 0.0);
  c.behavior.c_x = beh.contains("c_x") ? vector_at(beh, "c_x", pb) : Vector::Zero(c.state_dim);
  if (c.behavior.c_x.size() != c.state_dim) fail("instance.behavior.c_x", "needs state_dim entries");
  c.behavior.c_z = vector_at(beh, "c_z", pb);
  if (c.behavior.c_z.size() != static_cast<Eigen::Index>(c.instrument_box.size()))
    fail("instance.behavior.c_z", "needs one entry per instrument coordinate");
  c.behavior.c_e = number_or(beh, "c_e", pb, 0.0);
  c.behavior.action_noise_std = number_or(beh, "action_noise_std", pb, 0.0);
  if (c.behavior.action_noise_std < 0.0) fail("instance.behavior.action_noise_std", "must be >= 0");
  c.behavior.action_bounds = c.action_bounds;

  if (j.contains("reward")) {
    const json& r = object_at(j, "reward", p);
    const std::string pr = "instance.reward";
    reject_unknown(r, pr, {"kind", "value", "target", "width", "action_cost"});
    const std::string kind = string_or(r, "kind", pr, "constant");
    if (kind == "constant") {
      c.reward.kind = RewardSpec::Kind::kConstant;
      c.reward.value = number_or(r, "value", pr, 1.0);
      if (c.reward.value < 0.0 || c.reward.value > 1.0) fail("instance.reward.value", "must lie in [0, 1]");
    } else if (kind == "target") {
      c.reward.kind = RewardSpec::Kind::kTarget;
      c.reward.target = vector_at(r, "target", pr);
      if (c.reward.target.size() != c.state_dim) fail("instance.reward.target", "needs state_dim entries");
      c.reward.width = number_or(r, "width", pr, 1.0);
      if (!(c.reward.width > 0.0)) fail("instance.reward.width", "must be > 0");
      c.reward.action_cost = number_or(r, "action_cost", pr, 0.0);
      if (c.reward.action_cost < 0.0) fail("instance.reward.action_cost", "must be >= 0");
    } else {
      fail("instance.reward.kind", "must be constant or target");
    }
  }
  return c;
}

EstimatorConfig parse_estimator(const json& root, bool optional_section) {
  const std::string p = "estimator";
  if (optional_section && !root.contains("estimator")) {
    EstimatorConfig e;
    e.T = {1};
    return e;
  }
  const json& j = object_at(root, "estimator", "");
  reject_unknown(j, p, {"T", "sampling", "n_episodes", "schedule", "checkpoint_start", "fit_range"});
  EstimatorConfig e;
  if (!j.contains("T")) fail("estimator.T", "missing");
  const json& t = j.at("T");
  if (t.is_array()) {
    if (t.empty()) fail("estimator.T", "must not be empty");
    for (std::size_t i = 0; i < t.size(); ++i)
      e.T.push_back(as_integer(t[i], "estimator.T[" + std::to_string(i) + "]"));
  } else {
    e.T.push_back(as_integer(t, "estimator.T"));
  }
  for (long long v : e.T)
    if (v < 1) fail("estimator.T", "every entry must be >= 1");
  const std::string sampling = string_or(j, "sampling", p, "shuffled");
  if (sampling == "shuffled") {
    e.sampling = SamplingMode::kShuffled;
  } else if (sampling == "with-replacement") {
    e.sampling = SamplingMode::kWithReplacement;
  } else {
    fail("estimator.sampling", "must be shuffled or with-replacement");
  }
  if (j.contains("n_episodes")) {
    e.n_episodes = as_integer(j.at("n_episodes"), "estimator.n_episodes");
    if (*e.n_episodes < 1) fail("estimator.n_episodes", "must be >= 1");
  }
  const json& s = object_at(j, "schedule", p);
  const std::string ps = "estimator.schedule";
  reject_unknown(s, ps, {"mode", "alpha", "beta", "gamma", "alpha_scale", "beta_scale",
                         "gamma_scale", "mu_source"});
  try {
    e.mode = parse_schedule_mode(string_or(s, "mode", ps, "theorem-constants"));
  } catch (const InvalidArgument& ex) {
    fail("estimator.schedule.mode", ex.what());
  }
  e.overrides.alpha = number_opt(s, "alpha", ps);
  e.overrides.beta = number_opt(s, "beta", ps);
  e.overrides.gamma = number_opt(s, "gamma", ps);
  e.overrides.alpha_scale = number_or(s, "alpha_scale", ps, 1.0);
  e.overrides.beta_scale = number_or(s, "beta_scale", ps, 1.0);
  e.overrides.gamma_scale = number_or(s, "gamma_scale", ps, 1.0);
  if (e.mode == ScheduleMode::kManual) {
    for (const char* k : {"alpha", "beta", "gamma"})
      if (!s.contains(k)) fail(join(ps, k), "required in manual mode");
  }
  for (const char* k : {"alpha", "beta", "alpha_scale", "beta_scale", "gamma_scale"})
    if (s.contains(k) && !(s.at(k).get<double>() > 0.0)) fail(join(ps, k), "must be > 0");
  if (s.contains("gamma") && s.at("gamma").get<double>() < 0.0) fail(join(ps, "gamma"), "must be >= 0");
  const std::string mu = string_or(s, "mu_source", ps, "reference");
  if (mu != "reference" && mu != "data") fail("estimator.schedule.mu_source", "must be reference or data");
  e.mu_from_data = mu == "data";
  e.checkpoint_start = number_opt(j, "checkpoint_start", p);
  if (e.checkpoint_start && !(*e.checkpoint_start >= 1.0))
    fail("estimator.checkpoint_start", "must be >= 1");
  if (j.contains("fit_range")) {
    const Interval fr = interval(j.at("fit_range"), "estimator.fit_range");
    if (!(fr.lo > 0.0)) fail("estimator.fit_range", "must be positive");
    e.fit_lo = fr.lo;
    e.fit_hi = fr.hi;
  }
  return e;
}

EvaluationConfig parse_evaluation(const json& root, int state_dim) {
  EvaluationConfig e;
  e.grid_counts.assign(state_dim, 41);
  if (!root.contains("evaluation")) return e;
  const std::string p = "evaluation";
  const json& j = object_at(root, "evaluation", "");
  reject_unknown(j, p, {"grid", "actions", "n_mc", "interpolation", "star_refine", "n_rollouts",
                        "init_points", "truth_episodes", "n_eval"});
  if (j.contains("grid")) {
    const Vector g = vector_at(j, "grid", p);
    if (g.size() != state_dim) fail("evaluation.grid", "needs one node count per state coordinate");
    for (int d = 0; d < state_dim; ++d) {
      if (g[d] < 1 || g[d] != std::floor(g[d])) fail("evaluation.grid", "counts must be integers >= 1");
      e.grid_counts[d] = static_cast<int>(g[d]);
    }
  }
  auto positive = [&](const char* key, long long dflt) {
    const long long v = integer_or(j, key, p, dflt);
    if (v < 1) fail(join(p, key), "must be an integer >= 1");
    return v;
  };
  e.action_count = static_cast<int>(positive("actions", e.action_count));
  e.n_mc = static_cast<int>(positive("n_mc", e.n_mc));
  e.star_refine = static_cast<int>(positive("star_refine", e.star_refine));
  e.n_rollouts = static_cast<int>(positive("n_rollouts", e.n_rollouts));
  e.init_count = static_cast<int>(positive("init_points", e.init_count));
  e.truth_episodes = positive("truth_episodes", e.truth_episodes);
  e.n_eval = positive("n_eval", e.n_eval);
  try {
    e.interpolation = parse_interpolation(string_or(j, "interpolation", p, "multilinear"));
  } catch (const InvalidArgument& ex) {
    fail("evaluation.interpolation", ex.what());
  }
  return e;
}

std::vector<SweepLevel> parse_levels(const json& root) {
  std::vector<SweepLevel> out;
  if (!root.contains("levels")) return out;
  const json& v = root.at("levels");
  if (!v.is_array()) fail("levels", "must be a list");
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = "levels[" + std::to_string(i) + "]";
    if (!v[i].is_object()) fail(p, "must be an object");
    reject_unknown(v[i], p, {"label", "c_z", "c_e", "action_noise_std", "dual_dim"});
    SweepLevel l;
    l.c_z = number_opt(v[i], "c_z", p);
    l.c_e = number_opt(v[i], "c_e", p);
    l.action_noise_std = number_opt(v[i], "action_noise_std", p);
    if (l.action_noise_std && *l.action_noise_std < 0.0) fail(p + ".action_noise_std", "must be >= 0");
    if (v[i].contains("dual_dim")) {
      l.dual_dim = static_cast<int>(as_integer(v[i].at("dual_dim"), p + ".dual_dim"));
      if (*l.dual_dim < 1) fail(p + ".dual_dim", "must be >= 1");
    }
    l.label = string_or(v[i], "label", p, "level-" + std::to_string(i + 1));
    out.push_back(l);
  }
  return out;
}

AuditConfig parse_audits(const json& root) {
  AuditConfig a;
  if (!root.contains("audits")) return a;
  const std::string p = "audits";
  const json& j = object_at(root, "audits", "");
  reject_unknown(j, p, {"shift_trials", "shift_n_mc", "shift_dim", "d1_instances", "d1_rollouts",
                        "d1_perturbation"});
  auto positive = [&](const char* key, long long dflt) {
    const long long v = integer_or(j, key, p, dflt);
    if (v < 1) fail(join(p, key), "must be an integer >= 1");
    return v;
  };
  a.shift_trials = positive("shift_trials", a.shift_trials);
  a.shift_n_mc = static_cast<int>(positive("shift_n_mc", a.shift_n_mc));
  if (a.shift_n_mc < 2) fail("audits.shift_n_mc", "must be >= 2");
  a.shift_dim = static_cast<int>(positive("shift_dim", a.shift_dim));
  a.d1_instances = static_cast<int>(positive("d1_instances", a.d1_instances));
  a.d1_rollouts = static_cast<int>(positive("d1_rollouts", a.d1_rollouts));
  if (a.d1_rollouts < 2) fail("audits.d1_rollouts", "must be >= 2");
  a.d1_perturbation = number_or(j, "d1_perturbation", p, a.d1_perturbation);
  if (a.d1_perturbation < 0.0) fail("audits.d1_perturbation", "must be >= 0");
  return a;
}

}  // namespace

const std::vector<std::string>& list_experiments() {
  static const std::vector<std::string> names{"rate-check",       "bias-demo",  "iv-strength-sweep",
                                              "misspecification", "end-to-end", "lemma-audits"};
  return names;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) fail("(root)", "config must be a JSON object");
  reject_unknown(j, "", {"experiment", "output_dir", "seeds", "threads", "instance", "features",
                         "estimator", "evaluation", "levels", "weak_iv_threshold", "audits"});
  ExperimentConfig c;
  c.raw = j;
  c.experiment = string_or(j, "experiment", "", "");
  const auto& names = list_experiments();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end())
    fail("experiment", "must be one of rate-check, bias-demo, iv-strength-sweep, "
                       "misspecification, end-to-end, lemma-audits");
  c.output_dir = string_or(j, "output_dir", "", "out/" + c.experiment);

  if (!j.contains("seeds")) fail("seeds", "missing");
  const json& s = j.at("seeds");
  if (s.is_array()) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const long long v = as_integer(s[i], "seeds[" + std::to_string(i) + "]");
      if (v < 0) fail("seeds[" + std::to_string(i) + "]", "must be >= 0");
      c.seeds.push_back(static_cast<std::uint64_t>(v));
    }
  } else if (s.is_object()) {
    reject_unknown(s, "seeds", {"first", "count"});
    const long long first = integer_or(s, "first", "seeds", 1);
    const long long count = integer_or(s, "count", "seeds", 0);
    if (first < 0) fail("seeds.first", "must be >= 0");
    for (long long i = 0; i < count; ++i) c.seeds.push_back(static_cast<std::uint64_t>(first + i));
  } else {
    fail("seeds", "must be a list or {first, count}");
  }
  if (c.seeds.empty()) fail("seeds", "must not be empty");
  c.threads = static_cast<int>(integer_or(j, "threads", "", 0));
  if (c.threads < 0) fail("threads", "must be >= 0");

  c.instance = parse_instance(j);
  const json& f = object_at(j, "features", "");
  reject_unknown(f, "features", {"primal", "dual", "dual_includes_state"});
  c.primal = feature_spec(f, "primal", "features");
  c.dual = feature_spec(f, "dual", "features");
  c.dual_includes_state = bool_or(f, "dual_includes_state", "features", true);
  c.estimator = parse_estimator(j, c.experiment == "lemma-audits");
  c.evaluation = parse_evaluation(j, c.instance.state_dim);
  c.levels = parse_levels(j);
  c.weak_iv_threshold = number_or(j, "weak_iv_threshold", "", c.weak_iv_threshold);
  if (!(c.weak_iv_threshold >= 0.0)) fail("weak_iv_threshold", "must be >= 0");
  c.audits = parse_audits(j);

  if ((c.experiment == "iv-strength-sweep" || c.experiment == "misspecification") && c.levels.empty())
    fail("levels", "this experiment needs at least one level");
  for (std::size_t i = 0; i < c.levels.size(); ++i)
    if (c.levels[i].c_z && c.instance.behavior.c_z.size() != 1)
      fail("levels[" + std::to_string(i) + "].c_z", "scalar override needs a one-dimensional instrument");

  // Build everything once so dimension errors surface here.
  try {
    c.instance.model();
    c.feature_map();
  } catch (const InvalidArgument& e) {
    fail("instance", e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

// ------------------------------------------------------------ model building

CmdpIvModel InstanceConfig::model() const {
  Box dyn_box = state_box;
  dyn_box.push_back(action_bounds);
  FeatureBasis basis = make_feature_map(dynamics.kind, state_dim + 1, dynamics.dim, dyn_box, dynamics.seed);
  Matrix w = w_star;
  if (w_star_raw) w /= basis.normalization();
  CmdpIvModel m{
      .w_star = w,
      .dynamics_features = std::move(basis),
      .sigma = sigma,
      .horizon = horizon,
      .reward = reward.make(),
      .init_box = init_box,
      .instrument_box = instrument_box,
      .z_dist = z_dist,
      .behavior = behavior,
  };
  m.validate();
  return m;
}

std::optional<AnalyticInstance> InstanceConfig::analytic(const FeatureSpec& primal,
                                                         const FeatureSpec& dual,
                                                         bool dual_includes_state) const {
  const auto unit = [](const Interval& iv) { return iv.lo == -1.0 && iv.hi == 1.0; };
  const bool match = state_dim == 1 && horizon == 1 && unit(state_box[0]) && unit(init_box[0]) &&
                     instrument_box.size() == 1 && unit(instrument_box[0]) &&
                     z_dist == InstrumentDistribution::kUniform &&
                     action_bounds.lo == -action_bounds.hi &&
                     dynamics.kind == FeatureKind::kIdentityAffine && dynamics.dim == 3 &&
                     primal.kind == FeatureKind::kIdentityAffine && primal.dim == 3 &&
                     dual.kind == FeatureKind::kIdentityAffine && dual.dim == 3 &&
                     dual_includes_state;
  if (!match) return std::nullopt;
  AnalyticInstance a;
  a.sigma = sigma;
  a.c0 = behavior.c0;
  a.cx = behavior.c_x[0];
  a.cz = behavior.c_z[0];
  a.ce = behavior.c_e;
  a.action_noise_std = behavior.action_noise_std;
  a.action_bound = action_bounds.hi;
  a.w_star = model().w_star.row(0).transpose();
  // The closed forms ignore clamping; require a wide margin.
  if (a.bound_margin_sigmas() < 5.0) return std::nullopt;
  return a;
}

FeatureMap ExperimentConfig::feature_map() const {
  Box pbox = instance.state_box;
  pbox.push_back(instance.action_bounds);
  Box dbox;
  if (dual_includes_state) dbox = instance.state_box;
  dbox.insert(dbox.end(), instance.instrument_box.begin(), instance.instrument_box.end());
  return FeatureMap(make_feature_map(primal.kind, static_cast<int>(pbox.size()), primal.dim, pbox, primal.seed),
                    make_feature_map(dual.kind, static_cast<int>(dbox.size()), dual.dim, dbox, dual.seed),
                    dual_includes_state);
}

}  // namespace ivvi
