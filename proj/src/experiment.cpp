#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "ivvi/csv.hpp"
#include "ivvi/errors.hpp"
#include "ivvi/evaluation.hpp"
#include "ivvi/experiment.hpp"
#include "ivvi/log.hpp"
#include "ivvi/moments.hpp"
#include "ivvi/parallel.hpp"
#include "ivvi/stats.hpp"

namespace ivvi {
namespace {

using nlohmann::json;

// Fixed streams for reference quantities, so they are shared by every seed.
constexpr std::uint64_t kReferenceSeed = 0x5eedc0de;
constexpr std::uint64_t kEvalSeed = 0xe7a1;
constexpr std::uint64_t kPlannerSeed = 0x91a7;

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const IvDiagnostics& d) {
  return {{"mu_iv", d.mu_iv}, {"l_p", d.l_p}, {"mu_b", d.mu_b},     {"l_b", d.l_b},
          {"mu_a", d.mu_a},   {"l_a", d.l_a}, {"rank_deficient", d.rank_deficient}};
}

json to_json(const StepsizeSchedule& s) {
  return {{"mode", std::string(to_string(s.mode))},
          {"alpha", s.alpha},
          {"beta", s.beta},
          {"gamma", s.gamma},
          {"gamma_requested", s.gamma_requested},
          {"mu_iv", s.mu_iv},
          {"mu_b", s.mu_b},
          {"lambda", s.lambda}};
}

json to_json(const McEstimate& e) { return {{"mean", e.mean}, {"se", e.se}}; }

// Accumulates output files and the human-readable log in memory.
class Outputs {
 public:
  std::ostringstream& file(const std::string& name) { return files_[name]; }
  void log(const std::string& line) {
    log_ << line << '\n';
    log::info(line);
  }
  void commit(const std::filesystem::path& dir, const json& summary) {
    namespace fs = std::filesystem;
    const fs::path staging = dir.string() + ".partial";
    try {
      fs::remove_all(staging);
      fs::create_directories(staging);
      for (const auto& [name, content] : files_) write(staging / name, content.str());
      write(staging / "log.txt", log_.str());
      write(staging / "summary.json", summary.dump(2) + "\n");
      fs::remove_all(dir);
      if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
      fs::rename(staging, dir);
    } catch (...) {
      std::error_code ec;
      fs::remove_all(staging, ec);
      throw;
    }
  }

 private:
  static void write(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw DataError("failed to write " + p.string());
  }
  std::map<std::string, std::ostringstream> files_;
  std::ostringstream log_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Reference moments: closed form on the analytic family, otherwise a large
// independent sample.
struct Reference {
  MomentMatrices moments;
  IvDiagnostics diag;
  std::string source;
  std::optional<AnalyticInstance> analytic;
};

Reference make_reference(const InstanceConfig& inst, const FeatureSpec& primal,
                         const FeatureSpec& dual, bool dual_includes_state, const FeatureMap& map,
                         long long truth_episodes) {
  Reference r;
  r.analytic = inst.analytic(primal, dual, dual_includes_state);
  if (r.analytic) {
    r.moments = r.analytic->population_moments();
    r.source = "analytic";
  } else {
    const Dataset big = collect_offline_dataset(inst.model(), static_cast<int>(truth_episodes), kReferenceSeed);
    r.moments = estimate_moments(big, map);
    r.source = "monte-carlo";
  }
  r.diag = iv_diagnostics(r.moments);
  return r;
}

StepsizeSchedule schedule_for(const EstimatorConfig& e, double mu_iv, double mu_b) {
  return make_schedule(mu_iv, mu_b, e.mode, e.overrides);
}

struct SeedRun {
  std::uint64_t seed = 0;
  Phase1Result result;
  StepsizeSchedule schedule;
  IvDiagnostics data_diag;
};

long long episodes_for(const EstimatorConfig& e, long long T, int horizon) {
  return e.n_episodes ? *e.n_episodes : (T + horizon - 1) / horizon;
}

Dataset make_dataset(const CmdpIvModel& model, long long n_episodes, std::uint64_t seed) {
  if (n_episodes > 2'000'000'000LL) throw InvalidArgument("n_episodes is too large");
  return collect_offline_dataset(model, static_cast<int>(n_episodes), seed);
}

// One estimator run on an existing dataset.
SeedRun run_estimator(const Dataset& data, const FeatureMap& map, const EstimatorConfig& est,
                      const Reference& ref, long long T, std::uint64_t seed, std::uint64_t stream,
                      const std::optional<Truth>& truth, bool want_checkpoints) {
  SeedRun run;
  run.seed = seed;
  if (est.sampling == SamplingMode::kShuffled && static_cast<long long>(data.size()) < T)
    throw InvalidArgument("estimator.n_episodes gives " + std::to_string(data.size()) +
                          " transitions, fewer than T = " + std::to_string(T) +
                          " for a shuffled pass");
  double mu_iv = ref.diag.mu_iv, mu_b = ref.diag.mu_b;
  if (est.mu_from_data) {
    run.data_diag = iv_diagnostics(estimate_moments(data, map));
    mu_iv = run.data_diag.mu_iv;
    mu_b = run.data_diag.mu_b;
  }
  run.schedule = schedule_for(est, mu_iv, mu_b);
  TransitionStream stream_(data, est.sampling, make_rng(seed, stream));
  const int dx = static_cast<int>(data.transitions.front().x_next.size());
  std::vector<long long> cps;
  if (want_checkpoints)
    cps = geometric_checkpoints(est.checkpoint_start.value_or(run.schedule.gamma), T);
  else
    cps = {T};
  run.result = run_phase1(stream_, map, run.schedule, T, Matrix::Zero(dx, map.d_phi()),
                          Matrix::Zero(dx, map.d_psi()), cps, truth);
  return run;
}

json base_summary(const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds) {
  return {{"schema_version", kSummarySchemaVersion},
          {"experiment", c.experiment},
          {"seeds", seeds},
          {"config", c.raw}};
}

Truth make_truth(const CmdpIvModel& model, const Reference& ref) {
  return Truth{model.w_star, ref.moments};
}

void require_realizable(const ExperimentConfig& c) {
  if (c.primal.kind != c.instance.dynamics.kind || c.primal.dim != c.instance.dynamics.dim ||
      c.primal.seed != c.instance.dynamics.seed)
    throw InvalidArgument("config field 'features.primal': must equal instance.dynamics.features "
                          "for this experiment (W_hat and W* must share a basis)");
}

// ------------------------------------------------------------- rate-check

json run_rate_check(const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds, int threads,
                    Outputs& out) {
  require_realizable(c);
  const CmdpIvModel model = c.instance.model();
  const FeatureMap map = c.feature_map();
  const Reference ref = make_reference(c.instance, c.primal, c.dual, c.dual_includes_state, map,
                                       c.evaluation.truth_episodes);
  const Truth truth = make_truth(model, ref);
  const long long T = *std::max_element(c.estimator.T.begin(), c.estimator.T.end());
  out.log("rate-check: mu_IV=" + fmt(ref.diag.mu_iv) + " mu_B=" + fmt(ref.diag.mu_b) +
          " (" + ref.source + "), T=" + std::to_string(T) + ", " + std::to_string(seeds.size()) +
          " seeds");

  std::vector<SeedRun> runs(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    const Dataset data = make_dataset(model, episodes_for(c.estimator, T, model.horizon), seeds[i]);
    runs[i] = run_estimator(data, map, c.estimator, ref, T, seeds[i], 1, truth, true);
  });

  for (const SeedRun& r : runs)
    write_trace_csv(out.file("trace_seed_" + std::to_string(r.seed) + ".csv"), r.result.trace);

  // Seeds share the checkpoint grid unless the schedule came from data.
  const auto& first = runs.front().result.trace.checkpoints;
  for (const SeedRun& r : runs)
    if (r.result.trace.checkpoints.size() != first.size())
      throw InvalidArgument("seeds produced different checkpoint grids; use mu_source=reference "
                            "or set estimator.checkpoint_start");
  std::vector<double> ts, mean_w;
  auto& rate = out.file("rate.csv");
  csv::write_row(rate, std::vector<std::string>{"t", "mean_frob_err_sq_W", "se_frob_err_sq_W",
                                                "mean_frob_err_sq_K", "mean_potential"});
  for (std::size_t k = 0; k < first.size(); ++k) {
    std::vector<double> ew, ek, pot;
    for (const SeedRun& r : runs) {
      const Checkpoint& cp = r.result.trace.checkpoints[k];
      if (cp.t != first[k].t) throw InvalidArgument("checkpoint grids differ across seeds");
      ew.push_back(cp.err_w);
      ek.push_back(cp.err_k);
      pot.push_back(cp.potential);
    }
    const McEstimate w = mean_stderr(ew);
    csv::write_row(rate, std::vector<double>{static_cast<double>(first[k].t), w.mean, w.se,
                                             mean_stderr(ek).mean, mean_stderr(pot).mean});
    const double t = static_cast<double>(first[k].t);
    if (t >= c.estimator.fit_lo && t <= c.estimator.fit_hi) {
      ts.push_back(t);
      mean_w.push_back(w.mean);
    }
  }
  const double slope = ts.size() >= 2 ? loglog_slope(ts, mean_w) : std::nan("");
  std::vector<double> final_errs;
  for (const SeedRun& r : runs) final_errs.push_back((r.result.W - model.w_star).squaredNorm());
  double max_norm = 0.0;
  for (const SeedRun& r : runs) max_norm = std::max(max_norm, r.result.trace.max_iterate_norm);
  const double norm_cap = 1e3 * (model.w_star.norm() + 1.0);

  const StepsizeSchedule& s = runs.front().schedule;
  const double p0 = model.w_star.squaredNorm() +
                    std::sqrt(ref.diag.mu_b) *
                        optimal_dual(ref.moments, Matrix::Zero(model.state_dim(), map.d_phi())).squaredNorm();
  StepsizeSchedule with_mu = s;
  with_mu.mu_iv = ref.diag.mu_iv;
  with_mu.mu_b = ref.diag.mu_b;
  with_mu.lambda = std::sqrt(ref.diag.mu_b);
  const double nu = nu_bound(with_mu, p0, model.state_dim(), model.sigma);

  out.log("fitted log-log slope over [" + fmt(c.estimator.fit_lo) + ", " + fmt(c.estimator.fit_hi) +
          "] = " + fmt(slope) + " using " + std::to_string(ts.size()) + " checkpoints");
  if (!mean_w.empty()) out.log("mean ||W_t - W*||_F^2 at the last fitted checkpoint = " + fmt(mean_w.back()));

  json j;
  j["reference"] = to_json(ref.diag);
  j["reference"]["source"] = ref.source;
  j["schedule"] = to_json(s);
  j["T"] = T;
  j["fit_range"] = {c.estimator.fit_lo, c.estimator.fit_hi};
  j["fit_points"] = ts.size();
  j["slope"] = slope;
  j["slope_in_unit_band"] = slope >= -1.3 && slope <= -0.7;
  j["final_mean_frob_err_sq_W"] = mean_stderr(final_errs).mean;
  j["initial_potential"] = p0;
  j["nu"] = nu;
  j["rate_bound_at_T"] = std::isfinite(nu) ? nu / (s.gamma + static_cast<double>(T)) : nu;
  j["max_iterate_norm"] = max_norm;
  j["iterate_norm_cap"] = norm_cap;
  j["iterates_bounded"] = max_norm <= norm_cap;
  return j;
}

// -------------------------------------------------------------- bias-demo

json run_bias_demo(const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds, int threads,
                   Outputs& out) {
  require_realizable(c);
  const CmdpIvModel model = c.instance.model();
  const FeatureMap map = c.feature_map();
  const Reference ref = make_reference(c.instance, c.primal, c.dual, c.dual_includes_state, map,
                                       c.evaluation.truth_episodes);
  const long long T = *std::max_element(c.estimator.T.begin(), c.estimator.T.end());
  const long long n_episodes = episodes_for(c.estimator, T, model.horizon);

  struct Row {
    std::vector<long long> t;
    std::vector<double> ivvi, ols;
    double ivvi_final = 0.0, ols_final = 0.0;
    Matrix w_ols, w_T;
  };
  std::vector<Row> rows(seeds.size());
  std::vector<SeedRun> runs(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    const Dataset data = make_dataset(model, n_episodes, seeds[i]);
    runs[i] = run_estimator(data, map, c.estimator, ref, T, seeds[i], 1, std::nullopt, true);
    Row& row = rows[i];
    row.w_ols = ols_baseline(data, map);
    row.w_T = runs[i].result.W;
    row.ols_final = (row.w_ols - model.w_star).norm();
    row.ivvi_final = (row.w_T - model.w_star).norm();
    // Least squares on growing prefixes of the dataset, at the same times.
    const int dp = map.d_phi();
    Matrix gram = Matrix::Zero(dp, dp), cross = Matrix::Zero(model.state_dim(), dp);
    std::size_t next = 0;
    for (const Checkpoint& cp : runs[i].result.trace.checkpoints) {
      const std::size_t upto = std::min<std::size_t>(cp.t, data.size());
      for (; next < upto; ++next) {
        const Transition& tr = data.transitions[next];
        const Vector phi = map.eval_phi(tr.x, tr.a);
        gram.noalias() += phi * phi.transpose();
        cross.noalias() += tr.x_next * phi.transpose();
      }
      Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
      const bool ok = eig.eigenvalues().maxCoeff() > 0.0 &&
                      eig.eigenvalues().minCoeff() > kSingularTolerance * eig.eigenvalues().maxCoeff();
      const double ols_err =
          ok ? (Eigen::LDLT<Matrix>(gram).solve(cross.transpose()).transpose() - model.w_star).norm()
             : std::nan("");
      row.t.push_back(cp.t);
      row.ivvi.push_back((cp.W - model.w_star).norm());
      row.ols.push_back(ols_err);
    }
  });

  auto& curve = out.file("bias.csv");
  csv::write_row(curve, std::vector<std::string>{"t", "mean_ivvi_frob_err", "mean_ols_frob_err"});
  for (std::size_t k = 0; k < rows.front().t.size(); ++k) {
    std::vector<double> a, b;
    for (const Row& r : rows) {
      if (k >= r.t.size()) continue;
      a.push_back(r.ivvi[k]);
      b.push_back(r.ols[k]);
    }
    csv::write_row(curve, std::vector<double>{static_cast<double>(rows.front().t[k]),
                                              mean_stderr(a).mean, mean_stderr(b).mean});
  }

  json per_seed = json::array();
  std::vector<double> ivvi_errs, ols_errs;
  double pop_bias = std::nan("");
  if (ref.analytic) pop_bias = (ref.analytic->ols_limit() - model.w_star).norm();
  bool all_ratio = true, all_bias = true;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const Row& r = rows[i];
    const double ratio = r.ols_final / r.ivvi_final;
    const bool within = std::isfinite(pop_bias) && std::abs(r.ols_final - pop_bias) <= 0.1 * pop_bias;
    all_ratio = all_ratio && ratio >= 5.0;
    all_bias = all_bias && within;
    per_seed.push_back({{"seed", seeds[i]},
                        {"ivvi_frob_err", r.ivvi_final},
                        {"ols_frob_err", r.ols_final},
                        {"ratio", ratio},
                        {"ols_within_10pct_of_population_bias", within},
                        {"W_T", to_json(r.w_T)},
                        {"W_ols", to_json(r.w_ols)}});
    ivvi_errs.push_back(r.ivvi_final);
    ols_errs.push_back(r.ols_final);
    out.log("seed " + std::to_string(seeds[i]) + ": ||W_T - W*||_F = " + fmt(r.ivvi_final) +
            ", ||W_ols - W*||_F = " + fmt(r.ols_final) + ", ratio " + fmt(ratio));
  }
  if (std::isfinite(pop_bias)) out.log("population least-squares bias = " + fmt(pop_bias));

  json j;
  j["reference"] = to_json(ref.diag);
  j["reference"]["source"] = ref.source;
  j["schedule"] = to_json(runs.front().schedule);
  j["T"] = T;
  j["n_transitions"] = n_episodes * model.horizon;
  j["population_ols_bias"] = std::isfinite(pop_bias) ? json(pop_bias) : json(nullptr);
  if (ref.analytic) j["population_ols_limit"] = to_json(ref.analytic->ols_limit());
  j["mean_ivvi_frob_err"] = mean_stderr(ivvi_errs).mean;
  j["mean_ols_frob_err"] = mean_stderr(ols_errs).mean;
  j["all_seeds_ratio_at_least_5"] = all_ratio;
  j["all_seeds_ols_within_10pct"] = all_bias;
  j["per_seed"] = per_seed;
  return j;
}

// ------------------------------------------------------ level modifications

InstanceConfig apply_level(InstanceConfig inst, const SweepLevel& l) {
  if (l.c_z) inst.behavior.c_z = Vector::Constant(inst.behavior.c_z.size(), *l.c_z);
  if (l.c_e) inst.behavior.c_e = *l.c_e;
  if (l.action_noise_std) inst.behavior.action_noise_std = *l.action_noise_std;
  return inst;
}

ExperimentConfig apply_level(const ExperimentConfig& c, const SweepLevel& l) {
  ExperimentConfig out = c;
  out.instance = apply_level(c.instance, l);
  if (l.dual_dim) out.dual.dim = *l.dual_dim;
  return out;
}

// ------------------------------------------------------ iv-strength-sweep

json run_iv_sweep(const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds, int threads,
                  Outputs& out) {
  require_realizable(c);
  const long long T = *std::max_element(c.estimator.T.begin(), c.estimator.T.end());
  auto& table = out.file("sweep.csv");
  csv::write_row(table, std::vector<std::string>{"label", "c_z", "mu_iv", "mu_b", "status",
                                                 "mean_frob_err_sq_W", "se_frob_err_sq_W"});
  json levels = json::array();
  for (const SweepLevel& level : c.levels) {
    const ExperimentConfig lc = apply_level(c, level);
    const CmdpIvModel model = lc.instance.model();
    const FeatureMap map = lc.feature_map();
    const Reference ref = make_reference(lc.instance, lc.primal, lc.dual, lc.dual_includes_state, map,
                                         lc.evaluation.truth_episodes);
    const double cz = model.behavior.c_z.cwiseAbs().maxCoeff();
    json lj{{"label", level.label}, {"c_z", cz}, {"reference", to_json(ref.diag)}};
    lj["reference"]["source"] = ref.source;
    const bool weak = !model.behavior.instrument_relevant() || ref.diag.rank_deficient ||
                      ref.diag.mu_iv <= c.weak_iv_threshold;
    if (weak) {
      const std::string msg = "weak instrument: mu_IV = " + fmt(ref.diag.mu_iv) +
                              " is at or below the threshold " + fmt(c.weak_iv_threshold) +
                              (model.behavior.instrument_relevant() ? "" : " (c_z = 0, instrument irrelevant)") +
                              "; W* is not identified, no estimator run";
      out.log(level.label + ": " + msg);
      lj["status"] = "weak-instrument";
      lj["diagnostic"] = msg;
      table << level.label << ',' << csv::format(cz) << ',' << csv::format(ref.diag.mu_iv) << ','
            << csv::format(ref.diag.mu_b) << ",weak-instrument,,\n";
      levels.push_back(lj);
      continue;
    }
    const Truth truth = make_truth(model, ref);
    std::vector<double> errs(seeds.size());
    std::vector<SeedRun> runs(seeds.size());
    parallel_for(seeds.size(), threads, [&](std::size_t i) {
      const Dataset data = make_dataset(model, episodes_for(lc.estimator, T, model.horizon), seeds[i]);
      runs[i] = run_estimator(data, map, lc.estimator, ref, T, seeds[i], 1, truth, false);
      errs[i] = (runs[i].result.W - model.w_star).squaredNorm();
    });
    const McEstimate e = mean_stderr(errs);
    out.log(level.label + ": mu_IV = " + fmt(ref.diag.mu_iv) + ", mean ||W_T - W*||_F^2 = " + fmt(e.mean));
    lj["status"] = "ok";
    lj["schedule"] = to_json(runs.front().schedule);
    lj["frob_err_sq_W"] = to_json(e);
    table << level.label << ',' << csv::format(cz) << ',' << csv::format(ref.diag.mu_iv) << ','
          << csv::format(ref.diag.mu_b) << ",ok," << csv::format(e.mean) << ',' << csv::format(e.se)
          << '\n';
    levels.push_back(lj);
  }
  return {{"T", T}, {"weak_iv_threshold", c.weak_iv_threshold}, {"levels", levels}};
}

// ------------------------------------------------------- misspecification

json run_misspecification(const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds,
                          int threads, Outputs& out) {
  std::vector<long long> Ts = c.estimator.T;
  std::sort(Ts.begin(), Ts.end());
  auto& table = out.file("misspecification.csv");
  csv::write_row(table, std::vector<std::string>{"label", "c_z", "d_psi", "mu_iv", "T", "mean_l2_err",
                                                 "se_l2_err", "saddle_l2_err"});
  json levels = json::array();
  std::vector<double> final_means, mu_ivs;
  bool all_plateau = true;
  for (std::size_t li = 0; li < c.levels.size(); ++li) {
    const SweepLevel& level = c.levels[li];
    const ExperimentConfig lc = apply_level(c, level);
    const CmdpIvModel model = lc.instance.model();
    const FeatureMap map = lc.feature_map();
    const Reference ref = make_reference(lc.instance, lc.primal, lc.dual, lc.dual_includes_state, map,
                                         lc.evaluation.truth_episodes);
    const SaddlePoint sad = oracle_saddle(ref.moments);
    // L2(W) = sqrt(E||W phi(x, a) - F*(x, a)||^2) over the sampling law, on an
    // evaluation sample drawn independently for every (level, T).
    struct EvalSample {
      std::vector<Vector> phis, truths;
    };
    auto draw_eval = [&](std::uint64_t stream) {
      EvalSample ev;
      const Dataset d = make_dataset(model, (lc.evaluation.n_eval + model.horizon - 1) / model.horizon,
                                     kEvalSeed + stream);
      for (const Transition& tr : d.transitions) {
        ev.phis.push_back(map.eval_phi(tr.x, tr.a));
        ev.truths.push_back(model.mean_next(tr.x, tr.a));
      }
      return ev;
    };
    // Returns the estimate and its Monte Carlo standard error (delta method).
    auto l2 = [](const EvalSample& ev, const Matrix& W) {
      std::vector<double> sq(ev.phis.size());
      for (std::size_t k = 0; k < sq.size(); ++k) sq[k] = (W * ev.phis[k] - ev.truths[k]).squaredNorm();
      const McEstimate m = mean_stderr(sq);
      const double root = std::sqrt(m.mean);
      return McEstimate{root, root > 0.0 ? m.se / (2.0 * root) : 0.0};
    };
    const EvalSample floor_sample = draw_eval(1000 * li);
    const McEstimate floor_est = l2(floor_sample, sad.W);
    const double floor_sad = floor_est.mean;
    const double cz = model.behavior.c_z.cwiseAbs().maxCoeff();
    json lj{{"label", level.label}, {"c_z", cz}, {"d_psi", map.d_psi()},
            {"reference", to_json(ref.diag)}, {"saddle_l2_err", to_json(floor_est)}};
    lj["reference"]["source"] = ref.source;
    json per_t = json::array();
    std::vector<McEstimate> by_t;
    for (std::size_t ti = 0; ti < Ts.size(); ++ti) {
      const long long T = Ts[ti];
      const EvalSample sample = draw_eval(1000 * li + ti + 1);
      std::vector<double> errs(seeds.size()), mc_se(seeds.size());
      std::vector<SeedRun> runs(seeds.size());
      parallel_for(seeds.size(), threads, [&](std::size_t i) {
        const Dataset data = make_dataset(model, episodes_for(lc.estimator, T, model.horizon), seeds[i]);
        runs[i] = run_estimator(data, map, lc.estimator, ref, T, seeds[i], 1, std::nullopt, false);
        const McEstimate e = l2(sample, runs[i].result.W);
        errs[i] = e.mean;
        mc_se[i] = e.se;
      });
      const McEstimate across = mean_stderr(errs);
      // Seeds share the evaluation sample, so their MC errors do not average out.
      const double mc = mean_stderr(mc_se).mean;
      const McEstimate e{across.mean, std::hypot(across.se, mc)};
      by_t.push_back(e);
      per_t.push_back({{"T", T},
                       {"l2_err", to_json(e)},
                       {"seed_se", across.se},
                       {"mc_se", mc},
                       {"schedule", to_json(runs.front().schedule)}});
      table << level.label << ',' << csv::format(cz) << ',' << map.d_psi() << ','
            << csv::format(ref.diag.mu_iv) << ',' << T << ',' << csv::format(e.mean) << ','
            << csv::format(e.se) << ',' << csv::format(floor_sad) << '\n';
      out.log(level.label + ": mu_IV = " + fmt(ref.diag.mu_iv) + ", T = " + std::to_string(T) +
              ", L2 error " + fmt(e.mean) + " +- " + fmt(e.se) + " (seed se " + fmt(across.se) +
              ", mc se " + fmt(mc) + "; saddle " + fmt(floor_sad) + ")");
    }
    bool plateau = true;
    if (by_t.size() >= 2) {
      const McEstimate& a = by_t[by_t.size() - 2];
      const McEstimate& b = by_t.back();
      plateau = b.mean >= a.mean - 3.0 * std::hypot(a.se, b.se);
    }
    all_plateau = all_plateau && plateau;
    lj["by_T"] = per_t;
    lj["plateau"] = plateau;
    levels.push_back(lj);
    final_means.push_back(by_t.back().mean);
    mu_ivs.push_back(ref.diag.mu_iv);
  }
  // Order levels by decreasing mu_IV and check the floor rises.
  std::vector<std::size_t> order(levels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mu_ivs[a] > mu_ivs[b]; });
  bool increasing = true;
  for (std::size_t k = 1; k < order.size(); ++k)
    increasing = increasing && final_means[order[k]] > final_means[order[k - 1]];
  return {{"T", Ts},
          {"levels", levels},
          {"all_levels_plateau", all_plateau},
          {"floor_increases_as_mu_iv_falls", increasing}};
}

// ------------------------------------------------------------ end-to-end

std::vector<Vector> init_grid(const Box& box, int count) {
  const StateGrid g = StateGrid::uniform(box, std::vector<int>(box.size(), count));
  std::vector<Vector> out;
  for (std::size_t n = 0; n < g.size(); ++n) out.push_back(g.node(n));
  return out;
}

PlannerModel planner_model(const CmdpIvModel& m) { return PlannerModel{m.sigma, m.reward, m.horizon}; }

json run_end_to_end(const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds, int threads,
                    Outputs& out) {
  require_realizable(c);
  const CmdpIvModel model = c.instance.model();
  const FeatureMap map = c.feature_map();
  const Reference ref = make_reference(c.instance, c.primal, c.dual, c.dual_includes_state, map,
                                       c.evaluation.truth_episodes);
  std::vector<long long> Ts = c.estimator.T;
  std::sort(Ts.begin(), Ts.end());
  const EvaluationConfig& ev = c.evaluation;
  const StateGrid grid = StateGrid::uniform(c.instance.state_box, ev.grid_counts);
  const auto actions = uniform_action_grid(c.instance.action_bounds, ev.action_count);
  std::vector<int> fine_counts;
  for (int n : ev.grid_counts) fine_counts.push_back((n - 1) * ev.star_refine + 1);
  const StateGrid fine = StateGrid::uniform(c.instance.state_box, fine_counts);
  const auto fine_actions = uniform_action_grid(c.instance.action_bounds, (ev.action_count - 1) * ev.star_refine + 1);
  PlannerOptions popt{ev.n_mc, ev.interpolation, BackupMode::kMonteCarlo};
  Rng star_rng = make_rng(kPlannerSeed);
  const Plan star = value_iteration(model.w_star, planner_model(model), model.dynamics_features, fine,
                                    fine_actions, popt, star_rng);
  const auto inits = init_grid(c.instance.init_box, ev.init_count);
  out.log("end-to-end: mu_IV=" + fmt(ref.diag.mu_iv) + " mu_B=" + fmt(ref.diag.mu_b) + " (" +
          ref.source + "), " + std::to_string(inits.size()) + " initial states");

  struct Cell {
    double sup_gap = 0.0, sup_gap_se = 0.0, bound = 0.0, w_err = 0.0;
    bool dominated = true;
  };
  std::vector<std::vector<Cell>> cells(seeds.size(), std::vector<Cell>(Ts.size()));
  std::vector<StepsizeSchedule> schedules(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    const Dataset data = make_dataset(model, episodes_for(c.estimator, Ts.back(), model.horizon), seeds[i]);
    for (std::size_t k = 0; k < Ts.size(); ++k) {
      const SeedRun run = run_estimator(data, map, c.estimator, ref, Ts[k], seeds[i], 10 + k,
                                        std::nullopt, false);
      schedules[i] = run.schedule;
      Rng prng = make_rng(seeds[i], 2);
      const Plan hat = value_iteration(run.result.W, planner_model(model), map.primal(), grid,
                                       actions, popt, prng);
      Rng erng = make_rng(seeds[i], 3);
      const SuboptimalityReport rep = estimate_suboptimality(
          model, hat.table_policy(), star.table_policy(), inits, ev.n_rollouts, erng);
      Cell& cell = cells[i][k];
      cell.sup_gap = rep.sup_gap;
      cell.sup_gap_se = rep.sup_gap_se;
      cell.bound = model_error_bound(run.result.W, model.w_star, model.sigma, model.horizon);
      cell.w_err = (run.result.W - model.w_star).norm();
      cell.dominated = cell.sup_gap <= cell.bound + 3.0 * cell.sup_gap_se;
    }
  });

  auto& table = out.file("suboptimality.csv");
  csv::write_row(table, std::vector<std::string>{"seed", "T", "sup_gap", "sup_gap_se",
                                                 "model_error_bound", "frob_err_W"});
  json per_t = json::array();
  std::vector<McEstimate> gaps;
  bool all_dominated = true;
  for (std::size_t k = 0; k < Ts.size(); ++k) {
    std::vector<double> g, b, mc_se;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const Cell& cell = cells[i][k];
      csv::write_row(table, std::vector<double>{static_cast<double>(seeds[i]), static_cast<double>(Ts[k]),
                                                cell.sup_gap, cell.sup_gap_se, cell.bound, cell.w_err});
      g.push_back(cell.sup_gap);
      b.push_back(cell.bound);
      mc_se.push_back(cell.sup_gap_se);
      all_dominated = all_dominated && cell.dominated;
    }
    McEstimate e = mean_stderr(g);
    if (seeds.size() == 1) e.se = mc_se.front();
    gaps.push_back(e);
    per_t.push_back({{"T", Ts[k]}, {"sup_gap", to_json(e)}, {"mean_model_error_bound", mean_stderr(b).mean}});
    out.log("T = " + std::to_string(Ts[k]) + ": mean sup gap " + fmt(e.mean) + " +- " + fmt(e.se) +
            ", mean bound " + fmt(mean_stderr(b).mean));
  }
  const double combined = std::hypot(gaps.front().se, gaps.back().se);
  const bool decays = gaps.back().mean <= gaps.front().mean - 3.0 * combined;
  return {{"reference", to_json(ref.diag)},
          {"schedule", to_json(schedules.front())},
          {"grid_sup_note", "sup over the listed initial states only; under-estimates the sup over S"},
          {"n_initial_states", inits.size()},
          {"by_T", per_t},
          {"gap_decays", decays},
          {"decay_combined_se", combined},
          {"bound_dominates_all_runs", all_dominated}};
}

// ----------------------------------------------------------- lemma-audits

json run_lemma_audits(const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds, int threads,
                      Outputs& out) {
  const AuditConfig& a = c.audits;
  // Gaussian-shift battery.
  const std::size_t n_chunks = 64;
  std::vector<long long> violations(n_chunks, 0);
  std::vector<double> worst(n_chunks, -INFINITY);
  parallel_for(n_chunks, threads, [&](std::size_t chunk) {
    for (long long trial = static_cast<long long>(chunk); trial < a.shift_trials;
         trial += static_cast<long long>(n_chunks)) {
      Rng rng = make_rng(seeds[trial % seeds.size()], 0x5000000 + trial);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      const double sigma = 0.1 + 1.9 * (0.5 * (u(rng) + 1.0));
      Vector mu1(a.shift_dim), dir(a.shift_dim);
      for (int d = 0; d < a.shift_dim; ++d) {
        mu1[d] = 2.0 * u(rng);
        dir[d] = u(rng);
      }
      const double len = 2.0 * sigma * 0.5 * (u(rng) + 1.0);
      const Vector mu2 = mu1 + len * dir / std::max(dir.norm(), 1e-12);
      Vector center(a.shift_dim);
      for (int d = 0; d < a.shift_dim; ++d) center[d] = 2.0 * u(rng);
      std::function<double(const Vector&)> g;
      switch (trial % 4) {
        case 0: g = [](const Vector& z) { return z.squaredNorm(); }; break;
        case 1: g = [center](const Vector& z) { return std::exp(-(z - center).squaredNorm()); }; break;
        case 2: g = [](const Vector& z) { return std::max(0.0, z[0]); }; break;
        default: g = [](const Vector&) { return 1.0; }; break;
      }
      const GaussianShiftCheck chk = check_gaussian_shift_bound(mu1, mu2, sigma, g, a.shift_n_mc, rng);
      if (!chk.holds) ++violations[chunk];
      const double slack = 3.0 * std::hypot(chk.lhs_se, chk.rhs_se);
      worst[chunk] = std::max(worst[chunk], chk.lhs - chk.rhs - slack);
    }
  });
  const long long total_violations = std::accumulate(violations.begin(), violations.end(), 0LL);
  const double worst_margin = *std::max_element(worst.begin(), worst.end());
  out.log("gaussian-shift audit: " + std::to_string(a.shift_trials) + " trials, " +
          std::to_string(total_violations) + " violations");

  // Decomposition battery on the configured environment.
  require_realizable(c);
  const CmdpIvModel model = c.instance.model();
  const EvaluationConfig& ev = c.evaluation;
  const StateGrid grid = StateGrid::uniform(c.instance.state_box, ev.grid_counts);
  const auto actions = uniform_action_grid(c.instance.action_bounds, ev.action_count);
  PlannerOptions popt{ev.n_mc, ev.interpolation, BackupMode::kMonteCarlo};
  Rng star_rng = make_rng(kPlannerSeed);
  const Plan star = value_iteration(model.w_star, planner_model(model), model.dynamics_features, grid,
                                    actions, popt, star_rng);
  std::vector<DecompositionReport> reps(a.d1_instances);
  std::vector<double> perturb(a.d1_instances);
  parallel_for(reps.size(), threads, [&](std::size_t k) {
    Rng rng = make_rng(seeds[k % seeds.size()], 0xd1000 + k);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double scale = a.d1_perturbation * std::max(model.w_star.cwiseAbs().maxCoeff(), 1e-3);
    Matrix w = model.w_star;
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += scale * u(rng);
    Vector x1(model.state_dim());
    for (int d = 0; d < model.state_dim(); ++d)
      x1[d] = std::uniform_real_distribution<double>(c.instance.init_box[d].lo, c.instance.init_box[d].hi)(rng);
    const Plan hat = value_iteration(w, planner_model(model), model.dynamics_features, grid, actions, popt, rng);
    reps[k] = lemma_d1_decomposition(model, hat, star, x1, a.d1_rollouts, rng);
    perturb[k] = (w - model.w_star).norm();
  });
  auto& table = out.file("decomposition.csv");
  csv::write_row(table, std::vector<std::string>{"instance", "frob_perturbation", "xi_star", "xi_star_se",
                                                 "iota_star", "iota_hat", "reconstruction",
                                                 "reconstruction_se", "direct", "direct_se",
                                                 "identity_holds", "xi_nonpositive"});
  int id_ok = 0, xi_ok = 0;
  for (std::size_t k = 0; k < reps.size(); ++k) {
    const auto& r = reps[k];
    id_ok += r.identity_holds;
    xi_ok += r.xi_nonpositive;
    csv::write_row(table, std::vector<double>{static_cast<double>(k), perturb[k], r.xi_star.mean, r.xi_star.se,
                                              r.iota_star.mean, r.iota_hat.mean, r.reconstruction.mean,
                                              r.reconstruction.se, r.direct.mean, r.direct.se,
                                              r.identity_holds ? 1.0 : 0.0, r.xi_nonpositive ? 1.0 : 0.0});
  }
  out.log("decomposition audit: identity within 3 se in " + std::to_string(id_ok) + "/" +
          std::to_string(reps.size()) + ", xi nonpositive in " + std::to_string(xi_ok) + "/" +
          std::to_string(reps.size()));
  return {{"gaussian_shift", {{"trials", a.shift_trials},
                              {"n_mc", a.shift_n_mc},
                              {"violations", total_violations},
                              {"worst_excess_over_slack", worst_margin}}},
          {"decomposition", {{"instances", reps.size()},
                             {"rollouts", a.d1_rollouts},
                             {"identity_holds", id_ok},
                             {"xi_nonpositive", xi_ok}}}};
}

}  // namespace

json run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s : config.seeds) seeds.push_back(s + options.seed_offset);
  const int threads = options.threads.value_or(config.threads);
  Outputs out;
  json j = base_summary(config, seeds);
  json body;
  const std::string& e = config.experiment;
  if (e == "rate-check") {
    body = run_rate_check(config, seeds, threads, out);
  } else if (e == "bias-demo") {
    body = run_bias_demo(config, seeds, threads, out);
  } else if (e == "iv-strength-sweep") {
    body = run_iv_sweep(config, seeds, threads, out);
  } else if (e == "misspecification") {
    body = run_misspecification(config, seeds, threads, out);
  } else if (e == "end-to-end") {
    body = run_end_to_end(config, seeds, threads, out);
  } else if (e == "lemma-audits") {
    body = run_lemma_audits(config, seeds, threads, out);
  } else {
    throw InvalidArgument("unknown experiment '" + e + "'");
  }
  j["results"] = body;
  if (options.write_files) out.commit(options.output_dir.value_or(config.output_dir), j);
  return j;
}

}  // namespace ivvi
