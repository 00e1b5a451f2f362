// Command-line front end: run or validate experiment configs.

#include <chrono>
#include <iostream>

#include <CLI11.hpp>

#include "ivvi/errors.hpp"
#include "ivvi/experiment.hpp"
#include "ivvi/log.hpp"

namespace {

// Exit codes by error category.
int exit_code(const std::string& category) {
  if (category == "invalid-argument") return 2;
  if (category == "data") return 3;
  if (category == "identification") return 4;
  if (category == "divergence") return 5;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IV-aided value iteration experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::uint64_t seed_offset = 0;
  int threads = -1;
  bool verbose = false;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Path to a JSON config")->required()->check(CLI::ExistingFile);
  run->add_option("--output-dir", output_dir, "Override the config's output_dir");
  run->add_option("--seed-offset", seed_offset, "Added to every configured seed");
  run->add_option("--threads", threads, "Worker threads (0: all cores)");
  run->add_flag("-v,--verbose", verbose, "Print progress lines");

  auto* validate = app.add_subcommand("validate", "Check a config file without running it");
  validate->add_option("config", config_path, "Path to a JSON config")->required()->check(CLI::ExistingFile);

  app.add_subcommand("list-experiments", "Print the experiment names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("list-experiments")) {
      for (const auto& name : ivvi::list_experiments()) std::cout << name << '\n';
      return 0;
    }
    const ivvi::ExperimentConfig config = ivvi::load_config(config_path);
    if (app.got_subcommand("validate")) {
      std::cout << config_path << ": ok (" << config.experiment << ", " << config.seeds.size()
                << " seeds)\n";
      return 0;
    }
    if (verbose) ivvi::log::set_level(ivvi::log::Level::kInfo);
    ivvi::RunOptions opts;
    if (!output_dir.empty()) opts.output_dir = output_dir;
    opts.seed_offset = seed_offset;
    if (threads >= 0) opts.threads = threads;
    const auto start = std::chrono::steady_clock::now();
    const auto summary = ivvi::run_experiment(config, opts);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << config.experiment << ": done in " << secs << " s, output in "
              << (opts.output_dir ? *opts.output_dir : config.output_dir).string() << '\n';
    return 0;
  } catch (const ivvi::Error& e) {
    std::cerr << "error [" << e.category() << "]: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << '\n';
    return 1;
  }
}
