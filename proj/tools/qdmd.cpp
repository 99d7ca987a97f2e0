// Copyright 2026 The qdmd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// qdmd command-line tool: simulate driven quantum systems on the Bloch ball,
// fit data-driven propagator models, roll fitted models forward, and emit the
// three self-contained example bundles.
//
//   qdmd simulate --config cfg.json [--out DIR] [--seed N] [--noise S]
//                 [--format csv|json]
//   qdmd fit      --config cfg.json [DATA.csv ...] [--out DIR] [--rank R]
//                 [--rank-hat R]
//   qdmd predict  --config cfg.json [--out DIR] [--model PATH] [--steps N]
//   qdmd example  N [--out DIR]
//
// Exit codes: 0 success, 2 malformed configuration, 3 data/algorithm
// mismatch, 4 numerical failure. QDMD_THREADS caps worker threads.
//
// All output files are deterministic for a fixed config and seed; wall-clock
// timings go to stderr and to a timings.txt sidecar, never into report.json.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qdmd/experiment.hpp"

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct TimingLog {
  std::vector<std::pair<std::string, double>> entries;

  void add(const std::string& what, double seconds) {
    entries.emplace_back(what, seconds);
    std::fprintf(stderr, "timing: %s %.3fs\n", what.c_str(), seconds);
  }

  /// Written next to the run outputs; excluded from report.json so reruns
  /// reproduce every deterministic artifact byte for byte.
  void write(const std::string& dir) const {
    std::ofstream out(qdmd::detail::join_path(dir, "timings.txt"));
    for (const auto& [what, seconds] : entries) {
      out << what << " " << seconds << "s\n";
    }
  }
};

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  double noise = -1.0;
  int rank = -2;      // -2 = keep the config's value (-1 means auto there).
  int rank_hat = -2;
};

qdmd::ExperimentConfig load_with_overrides(const CommonFlags& f) {
  qdmd::ExperimentConfig cfg = qdmd::load_config(f.config_path);
  if (!f.out_dir.empty()) cfg.output.dir = f.out_dir;
  if (f.seed >= 0) cfg.noise.seed = static_cast<std::uint64_t>(f.seed);
  if (f.noise >= 0.0) cfg.noise.sigma = f.noise;
  if (f.rank != -2) cfg.algorithm.rank = f.rank;
  if (f.rank_hat != -2) cfg.algorithm.rank_hat = f.rank_hat;
  return cfg;
}

void write_trajectory_json(const qdmd::BlochTrajectory& traj, const std::string& path) {
  using qdmd::detail::ordered_json;
  ordered_json j;
  j["schema"] = "qdmd-trajectory";
  j["version"] = 1;
  j["dt"] = traj.dt;
  if (traj.period > 0.0) j["period"] = traj.period;
  j["sigma"] = traj.sigma;
  j["seed"] = traj.seed;
  j["times"] = std::vector<double>(traj.times.data(), traj.times.data() + traj.samples());
  ordered_json states = ordered_json::array();
  for (int m = 0; m < traj.samples(); ++m) {
    states.push_back(std::vector<double>(traj.states.col(m).data(),
                                         traj.states.col(m).data() + traj.dim()));
  }
  j["states"] = std::move(states);
  if (traj.num_controls() > 0) {
    ordered_json controls = ordered_json::array();
    for (int m = 0; m < traj.samples(); ++m) {
      controls.push_back(std::vector<double>(
          traj.controls.col(m).data(), traj.controls.col(m).data() + traj.num_controls()));
    }
    j["controls"] = std::move(controls);
  }
  qdmd::detail::write_json_file(j, path);
}

int cmd_simulate(const CommonFlags& flags, const std::string& format) {
  const qdmd::ExperimentConfig cfg = load_with_overrides(flags);
  qdmd::detail::ensure_dir(cfg.output.dir);
  TimingLog timings;

  Stopwatch sw;
  const qdmd::BlochTrajectory traj = qdmd::run_simulate(cfg);
  timings.add("simulate", sw.seconds());

  std::string traj_path = qdmd::detail::join_path(cfg.output.dir, cfg.output.trajectory);
  if (format == "json") {
    const std::filesystem::path as_json =
        std::filesystem::path(traj_path).replace_extension(".json");
    traj_path = as_json.string();
    write_trajectory_json(traj, traj_path);
  } else {
    qdmd::write_trajectory_csv(traj, traj_path);
  }
  std::printf("wrote %s (%d samples)\n", traj_path.c_str(), traj.samples());

  qdmd::RunReport report;
  report.config_echo = cfg.echo;
  report.simulate_seconds = timings.entries.front().second;
  qdmd::write_report(report, qdmd::detail::join_path(cfg.output.dir, cfg.output.report));
  timings.write(cfg.output.dir);
  return 0;
}

int cmd_fit(const CommonFlags& flags, const std::vector<std::string>& data_args) {
  const qdmd::ExperimentConfig cfg = load_with_overrides(flags);
  qdmd::detail::ensure_dir(cfg.output.dir);
  TimingLog timings;

  std::vector<std::string> paths = data_args.empty() ? cfg.data : data_args;
  if (paths.empty()) {
    throw qdmd::DataError("fit: no trajectory data (pass files or set config 'data')");
  }
  std::vector<qdmd::BlochTrajectory> trajs;
  for (const auto& p : paths) trajs.push_back(qdmd::read_trajectory_csv(p));

  Stopwatch sw;
  const qdmd::FitResult fit = qdmd::run_fit(cfg, trajs);
  timings.add("fit", sw.seconds());

  const std::string model_path = qdmd::detail::join_path(cfg.output.dir, cfg.output.model);
  qdmd::save_fit(fit, model_path);
  std::printf("wrote %s (method %s)\n", model_path.c_str(), fit.method.c_str());

  qdmd::RunReport report;
  report.method = fit.method;
  report.model_path = cfg.output.model;
  report.ranks = fit.ranks();
  report.eigenvalues = fit.spectrum();
  report.dt = fit.dt();
  report.warnings = fit.warnings;
  report.fit_seconds = timings.entries.front().second;
  if (fit.dmd) {
    try {
      report.resonance = qdmd::resonance_estimate(*fit.dmd);
    } catch (const qdmd::NumericalError& e) {
      report.warnings.push_back(e.what());
    }
  } else if (fit.bidmd && fit.method == "bidmd") {
    try {
      report.resonance = qdmd::resonance_estimate(*fit.bidmd);
    } catch (const qdmd::NumericalError& e) {
      report.warnings.push_back(e.what());
    }
  }
  report.config_echo = cfg.echo;
  qdmd::write_report(report, qdmd::detail::join_path(cfg.output.dir, cfg.output.report));
  timings.write(cfg.output.dir);
  return 0;
}

int cmd_predict(const CommonFlags& flags, const std::string& model_path, int steps) {
  qdmd::ExperimentConfig cfg = load_with_overrides(flags);
  qdmd::detail::ensure_dir(cfg.output.dir);
  if (!model_path.empty()) cfg.predict.model_path = model_path;
  if (steps >= 0) cfg.predict.steps = steps;
  TimingLog timings;

  Stopwatch sw;
  const qdmd::PredictResult pred = qdmd::run_predict(cfg);
  timings.add("predict", sw.seconds());

  const std::string pred_path =
      qdmd::detail::join_path(cfg.output.dir, cfg.output.prediction);
  qdmd::write_prediction_csv(pred, pred_path);
  std::printf("wrote %s (%d steps)\n", pred_path.c_str(),
              static_cast<int>(pred.predictions.cols()) - 1);

  qdmd::RunReport report;
  report.method = cfg.algorithm.method;
  report.step_errors = pred.step_errors;
  report.overall_error = pred.overall_error;
  report.predict_seconds = timings.entries.front().second;
  report.config_echo = cfg.echo;
  qdmd::write_report(report, qdmd::detail::join_path(cfg.output.dir, cfg.output.report));
  timings.write(cfg.output.dir);
  if (!pred.step_errors.empty()) {
    std::printf("overall relative error vs truth: %.6g\n", pred.overall_error);
  }
  return 0;
}

int cmd_example(int index, std::string out_dir) {
  if (out_dir.empty()) out_dir = "example-" + std::to_string(index);
  Stopwatch sw;
  const qdmd::BundleResult bundle = qdmd::run_example(index, out_dir);
  std::fprintf(stderr, "timing: example-%d %.3fs\n", index, sw.seconds());
  std::printf("wrote example %d bundle to %s\n", index, bundle.dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdmd: data-driven identification of driven quantum dynamics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("qdmd ") + qdmd::kVersion);

  CommonFlags flags;
  std::string format = "csv";
  std::vector<std::string> data_args;
  std::string model_path;
  int steps = -1;
  int example_index = 0;

  CLI::App* simulate = app.add_subcommand("simulate", "Integrate a configured system");
  simulate->add_option("--config", flags.config_path, "Experiment config JSON")
      ->required();
  simulate->add_option("--out", flags.out_dir, "Output directory override");
  simulate->add_option("--seed", flags.seed, "Noise seed override");
  simulate->add_option("--noise", flags.noise, "Noise sigma override");
  simulate->add_option("--format", format, "Trajectory format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* fit = app.add_subcommand("fit", "Fit a model to trajectory data");
  fit->add_option("--config", flags.config_path, "Experiment config JSON")->required();
  fit->add_option("data", data_args, "Trajectory CSV files (default: config 'data')");
  fit->add_option("--out", flags.out_dir, "Output directory override");
  fit->add_option("--rank", flags.rank, "State-space rank override (-1 = auto)");
  fit->add_option("--rank-hat", flags.rank_hat, "Lifted-space rank override (-1 = auto)");
  fit->add_option("--seed", flags.seed, "Noise seed override");
  fit->add_option("--noise", flags.noise, "Noise sigma override");

  CLI::App* predict = app.add_subcommand("predict", "Roll a fitted model forward");
  predict->add_option("--config", flags.config_path, "Experiment config JSON")
      ->required();
  predict->add_option("--out", flags.out_dir, "Output directory override");
  predict->add_option("--model", model_path, "Model JSON path override");
  predict->add_option("--steps", steps, "Number of prediction steps override");

  CLI::App* example = app.add_subcommand("example", "Write a self-contained bundle");
  example->add_option("index", example_index, "Example index: 1, 2 or 3")->required();
  example->add_option("--out", flags.out_dir, "Output directory (default example-N)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(flags, format);
    if (fit->parsed()) return cmd_fit(flags, data_args);
    if (predict->parsed()) return cmd_predict(flags, model_path, steps);
    return cmd_example(example_index, flags.out_dir);
  } catch (const qdmd::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const qdmd::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const qdmd::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
