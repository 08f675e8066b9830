// gamorra command-line tool. Subcommands cover trace simulation, profile
// benchmarking, offline fitting, streaming runs and model comparison.

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gamorra/gamorra.hpp"

namespace fs = std::filesystem;
using namespace gamorra;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("gamorra");
  logger->set_pattern("gamorra: %l: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  const char* env = std::getenv("GAMORRA_LOG");
  if (env == nullptr) return;
  std::string v = env;
  if (v == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (v == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else if (v == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (v == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::warn("ignoring GAMORRA_LOG={} (expected error, warn, info or debug)", v);
  }
}

fs::path shader_dir_for(const fs::path& trace, const std::string& flag) {
  if (!flag.empty()) return flag;
  return (trace.has_parent_path() ? trace.parent_path() : fs::path(".")) / "shaders";
}

TrainConfig config_or_default(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  return load_train_config(path);
}

std::vector<std::string> split_models(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string m;
  while (std::getline(ss, m, ',')) {
    if (!m.empty()) out.push_back(m);
  }
  return out;
}

nlohmann::json report_json(const TrainReport& r) {
  nlohmann::json j;
  j["train_frames"] = r.train_frames;
  j["test_frames"] = r.test_frames;
  j["epochs_run"] = r.epochs_run;
  j["train_mae_ms"] = r.train_mae_ms;
  j["test_mae_ms"] = r.test_mae_ms;
  j["train_rmse_ms"] = r.train_rmse_ms;
  j["test_rmse_ms"] = r.test_rmse_ms;
  return j;
}

std::string sweeps_csv(const std::vector<SweepResult>& sweeps) {
  std::ostringstream os;
  os << "stage,load,time_ms,marginal_ms,significant\n";
  for (const SweepResult& s : sweeps) {
    for (const SweepSample& p : s.samples) {
      os << stage_name(s.stage) << ',' << format_double(p.load) << ',' << format_double(p.time_ms) << ','
         << format_double(p.marginal_ms) << ',' << (p.significant ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

struct SimulateArgs {
  std::string scenario, profile, out;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  GpuProfile profile = load_profile(a.profile);
  ScenarioConfig scenario = load_scenario(a.scenario);
  scenario.seed = a.seed;
  spdlog::info("simulating {} frames of '{}' on '{}'", scenario.frames, scenario.name, profile.name);
  SimulatedRun run = generate_sequence(profile, scenario);
  fs::path out = a.out;
  fs::create_directories(out);
  std::ofstream trace(out / "trace.jsonl", std::ios::binary);
  write_trace(run.sequence, trace);
  trace.close();
  if (!trace) throw Error("cannot write " + (out / "trace.jsonl").string());
  write_actuals(out / "actuals.csv", run.sequence.frames, run.actual_ms, run.freq_mhz);
  save_shader_store(run.sequence.shader_store, out / "shaders");
  std::cout << "simulate: " << run.sequence.frames.size() << " frames, " << run.sequence.shader_store.size()
            << " shaders -> " << out.string() << '\n';
  return kExitOk;
}

struct BenchArgs {
  std::string profile, out, sweeps;
  double cap_ms = 100.0;
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& a) {
  GpuProfile profile = load_profile(a.profile);
  BenchConfig cfg;
  cfg.cap_ms = a.cap_ms;
  cfg.seed = a.seed;
  cfg.validate();
  std::vector<SweepResult> sweeps;
  PerfModel perf = run_suite(profile, cfg, &sweeps);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_perf_model(perf, a.out);
  if (!a.sweeps.empty()) write_text(a.sweeps, sweeps_csv(sweeps));
  std::cout << "bench: " << perf.functions.size() << " stage functions, baseline "
            << fixed6(perf.beta0_baseline_ms) << " ms -> " << a.out << '\n';
  return kExitOk;
}

struct DataArgs {
  std::string trace, shaders, actuals, perf, config, out;
};

int cmd_fit(const DataArgs& a) {
  TrainConfig cfg = config_or_default(a.config);
  FrameSequence seq = load_trace(a.trace, shader_dir_for(a.trace, a.shaders));
  Actuals actuals = read_actuals(a.actuals);
  PerfModel perf = load_perf_model(a.perf);
  OfflineResult fit = fit_trace(seq, actuals, perf, cfg);
  for (const std::string& w : fit.weights.meta.warnings) spdlog::warn("{}", w);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_weights(fit.weights, a.out, {{"report", report_json(fit.report)}});
  std::cout << "fit: " << fit.report.train_frames << " train / " << fit.report.test_frames
            << " test frames, test mae " << fixed6(fit.report.test_mae_ms) << " ms -> " << a.out << '\n';
  return kExitOk;
}

int cmd_run(const DataArgs& a, const std::string& weights_path, const std::string& mode) {
  TrainConfig cfg = config_or_default(a.config);
  FrameSequence seq = load_trace(a.trace, shader_dir_for(a.trace, a.shaders));
  Actuals actuals = read_actuals(a.actuals);
  PerfModel perf = load_perf_model(a.perf);
  ModelWeights weights = load_weights(weights_path);
  std::vector<FrameLog> logs = run_trace(seq, actuals, perf, weights, cfg, mode == "hybrid");
  write_text(a.out, frame_log_csv(logs));
  std::size_t switches = 0;
  for (std::size_t i = 1; i < logs.size(); ++i) switches += logs[i].mode != logs[i - 1].mode;
  std::cout << "run: " << logs.size() << " frames, " << switches << " mode switches -> " << a.out << '\n';
  return kExitOk;
}

struct CompareArgs {
  std::string models = "gm-h,gm-of,ar,fcm,frq";
  std::string format = "both";
  std::string scenario = "scenario";
  std::uint64_t seed = 0;
  double margin = 0.0;
  bool timing = false;
};

int cmd_compare(const DataArgs& a, const CompareArgs& c) {
  TrainConfig cfg = config_or_default(a.config);
  FrameSequence seq = load_trace(a.trace, shader_dir_for(a.trace, a.shaders));
  Actuals actuals = read_actuals(a.actuals);
  PerfModel perf = load_perf_model(a.perf);
  std::vector<std::string> models = split_models(c.models);
  if (models.empty()) throw InvariantError("no models requested");
  CompareOptions opts;
  opts.scenario = c.scenario;
  opts.seed = c.seed;
  opts.mfr_margin = c.margin;
  opts.timing = c.timing;
  CompareOutput out = compare_models(seq, actuals, perf, cfg, models, opts);
  fs::path dir = a.out;
  if (c.format == "csv" || c.format == "both") emit_report(out.results, ReportFormat::kCsv, dir, c.margin);
  if (c.format == "text" || c.format == "both") emit_report(out.results, ReportFormat::kText, dir, c.margin);
  for (const auto& [name, logs] : out.logs) write_text(dir / ("log_" + name + ".csv"), frame_log_csv(logs));
  if (c.timing) {
    for (const ModelResult& r : out.results) {
      if (r.overhead && r.overhead->mean_ms >= 2.2) {
        spdlog::warn("{}: mean predict time {:.3f} ms exceeds the 2.2 ms envelope", r.model, r.overhead->mean_ms);
      }
    }
  }
  std::cout << "compare: " << out.results.size() << " models over "
            << seq.frames.size() - cfg.offline_frame_count << " evaluated frames -> " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"GPU frametime estimation from per-stage pipeline workloads"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a trace, actual frametimes and shaders");
  simulate->add_option("--scenario", sim.scenario, "Scenario JSON")->required();
  simulate->add_option("--profile", sim.profile, "GPU profile JSON")->required();
  simulate->add_option("--seed", sim.seed, "RNG seed")->required();
  simulate->add_option("--out", sim.out, "Output directory")->required();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run the benchmark suite and write a perf model");
  bench_cmd->add_option("--profile", bench.profile, "GPU profile JSON")->required();
  bench_cmd->add_option("--out", bench.out, "Perf model JSON")->required();
  bench_cmd->add_option("--cap-ms", bench.cap_ms, "Frametime cap that ends each sweep")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Measurement noise seed")->capture_default_str();
  bench_cmd->add_option("--sweeps", bench.sweeps, "Also write raw sweep samples to this CSV");

  DataArgs data;
  auto add_data = [&](CLI::App* cmd, bool weights_out) {
    cmd->add_option("--trace", data.trace, "Trace file (JSON lines)")->required();
    cmd->add_option("--shaders", data.shaders, "Shader directory (default: shaders/ beside the trace)");
    cmd->add_option("--actuals", data.actuals, "Actual frametimes CSV")->required();
    cmd->add_option("--perf", data.perf, "Perf model JSON")->required();
    cmd->add_option("--config", data.config, "Training config JSON");
    cmd->add_option("--out", data.out, weights_out ? "Weights JSON" : "Output path")->required();
  };

  auto* fit = app.add_subcommand("fit", "Offline training on a trace");
  add_data(fit, true);
  fit->get_option("--config")->required();

  std::string weights, mode = "hybrid";
  auto* run = app.add_subcommand("run", "Stream a trace through the estimator");
  add_data(run, false);
  run->add_option("--weights", weights, "Weights JSON")->required();
  run->add_option("--mode", mode, "Training mode")->check(CLI::IsMember({"hybrid", "offline"}))->capture_default_str();

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "Compare the estimator with the baselines");
  add_data(compare, false);
  compare->add_option("--models", cmp.models, "Comma-separated models")->capture_default_str();
  compare->add_option("--format", cmp.format, "Report format")
      ->check(CLI::IsMember({"csv", "text", "both"}))
      ->capture_default_str();
  compare->add_option("--scenario", cmp.scenario, "Scenario label for the report")->capture_default_str();
  compare->add_option("--seed", cmp.seed, "Seed label for the report")->capture_default_str();
  compare->add_option("--mfr-margin", cmp.margin, "Relative margin for counting missed frames")->capture_default_str();
  compare->add_flag("--timing", cmp.timing, "Record predict time and RSS (not byte-reproducible)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*bench_cmd) return cmd_bench(bench);
    if (*fit) return cmd_fit(data);
    if (*run) return cmd_run(data, weights, mode);
    if (*compare) return cmd_compare(data, cmp);
  } catch (const InsufficientDataError& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
