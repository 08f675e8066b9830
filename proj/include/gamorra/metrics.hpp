#pragma once

// Evaluation metrics (missed frames ratio, estimation error, prediction
// overhead) and the comparison report writers.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gamorra/error.hpp"

namespace gamorra {

// Percentage of frames whose estimate falls below actual * (1 - margin).
inline double mfr(std::span<const double> estimates, std::span<const double> actuals, double margin = 0.0) {
  if (estimates.size() != actuals.size()) throw InvariantError("mfr: length mismatch");
  if (estimates.empty()) throw InsufficientDataError("mfr: empty input");
  if (!(margin >= 0.0)) throw InvariantError("mfr: margin must be >= 0");
  std::size_t missed = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i] < actuals[i] * (1.0 - margin)) ++missed;
  }
  return 100.0 * static_cast<double>(missed) / static_cast<double>(estimates.size());
}

struct ErrorStats {
  double mean_abs_ms = 0.0;
  double max_abs_ms = 0.0;
  double min_abs_ms = 0.0;
  double mean_pct = 0.0;
};

inline ErrorStats error_stats(std::span<const double> estimates, std::span<const double> actuals) {
  if (estimates.size() != actuals.size()) throw InvariantError("error_stats: length mismatch");
  if (estimates.empty()) throw InsufficientDataError("error_stats: empty input");
  ErrorStats s;
  s.min_abs_ms = INFINITY;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (!(actuals[i] > 0.0)) throw InvariantError("error_stats: actual frametime must be > 0");
    double e = std::abs(estimates[i] - actuals[i]);
    s.mean_abs_ms += e;
    s.max_abs_ms = std::max(s.max_abs_ms, e);
    s.min_abs_ms = std::min(s.min_abs_ms, e);
    s.mean_pct += e / actuals[i];
  }
  const double n = static_cast<double>(estimates.size());
  s.mean_abs_ms /= n;
  s.mean_pct = 100.0 * s.mean_pct / n;
  return s;
}

struct OverheadReport {
  double mean_ms = 0.0;
  double pct = 0.0;
};

// Mean predict-path time and its mean share of the frame time.
inline OverheadReport overhead_report(std::span<const double> timing_ms, std::span<const double> frametime_ms) {
  if (timing_ms.size() != frametime_ms.size()) throw InvariantError("overhead_report: length mismatch");
  if (timing_ms.empty()) throw InsufficientDataError("overhead_report: empty input");
  OverheadReport r;
  for (std::size_t i = 0; i < timing_ms.size(); ++i) {
    if (!(frametime_ms[i] > 0.0)) throw InvariantError("overhead_report: frametime must be > 0");
    r.mean_ms += timing_ms[i];
    r.pct += timing_ms[i] / frametime_ms[i];
  }
  r.mean_ms /= static_cast<double>(timing_ms.size());
  r.pct = 100.0 * r.pct / static_cast<double>(timing_ms.size());
  return r;
}

// Resident set size of this process in MB, from /proc. Approximate.
inline std::optional<double> rss_mb() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("VmRSS:")) {
      std::istringstream ss(line.substr(6));
      double kb = 0.0;
      ss >> kb;
      return kb / 1024.0;
    }
  }
  return std::nullopt;
}

struct ModelResult {
  std::string model;
  std::string scenario;
  std::uint64_t seed = 0;
  double mfr_pct = 0.0;
  ErrorStats errors;
  std::optional<OverheadReport> overhead;  // absent unless timing was requested
  std::optional<double> rss;
};

inline ModelResult summarize(std::string model, std::string scenario, std::uint64_t seed,
                             std::span<const double> estimates, std::span<const double> actuals,
                             double margin = 0.0) {
  ModelResult r;
  r.model = std::move(model);
  r.scenario = std::move(scenario);
  r.seed = seed;
  r.mfr_pct = mfr(estimates, actuals, margin);
  r.errors = error_stats(estimates, actuals);
  return r;
}

inline constexpr const char* kReportHeader =
    "model,scenario,seed,mfr_pct,mean_abs_ms,max_abs_ms,min_abs_ms,mean_pct,overhead_ms,overhead_pct,rss_mb";

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string report_csv(std::span<const ModelResult> results) {
  std::ostringstream os;
  os << kReportHeader << '\n';
  for (const ModelResult& r : results) {
    os << r.model << ',' << r.scenario << ',' << r.seed << ',' << fixed6(r.mfr_pct) << ','
       << fixed6(r.errors.mean_abs_ms) << ',' << fixed6(r.errors.max_abs_ms) << ',' << fixed6(r.errors.min_abs_ms)
       << ',' << fixed6(r.errors.mean_pct) << ',' << (r.overhead ? fixed6(r.overhead->mean_ms) : "na") << ','
       << (r.overhead ? fixed6(r.overhead->pct) : "na") << ',' << (r.rss ? fixed6(*r.rss) : "na") << '\n';
  }
  return os.str();
}

// Aligned table plus a head-to-head line naming the best model per metric.
inline std::string report_text(std::span<const ModelResult> results, double margin = 0.0) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-16s %6s %9s %12s %12s %12s %9s\n", "model", "scenario", "seed", "mfr_%",
                "mean_abs_ms", "max_abs_ms", "min_abs_ms", "mean_%");
  os << line;
  for (const ModelResult& r : results) {
    std::snprintf(line, sizeof line, "%-8s %-16s %6llu %9.3f %12.4f %12.4f %12.4f %9.3f\n", r.model.c_str(),
                  r.scenario.c_str(), static_cast<unsigned long long>(r.seed), r.mfr_pct, r.errors.mean_abs_ms,
                  r.errors.max_abs_ms, r.errors.min_abs_ms, r.errors.mean_pct);
    os << line;
  }
  if (!results.empty()) {
    auto best_err = std::min_element(results.begin(), results.end(), [](const auto& a, const auto& b) {
      return a.errors.mean_abs_ms < b.errors.mean_abs_ms;
    });
    auto best_mfr = std::min_element(results.begin(), results.end(),
                                     [](const auto& a, const auto& b) { return a.mfr_pct < b.mfr_pct; });
    os << "lowest mean abs error: " << best_err->model << "; lowest MFR: " << best_mfr->model << '\n';
  }
  os << "MFR margin: " << fixed6(margin) << '\n';
  return os.str();
}

enum class ReportFormat { kCsv, kText };

// Writes report.csv or report.txt into `dir`; returns the file written.
inline std::filesystem::path emit_report(std::span<const ModelResult> results, ReportFormat format,
                                         const std::filesystem::path& dir, double margin = 0.0) {
  if (results.empty()) throw InvariantError("emit_report: no results");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::filesystem::path path = dir / (format == ReportFormat::kCsv ? "report.csv" : "report.txt");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report: " + path.string());
  out << (format == ReportFormat::kCsv ? report_csv(results) : report_text(results, margin));
  if (!out) throw Error("cannot write report: " + path.string());
  return path;
}

}  // namespace gamorra
