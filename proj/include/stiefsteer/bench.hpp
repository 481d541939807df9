#pragma once

// Synthetic replication of the RGD vs one-step comparison: Gaussian instances,
// per-iteration relative gap curves, and end-to-end timings.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "stiefsteer/solvers.hpp"

namespace stiefsteer {

struct Shape {
  long d = 0;
  long n = 0;
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct BenchConfig {
  std::vector<Shape> shapes;
  int trials = 50;
  double C = 0.5;
  RgdParams rgd;
  std::uint64_t base_seed = 42;
  std::string instance_distribution = "GaussianStd";

  // Throws ConfigError. Every shape needs d >= 2N.
  void validate() const;
};

// JSON document with exactly the BenchConfig field names; "rgd" is an object
// with the RgdParams field names. Unknown fields are rejected.
BenchConfig parse_bench_config(std::istream& in);
BenchConfig load_bench_config(const std::filesystem::path& path);

// d x N matrix of i.i.d. N(0,1) entries, deterministic per (d, N, seed).
Matrix gen_instance(long d, long n, std::uint64_t seed);

struct ShapeSummary {
  Shape shape;
  int trials_ok = 0;
  int trials_failed = 0;
  std::vector<std::string> failures;
  // Index k: gap of the RGD iterate V_k against the RGD final loss.
  std::vector<double> rgd_mean_gap;
  std::vector<double> rgd_std_gap;
  double onestep_mean_gap = 0.0;
  double onestep_std_gap = 0.0;
  double rgd_mean_seconds = 0.0;
  double onestep_mean_seconds = 0.0;
  // Trials where the one-step loss did not improve on V0.
  int onestep_non_improving = 0;
  // Smallest signed gap (loss - ref)/|ref| seen over all iterates and one-step.
  double min_signed_gap = 0.0;

  double init_mean_gap() const { return rgd_mean_gap.empty() ? 0.0 : rgd_mean_gap.front(); }
};

struct GapSummary {
  int max_iters = 0;
  std::vector<ShapeSummary> shapes;
};

GapSummary run_bench(const BenchConfig& config);

// Writes curve_d<d>_N<N>.csv per shape and summary.csv into dir (created if
// missing). Throws Error with the offending path on I/O failure.
void export_results(const GapSummary& summary, const std::filesystem::path& dir);

std::string curve_file_name(const Shape& s);

struct CurveRow {
  int iter = 0;
  double mean_gap = 0.0;
  double std_gap = 0.0;
};
struct SummaryRow {
  long d = 0;
  long n = 0;
  std::string algo;
  double mean_seconds = 0.0;
  double mean_final_gap = 0.0;
  int trials_ok = 0;
  int trials_failed = 0;
};

std::vector<CurveRow> read_curve_file(const std::filesystem::path& path);
std::vector<SummaryRow> read_summary_file(const std::filesystem::path& path);

// "%.10g", the precision of the exported tables.
std::string format_double10(double v);

}  // namespace stiefsteer
