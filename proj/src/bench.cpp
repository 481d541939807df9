#include "stiefsteer/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stiefsteer/error.hpp"

namespace stiefsteer {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) throw ConfigError(where + key, "unknown field");
  }
}

template <typename T>
T get_field(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + key, e.what());
  }
}

struct Stats {
  double mean = 0.0;
  double std = 0.0;
};

Stats stats(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": bad number '" + s + "'");
  }
}

}  // namespace

void BenchConfig::validate() const {
  if (trials < 1) throw ConfigError("trials", "must be >= 1");
  if (!(C > 0.0) || !std::isfinite(C)) throw ConfigError("C", "must be positive");
  if (instance_distribution != "GaussianStd") {
    throw ConfigError("instance_distribution", "only GaussianStd is supported");
  }
  for (const auto& s : shapes) {
    if (s.n < 1 || s.d < 2 * s.n) {
      throw ConfigError("shapes", "shape (" + std::to_string(s.d) + ", " +
                                      std::to_string(s.n) +
                                      ") violates N >= 1 and d >= 2N");
    }
  }
  rgd.validate();
}

BenchConfig parse_bench_config(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bench config: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("bench config: expected an object");
  reject_unknown(doc, {"shapes", "trials", "C", "rgd", "base_seed", "instance_distribution"},
                 "");

  BenchConfig cfg;
  if (doc.contains("shapes")) {
    const json& shapes = doc["shapes"];
    if (!shapes.is_array()) throw ConfigError("shapes", "expected an array");
    for (const auto& s : shapes) {
      if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() ||
          !s[1].is_number_integer()) {
        throw ConfigError("shapes", "each shape must be [d, N]");
      }
      cfg.shapes.push_back({s[0].get<long>(), s[1].get<long>()});
    }
  }
  if (doc.contains("trials")) cfg.trials = get_field<int>(doc, "trials", "");
  if (doc.contains("C")) cfg.C = get_field<double>(doc, "C", "");
  if (doc.contains("base_seed")) cfg.base_seed = get_field<std::uint64_t>(doc, "base_seed", "");
  if (doc.contains("instance_distribution")) {
    cfg.instance_distribution = get_field<std::string>(doc, "instance_distribution", "");
  }
  if (doc.contains("rgd")) {
    const json& r = doc["rgd"];
    if (!r.is_object()) throw ConfigError("rgd", "expected an object");
    reject_unknown(r, {"max_iters", "rho", "c", "eta_bar", "max_backtracks", "grad_tol"},
                   "rgd.");
    if (r.contains("max_iters")) cfg.rgd.max_iters = get_field<int>(r, "max_iters", "rgd.");
    if (r.contains("rho")) cfg.rgd.rho = get_field<double>(r, "rho", "rgd.");
    if (r.contains("c")) cfg.rgd.c = get_field<double>(r, "c", "rgd.");
    if (r.contains("eta_bar")) cfg.rgd.eta_bar = get_field<double>(r, "eta_bar", "rgd.");
    if (r.contains("max_backtracks")) {
      cfg.rgd.max_backtracks = get_field<int>(r, "max_backtracks", "rgd.");
    }
    if (r.contains("grad_tol")) cfg.rgd.grad_tol = get_field<double>(r, "grad_tol", "rgd.");
  }
  cfg.validate();
  return cfg;
}

BenchConfig load_bench_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open bench config " + path.string());
  return parse_bench_config(in);
}

Matrix gen_instance(long d, long n, std::uint64_t seed) {
  if (n < 1 || d < 2 * n) {
    throw DimensionError("gen_instance: need N >= 1 and d >= 2N, got d=" +
                         std::to_string(d) + " N=" + std::to_string(n));
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(n)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix h(d, n);
  for (long j = 0; j < n; ++j) {
    for (long i = 0; i < d; ++i) h(i, j) = normal(rng);
  }
  return h;
}

GapSummary run_bench(const BenchConfig& config) {
  config.validate();
  using clock = std::chrono::steady_clock;
  const int k_max = config.rgd.max_iters;

  GapSummary summary;
  summary.max_iters = k_max;
  for (const Shape& shape : config.shapes) {
    ShapeSummary out;
    out.shape = shape;
    std::vector<std::vector<double>> curve(static_cast<std::size_t>(k_max + 1));
    std::vector<double> onestep_gaps;
    double rgd_seconds = 0.0;
    double onestep_seconds = 0.0;
    double min_signed = std::numeric_limits<double>::infinity();

    for (int t = 0; t < config.trials; ++t) {
      const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(t);
      try {
        Matrix h = gen_instance(shape.d, shape.n, seed);
        const double alpha = compute_alpha(h, config.C);
        const SteerProblem problem(std::move(h), alpha);

        const auto t0 = clock::now();
        const SolveTrace trace = rgd_solve(problem, config.rgd, seed);
        const auto t1 = clock::now();
        const OneStepResult one = onestep_solve(problem, seed);
        const auto t2 = clock::now();

        if (trace.status == SolveStatus::Singular) {
          throw SingularPoint("RGD start point is singular");
        }
        const double ref = trace.final_loss();
        for (int k = 0; k <= k_max; ++k) {
          // A run that stops early holds its final loss for the remaining iterations.
          const auto idx = std::min<std::size_t>(static_cast<std::size_t>(k),
                                                 trace.records.size() - 1);
          const double loss = trace.records[idx].loss;
          curve[static_cast<std::size_t>(k)].push_back(relative_gap(loss, ref).value);
          min_signed = std::min(min_signed, (loss - ref) / std::abs(ref));
        }
        onestep_gaps.push_back(relative_gap(one.loss_after, ref).value);
        min_signed = std::min(min_signed, (one.loss_after - ref) / std::abs(ref));
        if (!(one.loss_after < one.loss_before)) ++out.onestep_non_improving;

        rgd_seconds += std::chrono::duration<double>(t1 - t0).count();
        onestep_seconds += std::chrono::duration<double>(t2 - t1).count();
        ++out.trials_ok;
      } catch (const Error& e) {
        ++out.trials_failed;
        out.failures.push_back("trial " + std::to_string(t) + ": " + e.what());
      }
    }

    for (const auto& gaps : curve) {
      const Stats s = stats(gaps);
      out.rgd_mean_gap.push_back(s.mean);
      out.rgd_std_gap.push_back(s.std);
    }
    const Stats one = stats(onestep_gaps);
    out.onestep_mean_gap = one.mean;
    out.onestep_std_gap = one.std;
    if (out.trials_ok > 0) {
      out.rgd_mean_seconds = rgd_seconds / out.trials_ok;
      out.onestep_mean_seconds = onestep_seconds / out.trials_ok;
      out.min_signed_gap = min_signed;
    }
    summary.shapes.push_back(std::move(out));
  }
  return summary;
}

std::string format_double10(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string curve_file_name(const Shape& s) {
  return "curve_d" + std::to_string(s.d) + "_N" + std::to_string(s.n) + ".csv";
}

void export_results(const GapSummary& summary, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());

  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw Error("cannot open " + p.string() + " for writing");
    return f;
  };
  auto finish = [](std::ofstream& f, const std::filesystem::path& p) {
    f.close();
    if (!f) throw Error("write failed for " + p.string());
  };

  for (const auto& s : summary.shapes) {
    const auto path = dir / curve_file_name(s.shape);
    auto f = open(path);
    f << "iter,mean_gap,std_gap\n";
    for (std::size_t k = 0; k < s.rgd_mean_gap.size(); ++k) {
      f << k << ',' << format_double10(s.rgd_mean_gap[k]) << ','
        << format_double10(s.rgd_std_gap[k]) << '\n';
    }
    finish(f, path);
  }

  const auto path = dir / "summary.csv";
  auto f = open(path);
  f << "d,N,algo,mean_seconds,mean_final_gap,trials_ok,trials_failed\n";
  for (const auto& s : summary.shapes) {
    const double rgd_final = s.rgd_mean_gap.empty() ? 0.0 : s.rgd_mean_gap.back();
    f << s.shape.d << ',' << s.shape.n << ",rgd," << format_double10(s.rgd_mean_seconds)
      << ',' << format_double10(rgd_final) << ',' << s.trials_ok << ','
      << s.trials_failed << '\n';
    f << s.shape.d << ',' << s.shape.n << ",onestep,"
      << format_double10(s.onestep_mean_seconds) << ','
      << format_double10(s.onestep_mean_gap) << ',' << s.trials_ok << ','
      << s.trials_failed << '\n';
  }
  finish(f, path);
}

std::vector<CurveRow> read_curve_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "iter,mean_gap,std_gap") {
    throw ParseError(path.string() + ": bad curve header");
  }
  std::vector<CurveRow> rows;
  while (std::getline(in, line)) {
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw ParseError(path.string() + ": bad row '" + line + "'");
    rows.push_back({static_cast<int>(to_double(cells[0], path)), to_double(cells[1], path),
                    to_double(cells[2], path)});
  }
  return rows;
}

std::vector<SummaryRow> read_summary_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line != "d,N,algo,mean_seconds,mean_final_gap,trials_ok,trials_failed") {
    throw ParseError(path.string() + ": bad summary header");
  }
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    const auto cells = split_csv(line);
    if (cells.size() != 7) throw ParseError(path.string() + ": bad row '" + line + "'");
    rows.push_back({static_cast<long>(to_double(cells[0], path)),
                    static_cast<long>(to_double(cells[1], path)), cells[2],
                    to_double(cells[3], path), to_double(cells[4], path),
                    static_cast<int>(to_double(cells[5], path)),
                    static_cast<int>(to_double(cells[6], path))});
  }
  return rows;
}

}  // namespace stiefsteer
