// stiefsteer: solve, bench, session and check front end.
//
// Exit codes: 0 success, 1 property failure, 2 usage/parse/config error,
// 3 runtime (solver or I/O) error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "stiefsteer/bench.hpp"
#include "stiefsteer/checks.hpp"
#include "stiefsteer/error.hpp"
#include "stiefsteer/matrix_io.hpp"
#include "stiefsteer/session.hpp"
#include "stiefsteer/solvers.hpp"

namespace fs = std::filesystem;
using namespace stiefsteer;

namespace {

constexpr int kOk = 0;
constexpr int kPropertyFailure = 1;
constexpr int kUsage = 2;
constexpr int kRuntime = 3;

struct RgdFlags {
  int iters = 100;
  double rho = 0.2;
  double c = 1e-4;
  double eta_bar = 100.0;

  RgdParams params() const {
    RgdParams p;
    p.max_iters = iters;
    p.rho = rho;
    p.c = c;
    p.eta_bar = eta_bar;
    return p;
  }
};

struct AlphaFlags {
  std::optional<double> alpha;
  std::optional<double> c;
};

void add_rgd_flags(CLI::App* cmd, RgdFlags& f) {
  cmd->add_option("--iters", f.iters, "RGD iteration budget K")->capture_default_str();
  cmd->add_option("--rho", f.rho, "backtracking multiplier in (0,1)")->capture_default_str();
  cmd->add_option("--c", f.c, "sufficient-decrease constant in (0,1)")->capture_default_str();
  cmd->add_option("--eta-bar", f.eta_bar, "initial trial stepsize")->capture_default_str();
}

void add_alpha_flags(CLI::App* cmd, AlphaFlags& f) {
  auto* a = cmd->add_option("--alpha", f.alpha, "fixed squared steering magnitude");
  auto* c = cmd->add_option("--C", f.c, "alpha = C * ||H||_2^2 (default 0.5)");
  a->excludes(c);
}

int fail(int code, const std::string& msg) {
  std::cerr << "stiefsteer: " << msg << '\n';
  return code;
}

int cmd_solve(const std::string& matrix_path, const std::string& algo,
              const AlphaFlags& af, std::uint64_t seed, const RgdFlags& rf,
              const std::string& out_path, const std::string& trace_path) {
  Matrix h;
  RgdParams params = rf.params();
  try {
    params.validate();
    h = read_matrix_file(matrix_path);
  } catch (const Error& e) {
    return fail(kUsage, e.what());
  }

  nlohmann::json summary;
  try {
    const double alpha = af.alpha ? *af.alpha : compute_alpha(h, af.c.value_or(0.5));
    std::optional<SteerProblem> problem;
    try {
      problem.emplace(h, alpha);
    } catch (const Error& e) {
      return fail(kUsage, e.what());
    }
    summary["algo"] = algo;
    summary["alpha"] = alpha;
    Matrix v;
    if (algo == "onestep") {
      const OneStepResult one = onestep_solve(*problem, seed);
      v = one.v1.value();
      summary["loss_before"] = one.loss_before;
      summary["loss_after"] = one.loss_after;
      summary["eta"] = one.coeffs.eta_star;
      summary["D1"] = one.coeffs.d1;
      summary["D2"] = one.coeffs.d2;
      summary["zero_rank"] = one.coeffs.zero_rank;
    } else {
      const SolveTrace trace = rgd_solve(*problem, params, seed);
      v = trace.final_v->value();
      summary = nlohmann::json::parse(trace_summary_json(trace));
      summary["algo"] = algo;
      summary["alpha"] = alpha;
      summary["eta"] = trace.records.size() >= 2
                           ? trace.records[trace.records.size() - 2].eta
                           : 0.0;
      if (!trace_path.empty()) {
        std::ofstream t(trace_path);
        if (!t || !(t << trace_records_jsonl(trace))) {
          return fail(kRuntime, "cannot write trace " + trace_path);
        }
      }
    }
    if (!out_path.empty()) write_matrix_file(out_path, v);
    else write_matrix(std::cout, v);
  } catch (const ConfigError& e) {
    return fail(kUsage, e.what());
  } catch (const Error& e) {
    return fail(kRuntime, e.what());
  }
  std::cout << summary.dump() << '\n';
  return kOk;
}

int cmd_bench(const std::string& config_path, const std::string& out_dir) {
  BenchConfig cfg;
  try {
    cfg = load_bench_config(config_path);
  } catch (const Error& e) {
    return fail(kUsage, e.what());
  }
  std::vector<fs::path> written;
  try {
    const GapSummary summary = run_bench(cfg);
    for (const auto& s : summary.shapes) written.push_back(fs::path(out_dir) / curve_file_name(s.shape));
    written.push_back(fs::path(out_dir) / "summary.csv");
    export_results(summary, out_dir);
    for (const auto& s : summary.shapes) {
      std::printf("d=%ld N=%ld ok=%d failed=%d init_gap=%.4f%% onestep_gap=%.4f%% "
                  "rgd_s=%.4g onestep_s=%.4g\n",
                  s.shape.d, s.shape.n, s.trials_ok, s.trials_failed,
                  100.0 * s.init_mean_gap(), 100.0 * s.onestep_mean_gap,
                  s.rgd_mean_seconds, s.onestep_mean_seconds);
      for (const auto& f : s.failures) std::fprintf(stderr, "  %s\n", f.c_str());
    }
  } catch (const Error& e) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    return fail(kRuntime, e.what());
  }
  return kOk;
}

int cmd_check(std::uint64_t seed, const std::string& scale, const std::string& fault) {
  CheckOptions opts;
  opts.seed = seed;
  opts.scale = scale == "full" ? CheckScale::Full : CheckScale::Quick;
  if (fault == "retraction") opts.retraction = corrupted_retraction;
  bool ok = true;
  for (const auto& r : run_property_checks(opts)) {
    ok = ok && r.passed;
    std::printf("%s %s (%d trials)%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.trials, r.detail.empty() ? "" : ": ", r.detail.c_str());
  }
  return ok ? kOk : kPropertyFailure;
}

int cmd_session(SessionConfig cfg) {
  std::optional<SteeringSession> session;
  try {
    session.emplace(std::move(cfg));
  } catch (const Error& e) {
    return fail(kUsage, e.what());
  }
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::cout << session->handle_line(line) << '\n' << std::flush;
    if (!std::cout) return fail(kRuntime, "failed writing to standard output");
  }
  if (std::cin.bad()) return fail(kRuntime, "failed reading standard input");
  std::cerr << format_session_summary(session->close()) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orthogonal steering vectors by log-det volume maximization"};
  app.require_subcommand(1);

  std::uint64_t seed = 42;
  RgdFlags rgd;
  AlphaFlags alpha;
  std::string algo = "onestep";

  auto* solve = app.add_subcommand("solve", "solve one instance read from a matrix file");
  std::string matrix_path, out_path, trace_path;
  solve->add_option("matrix", matrix_path, "d x N activation matrix file")->required();
  solve->add_option("--algo", algo, "onestep or rgd")
      ->check(CLI::IsMember({"onestep", "rgd"}))
      ->capture_default_str();
  add_alpha_flags(solve, alpha);
  solve->add_option("--seed", seed, "initialization seed")->capture_default_str();
  add_rgd_flags(solve, rgd);
  solve->add_option("--out", out_path, "write V here (default: standard output)");
  solve->add_option("--trace", trace_path, "write the RGD per-iteration trace (JSON lines)");

  auto* bench = app.add_subcommand("bench", "RGD vs one-step gap and timing benchmark");
  std::string config_path, out_dir;
  bench->add_option("--config", config_path, "benchmark config (JSON)")->required();
  bench->add_option("--out", out_dir, "output directory")->required();

  auto* session = app.add_subcommand("session", "serve the steering protocol on stdin/stdout");
  long dim = 0;
  std::string seed_mode = "fixed";
  session->add_option("--algo", algo, "onestep or rgd")
      ->check(CLI::IsMember({"onestep", "rgd"}))
      ->capture_default_str();
  add_alpha_flags(session, alpha);
  session->add_option("--seed", seed, "seed (fixed) or base seed (per-token)")->capture_default_str();
  session->add_option("--seed-mode", seed_mode, "fixed or per-token")
      ->check(CLI::IsMember({"fixed", "per-token"}))
      ->capture_default_str();
  session->add_option("--dim", dim, "activation dimension d")->required();
  add_rgd_flags(session, rgd);

  auto* check = app.add_subcommand("check", "run the randomized property suites");
  std::string scale = "quick";
  std::string fault;
  check->add_option("--seed", seed, "suite seed")->capture_default_str();
  check->add_option("--scale", scale, "quick or full")
      ->check(CLI::IsMember({"quick", "full"}))
      ->capture_default_str();
  check->add_option("--fault", fault, "inject a fault (test hook)")
      ->check(CLI::IsMember({"retraction"}))
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (solve->parsed()) {
    return cmd_solve(matrix_path, algo, alpha, seed, rgd, out_path, trace_path);
  }
  if (bench->parsed()) return cmd_bench(config_path, out_dir);
  if (check->parsed()) return cmd_check(seed, scale, fault);

  SessionConfig cfg;
  cfg.dim = dim;
  if (algo == "rgd") cfg.solver = RgdSolver{rgd.params()};
  if (alpha.alpha) cfg.alpha_policy = FixedAlpha{*alpha.alpha};
  else cfg.alpha_policy = SpectralScaledAlpha{alpha.c.value_or(0.5)};
  if (seed_mode == "per-token") cfg.seed_policy = PerTokenSeed{seed};
  else cfg.seed_policy = FixedSeed{seed};
  return cmd_session(std::move(cfg));
}
