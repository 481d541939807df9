#pragma once

// Per-token steering for a set of concurrent generation paths. Each step
// receives the current activations of the active paths, solves for orthogonal
// steering vectors, and returns them aligned by path id. Paths only ever leave
// the active set.
//
// Transport: one JSON object per line in each direction (handle_line).
//   request:  {"token_index": k, "active_ids": [...], "H": [[...d...], ...]}
//   response: {"token_index": k, "V": [[...d...], ...], "eta_star": x,
//              "alpha_used": x, "loss_before": x, "loss_after": x, "flags": [...]}
//   failure:  {"error": "...", "token_index": k}   (token_index when known)
// Numbers are written with 17 significant digits; non-finite values as null.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stiefsteer/solvers.hpp"

namespace stiefsteer {

struct OneStepSolver {};
struct RgdSolver {
  RgdParams params;
};
using SolverChoice = std::variant<OneStepSolver, RgdSolver>;

struct FixedAlpha {
  double value = 1.0;
};
struct SpectralScaledAlpha {
  double c = 0.5;
};
using AlphaPolicy = std::variant<FixedAlpha, SpectralScaledAlpha>;

// Seed for token k is base + k.
struct PerTokenSeed {
  std::uint64_t base = 42;
};
struct FixedSeed {
  std::uint64_t seed = 42;
};
using SeedPolicy = std::variant<PerTokenSeed, FixedSeed>;

struct SessionConfig {
  SolverChoice solver = OneStepSolver{};
  AlphaPolicy alpha_policy = SpectralScaledAlpha{};
  long dim = 0;
  SeedPolicy seed_policy = FixedSeed{};

  // Throws ConfigError with the field name.
  void validate() const;
};

struct StepRequest {
  long token_index = 0;
  std::vector<std::string> active_ids;
  // d x |active_ids|, column j belongs to active_ids[j].
  Matrix h;
};

enum class StepFlag { ZeroRank, InsufficientDimension, Degraded };
std::string to_string(StepFlag f);

struct StepResponse {
  long token_index = 0;
  // d x |active_ids|, aligned with the request ids. Zero when degraded.
  Matrix v;
  double eta_star = 0.0;
  double alpha_used = 0.0;
  std::optional<double> loss_before;
  std::optional<double> loss_after;
  std::vector<StepFlag> flags;

  bool has(StepFlag f) const;
};

struct SessionSummary {
  long tokens = 0;
  long zero_rank = 0;
  long insufficient_dimension = 0;
  long degraded = 0;
  long errors = 0;
  double mean_latency_s = 0.0;
};

class SteeringSession {
 public:
  // session_open. Throws ConfigError.
  explicit SteeringSession(SessionConfig config);

  // session_step. Throws ProtocolError on ordering or membership violations
  // and on malformed activations; the session state is left unchanged then.
  StepResponse step(const StepRequest& req);

  // session_close: counts over everything processed so far.
  SessionSummary close() const;

  // Line transport: one request line in, one response line out (no newline).
  // Never throws for bad input; errors come back as {"error": ...}.
  std::string handle_line(std::string_view line);

  long last_token() const { return last_token_; }
  const std::vector<std::string>& active_ids() const { return active_; }
  const std::vector<double>& step_latencies() const { return latencies_; }
  const SessionConfig& config() const { return config_; }

 private:
  void check_request(const StepRequest& req) const;

  SessionConfig config_;
  long last_token_ = -1;
  std::vector<std::string> active_;
  std::set<std::string> seen_;
  std::vector<double> latencies_;
  SessionSummary counts_;
};

// Throws ParseError. Column lengths must agree with each other; the
// dimension itself is checked by SteeringSession::step.
StepRequest parse_step_request(std::string_view line);
std::string format_step_response(const StepResponse& r);
std::string format_error_response(const std::string& message,
                                  std::optional<long> token_index);
std::string format_session_summary(const SessionSummary& s);

}  // namespace stiefsteer
