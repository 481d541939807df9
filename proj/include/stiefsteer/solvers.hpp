#pragma once

// Riemannian gradient descent with backtracking line search, and the
// one-step update from the null-space start along S = H with the closed-form
// quadratic-model stepsize.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "stiefsteer/steer.hpp"

namespace stiefsteer {

struct RgdParams {
  int max_iters = 100;       // K
  double rho = 0.2;          // backtracking multiplier
  double c = 1e-4;           // sufficient-decrease constant
  double eta_bar = 100.0;    // initial trial stepsize
  int max_backtracks = 60;   // rejections before LineSearchStalled
  double grad_tol = 0.0;     // stop once ||grad||_F <= grad_tol

  // Throws ConfigError naming the first invalid field.
  void validate() const;
};

enum class SolveStatus { Converged, MaxIters, LineSearchStalled, Singular };

std::string to_string(SolveStatus s);

// Record k describes iterate V_k: its loss and gradient norm, and the step
// taken from it (eta = 0, backtracks = 0 on the last record).
struct IterRecord {
  int iter = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double eta = 0.0;
  int backtracks = 0;
  double elapsed_s = 0.0;
};

struct SolveTrace {
  std::vector<IterRecord> records;
  std::optional<StiefelPoint> final_v;
  SolveStatus status = SolveStatus::MaxIters;
  double c = 0.0;  // acceptance constant the trace was produced with

  double initial_loss() const { return records.front().loss; }
  double final_loss() const { return records.back().loss; }
  int steps() const { return static_cast<int>(records.size()) - 1; }
};

// Gradient descent with backtracking, started from init_v0(problem, seed).
// InsufficientDimension propagates.
SolveTrace rgd_solve(const SteerProblem& problem, const RgdParams& params,
                     std::uint64_t seed);

// Trace serialization: one JSON object per line with fields
// iter, loss, grad_norm, eta, backtracks, elapsed_s; and a summary object.
std::string trace_records_jsonl(const SolveTrace& trace);
std::string trace_summary_json(const SolveTrace& trace);

struct QuadCoeffs {
  double d1 = 0.0;
  double d2 = 0.0;
  // +inf when ill_posed.
  double eta_star = 0.0;
  bool ill_posed = false;   // D2 <= 0: the quadratic model is unbounded below
  bool zero_rank = false;   // closed form with rank(H) = 0
};

// Second-order coefficients of eta -> l(R_V(eta S)) for tangent S:
//   D1 = Tr[A^{-1}(H^T S + S^T H)]
//   D2 = Tr[A^{-1}(H^T V S^T S + S^T S V^T H)] / alpha + Tr[(A^{-1}(H^T S + S^T H))^2]
// with A = (H+V)^T (H+V). Throws SingularPoint.
QuadCoeffs quad_coeffs_general(const SteerProblem& problem, const StiefelPoint& v,
                               const TangentVector& s);

// The same coefficients at (V0, S = H), from the singular values alone:
//   D1 = 2 sum s^2/(s^2+alpha),  D2 = 4 sum s^4/(s^2+alpha)^2.
QuadCoeffs quad_coeffs_closed_form(const SvdBundle& svd, double alpha);

struct OneStepResult {
  StiefelPoint v0;
  StiefelPoint v1;
  QuadCoeffs coeffs;
  double loss_before = 0.0;
  double loss_after = 0.0;
};

// V1 = sqrt(alpha) (V0 + eta* H) W (alpha I + (eta* Sigma)^2)^{-1/2} W^T.
// rank(H) = 0 returns V1 = V0 with coeffs.zero_rank set.
OneStepResult onestep_solve(const SteerProblem& problem, std::uint64_t seed);

struct RelativeGap {
  double value = 0.0;
  bool zero_reference = false;  // |loss - ref| reported unnormalized
};

RelativeGap relative_gap(double loss, double loss_ref);

}  // namespace stiefsteer
