#include "stiefsteer/solvers.hpp"

#include <chrono>
#include <cmath>

#include <json.hpp>

#include "stiefsteer/error.hpp"

namespace stiefsteer {

void RgdParams::validate() const {
  if (max_iters < 1) throw ConfigError("max_iters", "must be a positive integer");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho", "must lie in (0, 1)");
  if (!(c > 0.0 && c < 1.0)) throw ConfigError("c", "must lie in (0, 1)");
  if (!(eta_bar > 0.0) || !std::isfinite(eta_bar)) {
    throw ConfigError("eta_bar", "must be positive");
  }
  if (max_backtracks < 1) {
    throw ConfigError("max_backtracks", "must be a positive integer");
  }
  if (!(grad_tol >= 0.0)) throw ConfigError("grad_tol", "must be non-negative");
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIters: return "MaxIters";
    case SolveStatus::LineSearchStalled: return "LineSearchStalled";
    case SolveStatus::Singular: return "Singular";
  }
  return "Unknown";
}

SolveTrace rgd_solve(const SteerProblem& problem, const RgdParams& params,
                     std::uint64_t seed) {
  params.validate();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(clock::now() - start).count();
  };

  SolveTrace trace;
  trace.c = params.c;
  StiefelPoint v = init_v0(problem, seed).v0;
  double loss = 0.0;
  try {
    loss = objective(problem, v);
  } catch (const SingularPoint&) {
    trace.status = SolveStatus::Singular;
    trace.final_v = v;
    return trace;
  }

  for (int k = 0;; ++k) {
    IterRecord rec;
    rec.iter = k;
    rec.loss = loss;
    TangentVector grad = riemannian_grad(problem, v);
    rec.grad_norm = grad.norm();

    if (rec.grad_norm <= params.grad_tol) {
      trace.status = SolveStatus::Converged;
    } else if (k == params.max_iters) {
      trace.status = SolveStatus::MaxIters;
    } else {
      const TangentVector dir = -1.0 * grad;
      const double g2 = rec.grad_norm * rec.grad_norm;
      double eta = params.eta_bar;
      int rejected = 0;
      std::optional<StiefelPoint> next;
      double next_loss = 0.0;
      while (true) {
        try {
          StiefelPoint trial = polar_retract(v, eta * dir);
          const double trial_loss = objective(problem, trial);
          const double decrease = loss - trial_loss;
          if (decrease >= params.c * eta * g2 && decrease > 0.0) {
            next = std::move(trial);
            next_loss = trial_loss;
            break;
          }
        } catch (const SingularPoint&) {
          // Rank-deficient trial point: treat as insufficient decrease.
        } catch (const NumericError&) {
        }
        if (++rejected >= params.max_backtracks) break;
        eta *= params.rho;
      }
      if (!next) {
        rec.backtracks = rejected;
        rec.elapsed_s = elapsed();
        trace.records.push_back(rec);
        trace.status = SolveStatus::LineSearchStalled;
        break;
      }
      rec.eta = eta;
      rec.backtracks = rejected;
      rec.elapsed_s = elapsed();
      trace.records.push_back(rec);
      v = std::move(*next);
      loss = next_loss;
      continue;
    }
    rec.elapsed_s = elapsed();
    trace.records.push_back(rec);
    break;
  }
  trace.final_v = std::move(v);
  return trace;
}

std::string trace_records_jsonl(const SolveTrace& trace) {
  std::string out;
  for (const auto& r : trace.records) {
    nlohmann::json j = {{"iter", r.iter},           {"loss", r.loss},
                        {"grad_norm", r.grad_norm}, {"eta", r.eta},
                        {"backtracks", r.backtracks}, {"elapsed_s", r.elapsed_s}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string trace_summary_json(const SolveTrace& trace) {
  nlohmann::json j = {{"status", to_string(trace.status)},
                      {"iterations", trace.steps()}};
  if (!trace.records.empty()) {
    j["loss_before"] = trace.initial_loss();
    j["loss_after"] = trace.final_loss();
    j["grad_norm_final"] = trace.records.back().grad_norm;
    j["elapsed_s"] = trace.records.back().elapsed_s;
  }
  return j.dump();
}

QuadCoeffs quad_coeffs_general(const SteerProblem& problem, const StiefelPoint& v,
                               const TangentVector& s) {
  const Matrix& h = problem.h();
  const Matrix& vv = v.value();
  const Matrix& ss = s.value();
  const Matrix sum = h + vv;
  const Matrix a = sum.transpose() * sum;

  const Matrix hts = h.transpose() * ss;
  const Matrix first = hts + hts.transpose();
  const Matrix sts = ss.transpose() * ss;
  const Matrix htv = h.transpose() * vv;
  const Matrix second = htv * sts + sts * htv.transpose();

  Matrix x, y;
  try {
    x = solve_spd(a, first);
    y = solve_spd(a, second);
  } catch (const NotPositiveDefinite&) {
    throw SingularPoint("quad_coeffs_general: A is not positive definite");
  }

  QuadCoeffs q;
  q.d1 = x.trace();
  q.d2 = y.trace() / problem.alpha() + (x * x).trace();
  if (q.d2 > 0.0) {
    q.eta_star = std::max(0.0, q.d1 / q.d2);
  } else {
    q.eta_star = std::numeric_limits<double>::infinity();
    q.ill_posed = true;
  }
  return q;
}

QuadCoeffs quad_coeffs_closed_form(const SvdBundle& svd, double alpha) {
  QuadCoeffs q;
  const Vector& s = svd.sigma();
  for (Eigen::Index i = 0; i < svd.rank(); ++i) {
    const double s2 = s(i) * s(i);
    const double ratio = s2 / (s2 + alpha);
    q.d1 += 2.0 * ratio;
    q.d2 += 4.0 * ratio * ratio;
  }
  if (svd.rank() == 0) {
    q.zero_rank = true;
    q.eta_star = 0.0;
  } else {
    q.eta_star = q.d1 / q.d2;
  }
  return q;
}

OneStepResult onestep_solve(const SteerProblem& problem, std::uint64_t seed) {
  InitBundle init = init_v0(problem, seed);
  const double alpha = problem.alpha();
  QuadCoeffs coeffs = quad_coeffs_closed_form(init.svd, alpha);
  const double before = objective(problem, init.v0);

  if (coeffs.zero_rank) {
    return OneStepResult{init.v0, init.v0, coeffs, before, before};
  }

  // (alpha I + eta^2 H^T H)^{-1/2} = W diag(1/sqrt(alpha + eta^2 s^2)) W^T.
  const double eta = coeffs.eta_star;
  const Vector& s = init.svd.sigma();
  const Matrix& w = init.svd.w();
  const Vector scale =
      (alpha + (eta * s.array()).square()).sqrt().inverse().matrix();
  const Matrix root = w * scale.asDiagonal() * w.transpose();
  StiefelPoint v1(std::sqrt(alpha) * (init.v0.value() + eta * problem.h()) * root,
                  alpha);
  const double after = objective(problem, v1);
  return OneStepResult{init.v0, std::move(v1), coeffs, before, after};
}

RelativeGap relative_gap(double loss, double loss_ref) {
  const double diff = std::abs(loss - loss_ref);
  if (loss_ref == 0.0) return {diff, true};
  return {diff / std::abs(loss_ref), false};
}

}  // namespace stiefsteer
