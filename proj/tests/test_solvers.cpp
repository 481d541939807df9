#include <doctest.h>

#include <json.hpp>

#include "oracles.hpp"
#include "stiefsteer/error.hpp"
#include "stiefsteer/solvers.hpp"

using namespace stiefsteer;

namespace {

Matrix col3(double a, double b, double c) {
  Matrix m(3, 1);
  m << a, b, c;
  return m;
}

}  // namespace

TEST_CASE("RgdParams validation") {
  RgdParams p;
  CHECK_NOTHROW(p.validate());
  auto field_of = [](RgdParams q) {
    try {
      q.validate();
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  RgdParams q = p;
  q.rho = 1.5;
  CHECK(field_of(q) == "rho");
  q = p;
  q.rho = 0.0;
  CHECK(field_of(q) == "rho");
  q = p;
  q.c = 1.0;
  CHECK(field_of(q) == "c");
  q = p;
  q.max_iters = 0;
  CHECK(field_of(q) == "max_iters");
  q = p;
  q.eta_bar = -1;
  CHECK(field_of(q) == "eta_bar");
  q = p;
  q.max_backtracks = 0;
  CHECK(field_of(q) == "max_backtracks");
}

TEST_CASE("rgd_solve: zero activations converge immediately") {
  RgdParams params;
  params.grad_tol = 1e-12;
  const double alpha = 2.0;
  const SolveTrace t = rgd_solve(SteerProblem(Matrix::Zero(6, 3), alpha), params, 7);
  CHECK(t.status == SolveStatus::Converged);
  CHECK(t.steps() == 0);
  CHECK(t.final_loss() == doctest::Approx(-3.0 * std::log(alpha)).epsilon(1e-14));
}

TEST_CASE("rgd_solve: single column reaches the optimum") {
  const SteerProblem p(col3(2, 0, 0), 1.0);
  const SolveTrace t = rgd_solve(p, RgdParams{}, 42);
  CHECK(std::abs(t.final_loss() + std::log(9.0)) <= 1e-4);
  CHECK(t.final_loss() >= -std::log(9.0) - 1e-12);
  CHECK(t.records.front().loss == doctest::Approx(-std::log(5.0)).epsilon(1e-14));
}

TEST_CASE("rgd_solve: monotone, sufficient decrease, telescoping") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix h = oracle::gaussian(rng, 48, 6);
    const double alpha = 0.5 * std::pow(oracle::power_sigma(h), 2);
    const SteerProblem p(h, alpha);
    RgdParams params;
    params.max_iters = 40;
    const SolveTrace t = rgd_solve(p, params, static_cast<std::uint64_t>(trial));
    REQUIRE(t.records.size() >= 2);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < t.records.size(); ++k) {
      const auto& r = t.records[k];
      const double dec = r.loss - t.records[k + 1].loss;
      CHECK(dec > 0.0);
      CHECK(dec >= params.c * r.eta * r.grad_norm * r.grad_norm);
      CHECK(r.eta <= params.eta_bar);
      CHECK(r.iter == static_cast<int>(k));
      total += dec;
    }
    CHECK(std::abs(total - (t.initial_loss() - t.final_loss())) <=
          1e-10 * (1.0 + std::abs(t.initial_loss())));
    CHECK(t.final_loss() >= oracle::analytic_optimum(h, alpha) - 1e-9);
    REQUIRE(t.final_v.has_value());
    CHECK(std::abs(objective(p, *t.final_v) - t.final_loss()) <= 1e-12 * std::abs(t.final_loss()));
    if (t.status == SolveStatus::MaxIters) CHECK(t.steps() == params.max_iters);
  }
}

TEST_CASE("rgd_solve: trace serialization") {
  const SolveTrace t = rgd_solve(SteerProblem(col3(2, 0, 0), 1.0), RgdParams{}, 1);
  const std::string lines = trace_records_jsonl(t);
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = lines.find('\n', pos)) != std::string::npos) ++count, ++pos;
  CHECK(count == t.records.size());
  const auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  CHECK(first["iter"] == 0);
  CHECK(first["loss"].get<double>() == t.initial_loss());
  const auto summary = nlohmann::json::parse(trace_summary_json(t));
  CHECK(summary["status"] == to_string(t.status));
  CHECK(summary["iterations"] == t.steps());
}

TEST_CASE("quad_coeffs_general: single column example") {
  const SteerProblem p(col3(2, 0, 0), 1.0);
  const StiefelPoint v(col3(0, 1, 0), 1.0);
  const QuadCoeffs q = quad_coeffs_general(p, v, tangent_project(v, p.h()));
  CHECK(q.d1 == doctest::Approx(1.6).epsilon(1e-14));
  CHECK(q.d2 == doctest::Approx(2.56).epsilon(1e-14));
  CHECK(std::abs(q.eta_star - 0.625) <= 1e-12);
  CHECK_FALSE(q.ill_posed);

  const QuadCoeffs z = quad_coeffs_general(p, v, tangent_project(v, Matrix::Zero(3, 1)));
  CHECK(z.ill_posed);
  CHECK(std::isinf(z.eta_star));
}

TEST_CASE("quad_coeffs_general is the second-order model of the retraction curve") {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 10; ++t) {
    const Matrix h = oracle::gaussian(rng, 20, 4);
    const double alpha = 1.5;
    const Matrix vm = oracle::stiefel(rng, 20, 4, alpha);
    const SteerProblem p(h, alpha);
    const StiefelPoint v(vm, alpha);
    TangentVector s = tangent_project(v, oracle::gaussian(rng, 20, 4));
    s = (1.0 / s.norm()) * s;
    const QuadCoeffs q = quad_coeffs_general(p, v, s);
    const double l0 = oracle::neg_logdet_eig(h + vm);
    auto err = [&](double eta) {
      const double l = oracle::neg_logdet_eig(h + oracle::polar(vm, eta * s.value(), alpha));
      return std::abs(l - (l0 - eta * q.d1 + 0.5 * eta * eta * q.d2));
    };
    // Third-order remainder: halving eta divides the error by about 8.
    const double ratio = err(2e-2) / err(1e-2);
    CHECK(ratio > 6.0);
    CHECK(ratio < 10.0);
  }
}

TEST_CASE("quad_coeffs_closed_form") {
  const QuadCoeffs a = quad_coeffs_closed_form(svd_full(col3(2, 0, 0)), 1.0);
  CHECK(a.d1 == doctest::Approx(1.6).epsilon(1e-15));
  CHECK(a.d2 == doctest::Approx(2.56).epsilon(1e-15));
  CHECK(std::abs(a.eta_star - 0.625) <= 1e-12);

  const QuadCoeffs b = quad_coeffs_closed_form(svd_full(col3(1, 0, 0)), 1.0);
  CHECK(b.d1 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b.d2 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b.eta_star == doctest::Approx(1.0).epsilon(1e-15));

  const QuadCoeffs z = quad_coeffs_closed_form(svd_full(Matrix::Zero(4, 2)), 1.0);
  CHECK(z.zero_rank);
  CHECK(z.eta_star == 0.0);
}

TEST_CASE("closed form agrees with the general coefficients at the start point") {
  std::mt19937_64 rng(34);
  for (int t = 0; t < 20; ++t) {
    const Matrix h = oracle::gaussian(rng, 64, 8);
    const double alpha = 0.5 * std::pow(oracle::power_sigma(h), 2);
    const SteerProblem p(h, alpha);
    const InitBundle init = init_v0(p, static_cast<std::uint64_t>(t));
    const QuadCoeffs g = quad_coeffs_general(p, init.v0, tangent_project(init.v0, h));
    const QuadCoeffs c = quad_coeffs_closed_form(init.svd, alpha);
    CHECK(std::abs(g.d1 - c.d1) <= 1e-8 * std::abs(c.d1));
    CHECK(std::abs(g.d2 - c.d2) <= 1e-8 * std::abs(c.d2));
    CHECK(std::abs(g.eta_star - c.eta_star) <= 1e-8 * std::abs(c.eta_star));
  }
}

TEST_CASE("onestep_solve: single column example") {
  const SteerProblem p(col3(2, 0, 0), 1.0);
  const OneStepResult r = onestep_solve(p, 42);
  CHECK(std::abs(r.coeffs.eta_star - 0.625) <= 1e-12);
  CHECK(r.loss_before == doctest::Approx(-std::log(5.0)).epsilon(1e-14));
  CHECK(std::abs(r.loss_after - (-2.0947)) <= 1e-4);
  // Closed form of the same number: ||H + V1||^2 = (2 + 1.25/s)^2 + 1/s^2, s^2 = 2.5625.
  const double s = std::sqrt(2.5625);
  const double want = -std::log(std::pow(2.0 + 1.25 / s, 2) + 1.0 / (s * s));
  CHECK(r.loss_after == doctest::Approx(want).epsilon(1e-13));
  CHECK(std::abs(r.v1.value()(0, 0) - 0.78086880944303) <= 1e-12);

  // The global optimum from a brute-force search over the unit sphere.
  double best = 1e300;
  const int m = 400;
  for (int i = 0; i <= m; ++i) {
    const double th = M_PI * i / m;
    for (int j = 0; j < 2 * m; ++j) {
      const double ph = M_PI * j / m;
      const Matrix v = col3(std::cos(th), std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph));
      best = std::min(best, oracle::neg_logdet_eig(p.h() + v));
    }
  }
  CHECK(std::abs(best + std::log(9.0)) <= 1e-4);
  CHECK(oracle::analytic_optimum(p.h(), 1.0) == doctest::Approx(-std::log(9.0)).epsilon(1e-15));
  CHECK(r.loss_after > best);
}

TEST_CASE("onestep_solve: zero activations keep the start") {
  const OneStepResult r = onestep_solve(SteerProblem(Matrix::Zero(4, 2), 1.0), 3);
  CHECK(r.coeffs.zero_rank);
  CHECK((r.v1.value() - r.v0.value()).norm() == 0.0);
  CHECK(r.loss_after == r.loss_before);
  CHECK(std::abs(r.loss_after) < 1e-14);
}

TEST_CASE("onestep_solve improves on the start point") {
  std::mt19937_64 rng(35);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index n = 1 + t % 8;
    const Eigen::Index d = 2 * n + t % 17;
    const Matrix h = oracle::gaussian(rng, d, n);
    const double alpha = std::exp(std::uniform_real_distribution<double>(-2, 2)(rng));
    const OneStepResult r = onestep_solve(SteerProblem(h, alpha), static_cast<std::uint64_t>(t));
    CHECK(r.loss_after < r.loss_before);
    CHECK(r.loss_after >= oracle::analytic_optimum(h, alpha) - 1e-10);
    CHECK(feasibility_residual(r.v1.value(), alpha) <= feasibility_tolerance(alpha, n));
  }
}

TEST_CASE("relative_gap") {
  CHECK(relative_gap(-2.0, -2.0).value == 0.0);
  CHECK(relative_gap(-1.8, -2.0).value == doctest::Approx(0.1).epsilon(1e-14));
  CHECK_FALSE(relative_gap(-1.8, -2.0).zero_reference);
  const RelativeGap z = relative_gap(0.25, 0.0);
  CHECK(z.zero_reference);
  CHECK(z.value == 0.25);
}
