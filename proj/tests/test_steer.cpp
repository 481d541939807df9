#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "stiefsteer/error.hpp"
#include "stiefsteer/steer.hpp"

using namespace stiefsteer;

namespace {

Matrix col3(double a, double b, double c) {
  Matrix m(3, 1);
  m << a, b, c;
  return m;
}

}  // namespace

TEST_CASE("SteerProblem validation") {
  CHECK_THROWS_AS(SteerProblem(Matrix::Ones(2, 3), 1.0), DimensionError);
  CHECK_THROWS_AS(SteerProblem(Matrix::Ones(3, 2), 0.0), ConfigError);
  CHECK_THROWS_AS(SteerProblem(Matrix::Ones(3, 2), -1.0), ConfigError);
  CHECK_NOTHROW(SteerProblem(Matrix::Ones(3, 3), 1.0));
}

TEST_CASE("StiefelPoint rejects infeasible matrices") {
  CHECK_THROWS_AS(StiefelPoint(Matrix::Ones(3, 2), 1.0), NumericError);
  CHECK_NOTHROW(StiefelPoint(2.0 * Matrix::Identity(3, 2), 4.0));
}

TEST_CASE("compute_alpha") {
  CHECK(compute_alpha(col3(2, 0, 0), 0.5) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(compute_alpha(col3(1, 0, 0), 0.1) == doctest::Approx(0.1).epsilon(1e-15));
  std::mt19937_64 rng(21);
  const Matrix h = oracle::gaussian(rng, 64, 8);
  const double s = oracle::power_sigma(h);
  CHECK(std::abs(compute_alpha(h, 0.5) - 0.5 * s * s) <= 1e-6 * 0.5 * s * s);
  CHECK_THROWS_AS(compute_alpha(Matrix::Zero(4, 2), 0.5), DegenerateInput);
  CHECK_THROWS_AS(compute_alpha(h, 0.0), ConfigError);
}

TEST_CASE("objective") {
  std::mt19937_64 rng(2);
  const StiefelPoint v(oracle::stiefel(rng, 3, 2, 1.0), 1.0);
  CHECK(std::abs(objective(SteerProblem(Matrix::Zero(3, 2), 1.0), v)) < 1e-14);

  const SteerProblem p(col3(2, 0, 0), 1.0);
  CHECK(objective(p, StiefelPoint(col3(0, 1, 0), 1.0)) ==
        doctest::Approx(-std::log(5.0)).epsilon(1e-15));
  CHECK(objective(p, StiefelPoint(col3(0, 1, 0), 1.0)) ==
        doctest::Approx(-1.6094379).epsilon(1e-7));

  for (int t = 0; t < 20; ++t) {
    const Matrix h = oracle::gaussian(rng, 16, 4);
    const SteerProblem q(h, 0.7);
    const InitBundle init = init_v0(q, static_cast<std::uint64_t>(t));
    const double want = oracle::neg_logdet_eig(h + init.v0.value());
    CHECK(std::abs(objective(q, init.v0) - want) < 1e-10);
  }

  // H = -V makes the Gram matrix zero.
  const StiefelPoint w(col3(1, 0, 0), 1.0);
  CHECK_THROWS_AS(objective(SteerProblem(col3(-1, 0, 0), 1.0), w), SingularPoint);
}

TEST_CASE("euclidean_grad: closed cases") {
  std::mt19937_64 rng(4);
  const StiefelPoint v(oracle::stiefel(rng, 5, 2, 1.0), 1.0);
  const Matrix g0 = euclidean_grad(SteerProblem(Matrix::Zero(5, 2), 1.0), v);
  CHECK((g0 + 2.0 * v.value()).norm() < 1e-13);

  const Matrix g = euclidean_grad(SteerProblem(col3(2, 0, 0), 1.0), StiefelPoint(col3(0, 1, 0), 1.0));
  CHECK((g - col3(-0.8, -0.4, 0)).norm() < 1e-15);

  const StiefelPoint w(col3(1, 0, 0), 1.0);
  CHECK_THROWS_AS(euclidean_grad(SteerProblem(col3(-1, 0, 0), 1.0), w), SingularPoint);
}

TEST_CASE("euclidean_grad matches central differences") {
  std::mt19937_64 rng(8);
  int done = 0;
  while (done < 100) {
    const Matrix h = oracle::gaussian(rng, 16, 4);
    const Matrix vm = oracle::stiefel(rng, 16, 4, 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig((h + vm).transpose() * (h + vm));
    if (eig.eigenvalues().minCoeff() < 0.1) continue;
    const Matrix fd = oracle::central_diff(
        [&](const Matrix& x) { return oracle::neg_logdet_eig(h + x); }, vm, 1e-5);
    const Matrix g = euclidean_grad(SteerProblem(h, 1.0), StiefelPoint(vm, 1.0));
    CHECK((g - fd).cwiseAbs().maxCoeff() <= 1e-5);
    ++done;
  }
}

TEST_CASE("tangent_project") {
  std::mt19937_64 rng(12);
  const double alpha = 2.5;
  const StiefelPoint v(oracle::stiefel(rng, 16, 4, alpha), alpha);
  CHECK(tangent_project(v, v.value()).norm() < 1e-13);

  const Matrix u = oracle::gaussian(rng, 16, 4);
  const TangentVector t = tangent_project(v, u);
  const Matrix vtu = v.value().transpose() * t.value();
  CHECK((vtu + vtu.transpose()).norm() <= 1e-10);
  CHECK((tangent_project(v, t.value()).value() - t.value()).norm() <= 1e-12);

  const Matrix u2 = oracle::gaussian(rng, 16, 4);
  CHECK(std::abs(inner(t.value(), u2) - inner(u, tangent_project(v, u2).value())) <= 1e-10);
  CHECK_THROWS_AS(tangent_project(v, Matrix::Ones(16, 3)), DimensionError);
}

TEST_CASE("riemannian_grad") {
  // N = 1: correction is V (V^T U).
  const TangentVector g =
      riemannian_grad(SteerProblem(col3(2, 0, 0), 1.0), StiefelPoint(col3(0, 1, 0), 1.0));
  CHECK((g.value() - col3(-0.8, 0, 0)).norm() < 1e-15);

  std::mt19937_64 rng(13);
  for (int t = 0; t < 10; ++t) {
    const StiefelPoint v(oracle::stiefel(rng, 8, 3, 1.7), 1.7);
    CHECK(riemannian_grad(SteerProblem(Matrix::Zero(8, 3), 1.7), v).norm() < 1e-12);
  }
}

TEST_CASE("riemannian_grad is the derivative along retraction curves") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix h = oracle::gaussian(rng, 12, 3);
    const double alpha = 1.3;
    const Matrix vm = oracle::stiefel(rng, 12, 3, alpha);
    const StiefelPoint v(vm, alpha);
    const SteerProblem p(h, alpha);
    const TangentVector dir = tangent_project(v, oracle::gaussian(rng, 12, 3));
    const double step = 1e-5;
    const double fp = oracle::neg_logdet_eig(h + oracle::polar(vm, step * dir.value(), alpha));
    const double fm = oracle::neg_logdet_eig(h + oracle::polar(vm, -step * dir.value(), alpha));
    const double fd = (fp - fm) / (2 * step);
    CHECK(std::abs(inner(riemannian_grad(p, v).value(), dir.value()) - fd) <= 1e-5);
  }
}

TEST_CASE("polar_retract: closed cases") {
  std::mt19937_64 rng(15);
  const StiefelPoint v(oracle::stiefel(rng, 6, 2, 3.0), 3.0);
  const TangentVector zero = tangent_project(v, Matrix::Zero(6, 2));
  CHECK((polar_retract(v, zero).value() - v.value()).norm() < 1e-14);

  // N = 1 by hand: (V + U) / sqrt(1 + ||U||^2) with U = (1.25, 0, 0).
  const StiefelPoint v0(col3(0, 1, 0), 1.0);
  const TangentVector u = 0.625 * tangent_project(v0, col3(2, 0, 0));
  const Matrix r = polar_retract(v0, u).value();
  const double denom = std::sqrt(1.0 + 1.25 * 1.25);
  CHECK(r(0, 0) == doctest::Approx(1.25 / denom).epsilon(1e-15));
  CHECK(r(1, 0) == doctest::Approx(1.0 / denom).epsilon(1e-15));
  CHECK(r(2, 0) == 0.0);
  CHECK(r(0, 0) == doctest::Approx(0.7808688).epsilon(1e-7));
  CHECK(r(1, 0) == doctest::Approx(0.6246950).epsilon(1e-7));
}

TEST_CASE("polar_retract agrees with the eigendecomposition oracle") {
  std::mt19937_64 rng(16);
  for (int t = 0; t < 50; ++t) {
    const double alpha = 0.5 + t * 0.1;
    const Matrix vm = oracle::stiefel(rng, 20, 5, alpha);
    const StiefelPoint v(vm, alpha);
    const TangentVector u = tangent_project(v, oracle::gaussian(rng, 20, 5));
    CHECK((polar_retract(v, u).value() - oracle::polar(vm, u.value(), alpha)).norm() < 1e-10);
  }
}

TEST_CASE("polar_retract: feasibility closure") {
  std::mt19937_64 rng(17);
  const std::vector<Eigen::Index> ds = {8, 64, 1024};
  const std::vector<Eigen::Index> ns = {1, 4, 8, 20};
  int trials = 0;
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const Eigen::Index d = ds[static_cast<std::size_t>(t) % 3];
    const Eigen::Index n = std::min(d, ns[static_cast<std::size_t>(t / 3) % 4]);
    const double alpha = std::exp(std::uniform_real_distribution<double>(-3, 3)(rng));
    const StiefelPoint v(oracle::stiefel(rng, d, n, alpha), alpha);
    const double scale = std::uniform_real_distribution<double>(0, 5)(rng);
    const TangentVector u = (scale * std::sqrt(alpha)) *
                            tangent_project(v, oracle::gaussian(rng, d, n).normalized());
    const StiefelPoint r = polar_retract(v, u);
    worst = std::max(worst, feasibility_residual(r.value(), alpha) / feasibility_tolerance(alpha, n));
    ++trials;
  }
  CHECK(trials == 10000);
  CHECK(worst <= 1.0);
}

TEST_CASE("polar_retract: second-order bound and non-expansiveness") {
  std::mt19937_64 rng(18);
  for (int t = 0; t < 1000; ++t) {
    const double alpha = std::uniform_real_distribution<double>(0.1, 10)(rng);
    const Eigen::Index n = 1 + t % 8;
    const Eigen::Index d = n + 4 + t % 20;
    const Matrix vm = oracle::stiefel(rng, d, n, alpha);
    const StiefelPoint v(vm, alpha);
    const double norm = std::uniform_real_distribution<double>(0.01, 1.0)(rng) * std::sqrt(alpha);
    TangentVector u = tangent_project(v, oracle::gaussian(rng, d, n));
    u = (norm / u.norm()) * u;
    const Matrix r = polar_retract(v, u).value();
    CHECK((r - (vm + u.value())).norm() <= u.norm() * u.norm() / std::sqrt(alpha) * (1 + 1e-12));

    const Matrix other = oracle::stiefel(rng, d, n, alpha);
    CHECK((r - other).norm() <= (vm + u.value() - other).norm() + 1e-12 * std::sqrt(alpha));
  }
}

TEST_CASE("init_v0: single column") {
  const SteerProblem p(col3(2, 0, 0), 1.0);
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 99ULL}) {
    const InitBundle init = init_v0(p, seed);
    const Matrix& v = init.v0.value();
    CHECK(std::abs(v(0, 0)) < 1e-15);
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK((p.h().transpose() * v).norm() < 1e-15);
    CHECK(init.selected_cols.size() == 1);
    CHECK(init.selected_cols[0] < 2);
  }
}

TEST_CASE("init_v0: insufficient dimension") {
  const SteerProblem p(Matrix::Identity(4, 4), 1.0);
  try {
    init_v0(p, 0);
    FAIL("expected InsufficientDimension");
  } catch (const InsufficientDimension& e) {
    CHECK(e.dim() == 4);
    CHECK(e.rank() == 4);
    CHECK(e.paths() == 4);
  }
}

TEST_CASE("init_v0: random Gaussian start") {
  std::mt19937_64 rng(19);
  const Matrix h = oracle::gaussian(rng, 64, 8);
  const SteerProblem p(h, 2.0);
  const InitBundle init = init_v0(p, 42);
  const Matrix& v = init.v0.value();
  CHECK(init.svd.rank() == 8);
  CHECK((v.transpose() * v - 2.0 * Matrix::Identity(8, 8)).norm() <= 1e-10);
  CHECK((h.transpose() * v).norm() <= 1e-8 * h.norm());
  // Gram at V0 is H^T H + alpha I.
  const Matrix sum = h + v;
  const Matrix want = h.transpose() * h + 2.0 * Matrix::Identity(8, 8);
  CHECK((sum.transpose() * sum - want).norm() <= 1e-8 * (h.squaredNorm() + 2.0 * 8));
  CHECK_FALSE(init.reorthogonalized);

  // Deterministic per seed; distinct selection indices.
  const InitBundle again = init_v0(p, 42);
  CHECK((again.v0.value() - v).norm() == 0.0);
  std::set<Eigen::Index> uniq(init.selected_cols.begin(), init.selected_cols.end());
  CHECK(uniq.size() == 8);
  CHECK(init_v0(p, 43).selected_cols != init.selected_cols);
}

TEST_CASE("init_v0: objective equals the null-space identity") {
  std::mt19937_64 rng(20);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index n = 2 + t % 5;
    Matrix h = oracle::gaussian(rng, 3 * n, n);
    if (t % 2) h.col(1) = -3.0 * h.col(0);  // rank n - 1
    const double alpha = 0.3 + 0.1 * t;
    const SteerProblem p(h, alpha);
    const InitBundle init = init_v0(p, static_cast<std::uint64_t>(t));
    Eigen::JacobiSVD<Matrix> svd(h);
    const Vector s = svd.singularValues();
    const Eigen::Index r = init.svd.rank();
    CHECK(r == (t % 2 ? n - 1 : n));
    double want = -static_cast<double>(n - r) * std::log(alpha);
    for (Eigen::Index i = 0; i < r; ++i) want -= std::log(s(i) * s(i) + alpha);
    CHECK(std::abs(objective(p, init.v0) - want) <= 1e-8);
  }
}
