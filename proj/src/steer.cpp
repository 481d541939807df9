#include "stiefsteer/steer.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "stiefsteer/error.hpp"

namespace stiefsteer {

namespace {

// -2 * sum(log L_ii) of the Cholesky factor of G = P^T P.
double neg_logdet_gram(const Matrix& p) {
  const Matrix gram = p.transpose() * p;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw SingularPoint("objective: Gram matrix is not positive definite");
  }
  const auto diag = llt.matrixLLT().diagonal();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 0.0) || !std::isfinite(diag(i))) {
      throw SingularPoint("objective: non-positive Cholesky pivot");
    }
    acc += std::log(diag(i));
  }
  return -2.0 * acc;
}

}  // namespace

SteerProblem::SteerProblem(Matrix h, double alpha) : h_(std::move(h)), alpha_(alpha) {
  require_finite(h_, "SteerProblem");
  if (h_.rows() < h_.cols()) {
    throw DimensionError("SteerProblem: d=" + std::to_string(h_.rows()) +
                         " < N=" + std::to_string(h_.cols()));
  }
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) {
    throw ConfigError("alpha", "must be a positive finite number");
  }
}

double feasibility_residual(const Matrix& v, double alpha) {
  Matrix g = v.transpose() * v;
  g.diagonal().array() -= alpha;
  return g.norm();
}

StiefelPoint::StiefelPoint(Matrix v, double alpha) : v_(std::move(v)), alpha_(alpha) {
  require_finite(v_, "StiefelPoint");
  if (!(alpha_ > 0.0)) throw ConfigError("alpha", "must be positive");
  const double res = feasibility_residual(v_, alpha_);
  if (!(res <= feasibility_tolerance(alpha_, v_.cols()))) {
    throw NumericError("StiefelPoint: ||V^T V - alpha I||_F = " +
                       std::to_string(res) + " exceeds tolerance");
  }
}

double compute_alpha(const Matrix& h, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("C", "must be positive");
  const double s = spectral_norm(h);
  if (s == 0.0) {
    throw DegenerateInput("compute_alpha: H is the zero matrix, alpha would be 0");
  }
  return c * s * s;
}

double objective_at(const Matrix& h, const Matrix& v) {
  if (h.rows() != v.rows() || h.cols() != v.cols()) {
    throw DimensionError("objective: H and V shapes differ");
  }
  return neg_logdet_gram(h + v);
}

double objective(const SteerProblem& p, const StiefelPoint& v) {
  return objective_at(p.h(), v.value());
}

Matrix euclidean_grad(const SteerProblem& p, const StiefelPoint& v) {
  const Matrix sum = p.h() + v.value();
  const Matrix gram = sum.transpose() * sum;
  const auto n = gram.rows();
  Matrix inv;
  try {
    inv = solve_spd(gram, Matrix::Identity(n, n));
  } catch (const NotPositiveDefinite&) {
    throw SingularPoint("euclidean_grad: Gram matrix is not positive definite");
  }
  return -2.0 * sum * inv;
}

TangentVector tangent_project(const StiefelPoint& v, const Matrix& u) {
  const Matrix& vv = v.value();
  if (u.rows() != vv.rows() || u.cols() != vv.cols()) {
    throw DimensionError("tangent_project: shape mismatch");
  }
  const Matrix vtu = vv.transpose() * u;
  const Matrix sym = vtu + vtu.transpose();
  return TangentVector(u - vv * sym / (2.0 * v.alpha()));
}

TangentVector riemannian_grad(const SteerProblem& p, const StiefelPoint& v) {
  return tangent_project(v, euclidean_grad(p, v));
}

StiefelPoint polar_retract(const StiefelPoint& v, const TangentVector& u) {
  const double alpha = v.alpha();
  // Polar factor of V + U. On the manifold (V+U)^T (V+U) = alpha I + U^T U,
  // but using the actual Gram matrix also removes drift accumulated over many
  // retractions instead of carrying it forward.
  const Matrix sum = v.value() + u.value();
  Matrix gram = sum.transpose() * sum;
  gram = 0.5 * (gram + gram.transpose());
  Matrix root;
  try {
    // Gram >= alpha I up to the feasibility tolerance of V.
    root = sym_inv_sqrt(gram, 0.5 * alpha);
  } catch (const Error& e) {
    throw NumericError(std::string("polar_retract: ") + e.what());
  }
  return StiefelPoint(std::sqrt(alpha) * sum * root, alpha);
}

InitBundle init_v0(const SteerProblem& p, std::uint64_t seed) {
  SvdBundle svd = svd_full(p.h());
  const Eigen::Index d = p.dim();
  const Eigen::Index n = p.paths();
  const Eigen::Index r = svd.rank();
  if (d < r + n) throw InsufficientDimension(d, r, n);

  // Partial Fisher-Yates over the d - r columns of Q2.
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(d - r));
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<Eigen::Index> selected(pool.begin(), pool.begin() + n);

  std::vector<Eigen::Index> q_idx(selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i) q_idx[i] = r + selected[i];
  const double scale = std::sqrt(p.alpha());
  Matrix v0 = scale * svd.q_columns(q_idx);

  // Repair pass if the factorization left V0 measurably out of null(H^T).
  bool repaired = false;
  const double hnorm = p.h().norm();
  const double tol = 1e-8 * hnorm * std::sqrt(p.alpha() * static_cast<double>(n));
  if ((p.h().transpose() * v0).norm() > tol) {
    std::vector<Eigen::Index> range_idx(static_cast<std::size_t>(r));
    std::iota(range_idx.begin(), range_idx.end(), Eigen::Index{0});
    const Matrix q1 = svd.q_columns(range_idx);
    Matrix basis = v0 - q1 * (q1.transpose() * v0);
    Eigen::HouseholderQR<Matrix> qr(basis);
    Matrix q = qr.householderQ() * Matrix::Identity(d, n);
    // Keep the orientation of the original columns.
    const Vector signs = (q.transpose() * basis).diagonal().array().sign();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (signs(j) < 0) q.col(j) *= -1.0;
    }
    v0 = scale * q;
    repaired = true;
  }

  return InitBundle{StiefelPoint(std::move(v0), p.alpha()), std::move(svd),
                    std::move(selected), repaired};
}

}  // namespace stiefsteer
