#pragma once

// Independent reference computations for the unit and acceptance tests.
// Nothing here calls into the library's numeric routines.

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

// sqrt(alpha) times an orthonormal basis of a random subspace (modified Gram-Schmidt).
inline Matrix stiefel(std::mt19937_64& rng, Eigen::Index d, Eigen::Index n, double alpha) {
  Matrix q = gaussian(rng, d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
    q.col(j).normalize();
  }
  return std::sqrt(alpha) * q;
}

// Largest singular value by power iteration on A^T A.
inline double power_sigma(const Matrix& a, int iters = 20000) {
  Vector x = Vector::LinSpaced(a.cols(), 1.0, 2.0).normalized();
  double prev = -1.0;
  for (int it = 0; it < iters; ++it) {
    Vector y = a.transpose() * (a * x);
    const double nrm = y.norm();
    if (nrm == 0.0) return 0.0;
    x = y / nrm;
    if (std::abs(nrm - prev) <= 1e-16 * nrm) break;
    prev = nrm;
  }
  return (a * x).norm();
}

// -log det(G) from the eigenvalues of the symmetric Gram matrix.
inline double neg_logdet_eig(const Matrix& p) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(p.transpose() * p);
  return -eig.eigenvalues().array().log().sum();
}

// Entrywise central differences of f at x.
template <typename F>
Matrix central_diff(F&& f, Matrix x, double step) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double keep = x(i, j);
      x(i, j) = keep + step;
      const double fp = f(x);
      x(i, j) = keep - step;
      const double fm = f(x);
      x(i, j) = keep;
      g(i, j) = (fp - fm) / (2.0 * step);
    }
  return g;
}

// Polar retraction evaluated through an eigendecomposition of alpha I + U^T U.
inline Matrix polar(const Matrix& v, const Matrix& u, double alpha) {
  const Eigen::Index n = v.cols();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(alpha * Matrix::Identity(n, n) + u.transpose() * u);
  const Matrix root = eig.eigenvectors() *
                      eig.eigenvalues().array().rsqrt().matrix().asDiagonal() *
                      eig.eigenvectors().transpose();
  return std::sqrt(alpha) * (v + u) * root;
}

// Global optimum of -log det((H+V)^T(H+V)) over V^T V = alpha I, attained at
// V = sqrt(alpha) Q1 W^T: -2 sum log(sigma_i + sqrt(alpha)).
inline double analytic_optimum(const Matrix& h, double alpha) {
  Eigen::JacobiSVD<Matrix> svd(h);
  return -2.0 * (svd.singularValues().array() + std::sqrt(alpha)).log().sum();
}

}  // namespace oracle
