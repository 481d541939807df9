#include "stiefsteer/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stiefsteer/error.hpp"

namespace stiefsteer {

void require_finite(const Matrix& m, const char* what) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw DimensionError(std::string(what) + ": empty matrix");
  }
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entry");
  }
}

SvdBundle svd_full(const Matrix& h) {
  require_finite(h, "svd_full");
  const Eigen::Index d = h.rows();
  const Eigen::Index n = h.cols();
  if (d < n) {
    throw DimensionError("svd_full: d=" + std::to_string(d) + " < N=" +
                         std::to_string(n));
  }

  SvdBundle out;
  out.d_ = d;
  out.n_ = n;
  out.qr_.compute(h);
  Matrix r = out.qr_.matrixQR().topRows(n).triangularView<Eigen::Upper>();

  Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.u_r_ = svd.matrixU();
  out.sigma_ = svd.singularValues();
  out.w_ = svd.matrixV();
  if (!out.u_r_.allFinite() || !out.sigma_.allFinite() || !out.w_.allFinite()) {
    throw NumericError("svd_full: backend produced non-finite factors");
  }

  const double smax = out.sigma_(0);
  out.rank_tol_ = smax > 0.0 ? static_cast<double>(std::max(d, n)) *
                                   std::numeric_limits<double>::epsilon() *
                                   smax
                             : 0.0;
  out.rank_ = 0;
  while (out.rank_ < n && out.sigma_(out.rank_) > out.rank_tol_) ++out.rank_;
  return out;
}

Matrix SvdBundle::q_columns(std::span<const Eigen::Index> idx) const {
  const auto k = static_cast<Eigen::Index>(idx.size());
  // Coefficients in the Householder basis: blkdiag(U_r, I) * E.
  Matrix coeff = Matrix::Zero(d_, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index c = idx[j];
    if (c < 0 || c >= d_) throw DimensionError("q_columns: index out of range");
    if (c < n_) {
      coeff.col(j).head(n_) = u_r_.col(c);
    } else {
      coeff(c, j) = 1.0;
    }
  }
  return qr_.householderQ() * coeff;
}

Matrix SvdBundle::q() const {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(d_));
  for (Eigen::Index i = 0; i < d_; ++i) all[static_cast<std::size_t>(i)] = i;
  return q_columns(all);
}

Matrix SvdBundle::reconstruct() const {
  std::vector<Eigen::Index> lead(static_cast<std::size_t>(n_));
  for (Eigen::Index i = 0; i < n_; ++i) lead[static_cast<std::size_t>(i)] = i;
  // Only the first N columns of Q meet nonzero rows of Sigma.
  return q_columns(lead) * sigma_.asDiagonal() * w_.transpose();
}

double spectral_norm(const Matrix& h) {
  require_finite(h, "spectral_norm");
  if (h.rows() < h.cols()) return svd_full(h.transpose()).sigma()(0);
  return svd_full(h).sigma()(0);
}

Matrix sym_inv_sqrt(const Matrix& a, double floor) {
  require_finite(a, "sym_inv_sqrt");
  if (a.rows() != a.cols()) throw DimensionError("sym_inv_sqrt: not square");
  const double asym = (a - a.transpose()).norm();
  if (asym > 1e-10 * a.norm()) {
    throw NotSymmetric("sym_inv_sqrt: ||A - A^T||_F = " + std::to_string(asym));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  if (eig.info() != Eigen::Success) {
    throw NumericError("sym_inv_sqrt: eigensolver did not converge");
  }
  const Vector& lambda = eig.eigenvalues();
  if (lambda.minCoeff() < floor) {
    throw NotPositiveDefinite("sym_inv_sqrt: min eigenvalue " +
                              std::to_string(lambda.minCoeff()) +
                              " below floor " + std::to_string(floor));
  }
  const Matrix& e = eig.eigenvectors();
  return e * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * e.transpose();
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows()) {
    throw DimensionError("solve_spd: shape mismatch");
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("solve_spd: Cholesky factorization failed");
  }
  Matrix x = llt.solve(b);
  if (!x.allFinite()) throw NotPositiveDefinite("solve_spd: non-finite solution");
  return x;
}

}  // namespace stiefsteer
