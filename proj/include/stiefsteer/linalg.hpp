#pragma once

// Dense linear-algebra kernel. Everything numeric in the library goes through
// this surface; Eigen is the backend. All routines are pure and thread-safe.

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace stiefsteer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Throws NumericError if any entry is NaN/Inf, DimensionError if empty.
void require_finite(const Matrix& m, const char* what);

// Full SVD H = Q * Sigma * W^T of a d x N matrix with d >= N.
//
// Q is kept in factored form: the Householder reflectors of H = Q_h [R; 0]
// followed by the left singular vectors of the N x N factor R, so that
//   Q = Q_h * blkdiag(U_r, I_{d-N}).
// This is an exact d x d orthogonal Q of the decomposition. q() materializes
// it; q_columns() forms only the requested columns in O(d N k).
class SvdBundle {
 public:
  SvdBundle() = default;

  Eigen::Index rows() const { return d_; }
  Eigen::Index cols() const { return n_; }

  // Singular values, non-increasing, length min(d, N) = N.
  const Vector& sigma() const { return sigma_; }
  // Right singular vectors, N x N orthogonal.
  const Matrix& w() const { return w_; }
  // Numerical rank: sigma[i] > rank_tol for exactly i < rank.
  Eigen::Index rank() const { return rank_; }
  double rank_tol() const { return rank_tol_; }

  // Full d x d left basis.
  Matrix q() const;
  // Columns of Q at the given indices (each in [0, d)), in that order.
  Matrix q_columns(std::span<const Eigen::Index> idx) const;

  // Q * Sigma * W^T, for residual checks.
  Matrix reconstruct() const;

 private:
  friend SvdBundle svd_full(const Matrix& h);

  Eigen::Index d_ = 0;
  Eigen::Index n_ = 0;
  Eigen::HouseholderQR<Matrix> qr_;
  Matrix u_r_;
  Vector sigma_;
  Matrix w_;
  Eigen::Index rank_ = 0;
  double rank_tol_ = 0.0;
};

// rank_tol = max(d, N) * eps * sigma[0], or 0 for the zero matrix.
// Throws DimensionError if d < N, NumericError on non-finite input or output.
SvdBundle svd_full(const Matrix& h);

// Largest singular value; 0 for the zero matrix. Any shape is accepted.
double spectral_norm(const Matrix& h);

// Symmetric inverse square root B = A^{-1/2}, so that B A B = I.
// Throws NotSymmetric if ||A - A^T||_F > 1e-10 ||A||_F, NotPositiveDefinite if
// the smallest eigenvalue is below floor.
Matrix sym_inv_sqrt(const Matrix& a, double floor);

// X = A^{-1} B through a Cholesky factorization. Throws NotPositiveDefinite.
Matrix solve_spd(const Matrix& a, const Matrix& b);

// Frobenius inner product <A, B> = Tr(A^T B).
inline double inner(const Matrix& a, const Matrix& b) {
  return (a.array() * b.array()).sum();
}

}  // namespace stiefsteer
