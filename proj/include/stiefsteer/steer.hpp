#pragma once

// Geometry of the scaled Stiefel manifold St(d, N, alpha) = {V : V^T V = alpha I}
// and the volume objective l(V) = -log det((H + V)^T (H + V)).

#include <cstdint>
#include <vector>

#include "stiefsteer/linalg.hpp"

namespace stiefsteer {

// Activations H (d x N, one column per generation path) and the squared
// steering magnitude alpha.
class SteerProblem {
 public:
  // Throws DimensionError if d < N, NumericError on non-finite H,
  // ConfigError if alpha is not a positive finite number.
  SteerProblem(Matrix h, double alpha);

  const Matrix& h() const { return h_; }
  double alpha() const { return alpha_; }
  Eigen::Index dim() const { return h_.rows(); }
  Eigen::Index paths() const { return h_.cols(); }

 private:
  Matrix h_;
  double alpha_;
};

// 1e-8 * alpha * N.
inline double feasibility_tolerance(double alpha, Eigen::Index n) {
  return 1e-8 * alpha * static_cast<double>(n);
}

// ||V^T V - alpha I||_F.
double feasibility_residual(const Matrix& v, double alpha);

// A point V with V^T V = alpha I up to feasibility_tolerance(alpha, N).
class StiefelPoint {
 public:
  // Throws NumericError if V is not feasible.
  StiefelPoint(Matrix v, double alpha);

  const Matrix& value() const { return v_; }
  double alpha() const { return alpha_; }

 private:
  Matrix v_;
  double alpha_;
};

// Element of the tangent space at some StiefelPoint: V^T U + U^T V = 0.
// Only tangent_project constructs these.
class TangentVector {
 public:
  const Matrix& value() const { return u_; }
  double norm() const { return u_.norm(); }

  friend TangentVector operator*(double s, const TangentVector& t) {
    return TangentVector(s * t.u_);
  }

 private:
  friend TangentVector tangent_project(const StiefelPoint&, const Matrix&);
  explicit TangentVector(Matrix u) : u_(std::move(u)) {}

  Matrix u_;
};

// Output of the null-space initializer.
struct InitBundle {
  StiefelPoint v0;
  SvdBundle svd;
  // Indices into Q2 (the last d - r columns of Q), in selection order.
  std::vector<Eigen::Index> selected_cols;
  // True if the Gram-Schmidt repair pass ran.
  bool reorthogonalized = false;
};

// alpha = c * ||H||_2^2. Throws DegenerateInput for H = 0, ConfigError for c <= 0.
double compute_alpha(const Matrix& h, double c);

// l(V) = -log det((H+V)^T (H+V)) from the Cholesky pivots of the Gram matrix.
// Throws SingularPoint if the Gram matrix is not positive definite.
double objective(const SteerProblem& p, const StiefelPoint& v);
// Same, for a raw matrix that need not be feasible (finite differences, tests).
double objective_at(const Matrix& h, const Matrix& v);

// Euclidean gradient -2 (H+V) [(H+V)^T (H+V)]^{-1}. Throws SingularPoint.
Matrix euclidean_grad(const SteerProblem& p, const StiefelPoint& v);

// U - V (V^T U + U^T V) / (2 alpha).
TangentVector tangent_project(const StiefelPoint& v, const Matrix& u);

// Proj_V(euclidean_grad). Throws SingularPoint.
TangentVector riemannian_grad(const SteerProblem& p, const StiefelPoint& v);

// Polar retraction sqrt(alpha) (V + U) (alpha I + U^T U)^{-1/2}, evaluated with
// the Gram matrix of V + U (equal on the manifold, self-correcting off it).
StiefelPoint polar_retract(const StiefelPoint& v, const TangentVector& u);

// V0 = sqrt(alpha) * [N columns of Q2 drawn uniformly without replacement].
// Then H^T V0 = 0 and the Gram at V0 is H^T H + alpha I.
// Throws InsufficientDimension if d < rank(H) + N.
InitBundle init_v0(const SteerProblem& p, std::uint64_t seed);

}  // namespace stiefsteer
