#pragma once

// Dense matrix primitives shared by every other module: the sub-intensity
// matrix type, the matrix exponential and linear solves.

#include <Eigen/Dense>

namespace phrec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kStructuralTol = 1e-12;

// Largest absolute entry; 0 for an empty matrix.
double max_abs(const Matrix& a);

bool all_finite(const Matrix& a);

// Transient block T of a CTMC generator together with its exit vector
// t0 = -T 1. Instances only come out of validate_subintensity().
class SubIntensity {
 public:
  const Matrix& T() const { return T_; }
  const Vector& exit() const { return t0_; }
  Eigen::Index dim() const { return T_.rows(); }

 private:
  friend SubIntensity validate_subintensity(const Matrix& T, bool require_exit);
  SubIntensity(Matrix T, Vector t0) : T_(std::move(T)), t0_(std::move(t0)) {}

  Matrix T_;
  Vector t0_;
};

// Checks the sign pattern and row sums of T. With require_exit (the default)
// at least one row must leak mass to the absorbing state; the simulator also
// accepts conservative chains that never absorb.
SubIntensity validate_subintensity(const Matrix& T, bool require_exit = true);

// e^{tA}. Throws Overflow when the result is not finite.
Matrix expm(const Matrix& a, double t);

// Solves A X = B by partial-pivot LU. Throws Singular when a pivot falls below
// 1e-13 of the matrix scale.
Matrix solve(const Matrix& a, const Matrix& b);

}  // namespace phrec
