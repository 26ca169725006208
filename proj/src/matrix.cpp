#include "phrec/matrix.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "phrec/error.hpp"

namespace phrec {

namespace {
constexpr std::string_view kModule = "matrix-core";
}

double max_abs(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

bool all_finite(const Matrix& a) { return a.allFinite(); }

SubIntensity validate_subintensity(const Matrix& T, bool require_exit) {
  if (T.rows() != T.cols() || T.rows() == 0) {
    throw Error(ErrorCode::NotSquare, kModule,
                std::to_string(T.rows()) + "x" + std::to_string(T.cols()));
  }
  if (!T.allFinite()) {
    throw Error(ErrorCode::Overflow, kModule, "non-finite entry");
  }
  const Eigen::Index m = T.rows();
  const double scale = std::max(max_abs(T), 1.0);
  const double tol = kStructuralTol * scale;

  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const bool bad = (i == j) ? T(i, j) > 0.0 : T(i, j) < 0.0;
      if (bad) {
        throw Error(ErrorCode::SignViolation, kModule,
                    "row " + std::to_string(i) + ", col " + std::to_string(j));
      }
    }
  }

  Vector t0 = -T.rowwise().sum();
  bool leaks = false;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (t0(i) < -tol) {
      throw Error(ErrorCode::RowSumPositive, kModule, "row " + std::to_string(i));
    }
    if (t0(i) > tol) {
      leaks = true;
    } else {
      t0(i) = std::max(t0(i), 0.0);
    }
  }
  if (require_exit && !leaks) {
    throw Error(ErrorCode::AllRowsConservative, kModule, "no row has a negative sum");
  }
  return SubIntensity(T, std::move(t0));
}

Matrix expm(const Matrix& a, double t) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::NotSquare, kModule,
                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  if (!std::isfinite(t) || !a.allFinite()) {
    throw Error(ErrorCode::Overflow, kModule, "non-finite input");
  }
  if (t == 0.0 || a.size() == 0) {
    return Matrix::Identity(a.rows(), a.cols());
  }
  Matrix scaled = t * a;
  Matrix result = scaled.exp();
  if (!result.allFinite()) {
    throw Error(ErrorCode::Overflow, kModule, "matrix exponential is not finite");
  }
  return result;
}

Matrix solve(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::NotSquare, kModule,
                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  if (b.rows() != a.rows()) {
    throw Error(ErrorCode::NotSquare, kModule, "right-hand side has wrong row count");
  }
  const double scale = max_abs(a);
  Eigen::PartialPivLU<Matrix> lu(a);
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (scale == 0.0 || min_pivot < 1e-13 * scale) {
    throw Error(ErrorCode::Singular, kModule, "pivot below 1e-13 of matrix scale");
  }
  return lu.solve(b);
}

}  // namespace phrec
