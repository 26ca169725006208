#pragma once

#include <functional>
#include <span>
#include <vector>

#include "phrec/matrix.hpp"

namespace phrec {

struct OdeTolerances {
  double rtol = 1e-8;
  double atol = 1e-10;
  long max_steps = 2'000'000;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evals = 0;
};

// dy/dt = f(t, y), written into dy (already sized).
using OdeRhs = std::function<void(double t, const Vector& y, Vector& dy)>;

// Dormand-Prince 5(4) with FSAL and the 4th-order continuous extension.
// Integrates from t = 0 with y(0) = y0 and returns y at each grid point; the
// grid must be ascending and non-negative. A step is accepted when
// |err_i| <= atol + rtol * max(|y_i|, |y_new_i|) for every component.
// Throws StepSizeUnderflow when the step collapses or max_steps is exceeded.
std::vector<Vector> dopri5(const OdeRhs& f, const Vector& y0, std::span<const double> grid,
                           const OdeTolerances& tol, OdeStats* stats = nullptr);

}  // namespace phrec
