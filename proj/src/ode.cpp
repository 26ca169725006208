#include "phrec/ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "phrec/error.hpp"

namespace phrec {

namespace {

constexpr std::string_view kModule = "count-ode";

// Butcher tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b5 - b4 (embedded 4th-order weights).
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

// Continuous extension: y(t + x h) = y + h * sum_s K_s * sum_p P[s][p] x^{p+1}.
constexpr std::array<std::array<double, 4>, 7> kDense = {{
    {1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
     -12715105075.0 / 11282082432.0},
    {0.0, 0.0, 0.0, 0.0},
    {0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
     87487479700.0 / 32700410799.0},
    {0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
     -10690763975.0 / 1880347072.0},
    {0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
     701980252875.0 / 199316789632.0},
    {0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
     -1453857185.0 / 822651844.0},
    {0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0},
}};

double scaled_rms(const Vector& v, const Vector& y, const OdeTolerances& tol) {
  if (v.size() == 0) return 0.0;
  const Vector scale = (tol.atol + tol.rtol * y.array().abs()).matrix();
  return std::sqrt((v.array() / scale.array()).square().mean());
}

}  // namespace

std::vector<Vector> dopri5(const OdeRhs& f, const Vector& y0, std::span<const double> grid,
                           const OdeTolerances& tol, OdeStats* stats) {
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!(grid[g] >= 0.0) || (g > 0 && grid[g] < grid[g - 1])) {
      throw Error(ErrorCode::NegativeTime, kModule, "grid must be ascending and non-negative");
    }
  }
  std::vector<Vector> out;
  out.reserve(grid.size());
  OdeStats local;
  const Eigen::Index dim = y0.size();
  const double t_end = grid.empty() ? 0.0 : grid.back();

  std::size_t next = 0;
  while (next < grid.size() && grid[next] == 0.0) {
    out.push_back(y0);
    ++next;
  }
  if (next == grid.size()) {
    if (stats) *stats = local;
    return out;
  }

  Vector y = y0;
  std::array<Vector, 7> k;
  for (auto& s : k) s.resize(dim);
  Vector tmp(dim), y_new(dim), err(dim);
  double t = 0.0;

  f(t, y, k[0]);
  ++local.rhs_evals;

  // Initial step (Hairer, Norsett & Wanner II.4).
  double h = 0.0;
  {
    const double d0 = scaled_rms(y, y, tol);
    const double d1 = scaled_rms(k[0], y, tol);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t_end);
    tmp = y + h0 * k[0];
    f(t + h0, tmp, k[1]);
    ++local.rhs_evals;
    const double d2 = scaled_rms(k[1] - k[0], y, tol) / h0;
    const double big = std::max(d1, d2);
    const double h1 = big <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / big, 1.0 / 5.0);
    h = std::min({100.0 * h0, h1, t_end});
  }

  constexpr double kSafety = 0.9, kMinFactor = 0.2, kMaxFactor = 10.0;
  bool last_rejected = false;

  while (next < grid.size()) {
    if (local.accepted + local.rejected >= tol.max_steps) {
      throw Error(ErrorCode::StepSizeUnderflow, kModule, "step budget exhausted");
    }
    const double min_step = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < min_step) {
      throw Error(ErrorCode::StepSizeUnderflow, kModule, "step size collapsed at t = " + std::to_string(t));
    }
    h = std::min(h, t_end - t);

    tmp = y + h * (a21 * k[0]);
    f(t + c2 * h, tmp, k[1]);
    tmp = y + h * (a31 * k[0] + a32 * k[1]);
    f(t + c3 * h, tmp, k[2]);
    tmp = y + h * (a41 * k[0] + a42 * k[1] + a43 * k[2]);
    f(t + c4 * h, tmp, k[3]);
    tmp = y + h * (a51 * k[0] + a52 * k[1] + a53 * k[2] + a54 * k[3]);
    f(t + c5 * h, tmp, k[4]);
    tmp = y + h * (a61 * k[0] + a62 * k[1] + a63 * k[2] + a64 * k[3] + a65 * k[4]);
    f(t + h, tmp, k[5]);
    y_new = y + h * (b1 * k[0] + b3 * k[2] + b4 * k[3] + b5 * k[4] + b6 * k[5]);
    f(t + h, y_new, k[6]);
    local.rhs_evals += 6;

    err = h * (e1 * k[0] + e3 * k[2] + e4 * k[3] + e5 * k[4] + e6 * k[5] + e7 * k[6]);
    double err_norm = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double sc = tol.atol + tol.rtol * std::max(std::abs(y(i)), std::abs(y_new(i)));
      err_norm = std::max(err_norm, std::abs(err(i)) / sc);
    }
    if (!std::isfinite(err_norm)) {
      throw Error(ErrorCode::StepSizeUnderflow, kModule, "non-finite state");
    }

    if (err_norm <= 1.0) {
      const double t_new = (t_end - (t + h) <= 1e-12 * std::max(1.0, t_end)) ? t_end : t + h;
      while (next < grid.size() && grid[next] <= t_new) {
        const double x = (grid[next] - t) / h;
        if (grid[next] == t_new) {
          out.push_back(y_new);
        } else {
          Vector q = Vector::Zero(dim);
          const std::array<double, 4> powers = {x, x * x, x * x * x, x * x * x * x};
          for (std::size_t s = 0; s < 7; ++s) {
            double w = 0.0;
            for (std::size_t p = 0; p < 4; ++p) w += kDense[s][p] * powers[p];
            if (w != 0.0) q += w * k[s];
          }
          out.push_back(y + h * q);
        }
        ++next;
      }
      t = t_new;
      y = y_new;
      k[0] = k[6];
      ++local.accepted;
      double factor = err_norm == 0.0 ? kMaxFactor : kSafety * std::pow(err_norm, -0.2);
      factor = std::clamp(factor, kMinFactor, last_rejected ? 1.0 : kMaxFactor);
      h *= factor;
      last_rejected = false;
    } else {
      ++local.rejected;
      h *= std::max(kMinFactor, kSafety * std::pow(err_norm, -0.2));
      last_rejected = true;
    }
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace phrec
