#pragma once

// Reference computations that share no code with the library.

#include <cmath>
#include <algorithm>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::MatrixXd;

// Taylor series of e^{tA} after scaling by 2^s, then squaring.
inline MatrixXd series_expm(const MatrixXd& a, double t) {
  MatrixXd scaled = a * t;
  int squarings = 0;
  while (scaled.cwiseAbs().rowwise().sum().maxCoeff() > 0.5) {
    scaled /= 2.0;
    ++squarings;
  }
  const auto n = a.rows();
  MatrixXd sum = MatrixXd::Identity(n, n);
  MatrixXd term = MatrixXd::Identity(n, n);
  for (int k = 1; k < 40; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                           double fm, double fb, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

// Adaptive Simpson on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double eps = 1e-12) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, eps, 50);
}

// Sub-intensity with every rate drawn from [0, max_rate] and a positive
// exit from each row.
inline MatrixXd random_subintensity(int dim, double max_rate, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> rate(0.0, max_rate);
  MatrixXd t = MatrixXd::Zero(dim, dim);
  for (int r = 0; r < dim; ++r) {
    double total = 0.05 + rate(gen) * 0.5;
    for (int c = 0; c < dim; ++c) {
      if (c == r) continue;
      t(r, c) = rate(gen);
      total += t(r, c);
    }
    t(r, r) = -total;
  }
  return t;
}

// P[N(t) = l], l = 0..lmax, from one exponential of a generator whose states
// are (chain state, transitions so far), capped at lmax + 1, plus one
// absorbing state per count. stage_of maps chain states to stages.
inline std::vector<double> layered_counts(const MatrixXd& t, const std::vector<int>& stage_of,
                                          const Eigen::RowVectorXd& alpha, double time, int lmax) {
  const int m = static_cast<int>(t.rows());
  const int layers = lmax + 2;
  const int size = layers * m + layers;
  MatrixXd g = MatrixXd::Zero(size, size);
  const Eigen::VectorXd exit = -(t * Eigen::VectorXd::Ones(m));
  for (int c = 0; c < layers; ++c) {
    for (int r = 0; r < m; ++r) {
      for (int s = 0; s < m; ++s) {
        if (s == r || t(r, s) == 0.0) continue;
        const int next = std::min(c + (stage_of[r] != stage_of[s] ? 1 : 0), layers - 1);
        g(c * m + r, next * m + s) += t(r, s);
      }
      g(c * m + r, layers * m + std::min(c + 1, layers - 1)) += std::max(exit(r), 0.0);
      g(c * m + r, c * m + r) = t(r, r);
    }
  }
  Eigen::RowVectorXd start = Eigen::RowVectorXd::Zero(size);
  start.head(m) = alpha;
  const Eigen::RowVectorXd end = start * series_expm(g, time);
  std::vector<double> out(lmax + 1);
  for (int l = 0; l <= lmax; ++l) out[l] = end.segment(l * m, m).sum() + end(layers * m + l);
  return out;
}

}  // namespace oracle
