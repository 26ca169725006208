#include "phrec/phase_type.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "phrec/error.hpp"

namespace phrec {

namespace {

constexpr std::string_view kModule = "ph-dist";

void check_time(double y) {
  if (!(y >= 0.0)) {
    throw Error(ErrorCode::NegativeTime, kModule, "y = " + std::to_string(y));
  }
}

}  // namespace

PhaseType::PhaseType(RowVector alpha, SubIntensity sub)
    : alpha_(std::move(alpha)), sub_(std::move(sub)) {
  if (alpha_.size() != sub_.dim()) {
    throw Error(ErrorCode::InvalidDistribution, kModule, "alpha length does not match T");
  }
  if (!alpha_.allFinite() || (alpha_.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidDistribution, kModule, "alpha has a negative entry");
  }
  if (std::abs(alpha_.sum() - 1.0) > kStructuralTol) {
    throw Error(ErrorCode::InvalidDistribution, kModule, "alpha does not sum to one");
  }
}

PhaseType make_phase_type(const RowVector& alpha, const Matrix& T) {
  return PhaseType(alpha, validate_subintensity(T));
}

double survival(const PhaseType& ph, double y) {
  check_time(y);
  const double s = (ph.alpha() * expm(ph.sub().T(), y)).sum();
  return std::clamp(s, 0.0, 1.0);
}

double cdf(const PhaseType& ph, double y) { return 1.0 - survival(ph, y); }

double density(const PhaseType& ph, double y) {
  check_time(y);
  const double f = ph.alpha() * expm(ph.sub().T(), y) * ph.sub().exit();
  return std::max(f, 0.0);
}

double moment(const PhaseType& ph, int k) {
  if (k < 0) {
    throw Error(ErrorCode::InvalidDistribution, kModule, "negative moment order");
  }
  // v_k = (-T)^{-1} v_{k-1}, v_0 = 1
  const Matrix minus_t = -ph.sub().T();
  Matrix v = Vector::Ones(ph.dim());
  double factorial = 1.0;
  for (int i = 1; i <= k; ++i) {
    v = solve(minus_t, v);
    factorial *= i;
  }
  return factorial * (ph.alpha() * v)(0, 0);
}

double laplace(const PhaseType& ph, double s) {
  if (!(s >= 0.0)) {
    throw Error(ErrorCode::Singular, kModule, "Laplace argument must be >= 0");
  }
  const Eigen::Index m = ph.dim();
  const Matrix lhs = s * Matrix::Identity(m, m) - ph.sub().T();
  const Matrix x = solve(lhs, ph.sub().exit());
  return (ph.alpha() * x)(0, 0);
}

JumpChain::JumpChain(const SubIntensity& sub) {
  const Matrix& T = sub.T();
  const auto m = static_cast<int>(T.rows());
  rates_.resize(m);
  cumulative_.resize(m);
  targets_.resize(m);
  for (int i = 0; i < m; ++i) {
    rates_[i] = -T(i, i);
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j != i && T(i, j) > 0.0) {
        acc += T(i, j);
        cumulative_[i].push_back(acc);
        targets_[i].push_back(j);
      }
    }
    if (sub.exit()(i) > 0.0) {
      acc += sub.exit()(i);
      cumulative_[i].push_back(acc);
      targets_[i].push_back(kAbsorbed);
    }
    // Normalise by the accumulated total rather than the diagonal so rounding
    // in the diagonal never leaves a gap at the top of the table.
    for (double& c : cumulative_[i]) c /= acc > 0.0 ? acc : 1.0;
  }
}

int JumpChain::draw_initial(const RowVector& alpha, Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < alpha.size(); ++i) {
    if (alpha(i) <= 0.0) continue;
    acc += alpha(i);
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

JumpChain::Jump JumpChain::step(int state, Rng& rng) const {
  const double rate = rates_[state];
  if (!(rate > 0.0) || cumulative_[state].empty()) {
    return {std::numeric_limits<double>::infinity(), state};
  }
  const double holding = rng.exponential(rate);
  const double u = rng.uniform();
  const auto& cum = cumulative_[state];
  const auto it = std::upper_bound(cum.begin(), cum.end(), u);
  const auto idx = std::min<std::size_t>(it - cum.begin(), cum.size() - 1);
  return {holding, targets_[state][idx]};
}

SamplePath sample(const PhaseType& ph, std::uint64_t seed) {
  const JumpChain chain(ph.sub());
  Rng rng(seed);
  SamplePath path;
  int state = chain.draw_initial(ph.alpha(), rng);
  while (state != JumpChain::kAbsorbed) {
    path.states.push_back(state);
    const auto jump = chain.step(state, rng);
    path.time += jump.holding;
    if (!std::isfinite(path.time)) break;
    state = jump.next;
  }
  return path;
}

}  // namespace phrec
