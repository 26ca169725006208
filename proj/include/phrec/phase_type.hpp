#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "phrec/matrix.hpp"
#include "phrec/rng.hpp"

namespace phrec {

// Absorption-time distribution with representation (alpha, T). The chain
// never starts in the absorbing state, so alpha sums to one.
class PhaseType {
 public:
  PhaseType(RowVector alpha, SubIntensity sub);

  const RowVector& alpha() const { return alpha_; }
  const SubIntensity& sub() const { return sub_; }
  Eigen::Index dim() const { return sub_.dim(); }

 private:
  RowVector alpha_;
  SubIntensity sub_;
};

PhaseType make_phase_type(const RowVector& alpha, const Matrix& T);

double survival(const PhaseType& ph, double y);
double cdf(const PhaseType& ph, double y);
double density(const PhaseType& ph, double y);

// E[Y^k] = k! alpha (-T^{-1})^k 1, by repeated solves.
double moment(const PhaseType& ph, int k);

// alpha (sI - T)^{-1} t0 for s >= 0.
double laplace(const PhaseType& ph, double s);

// Embedded jump chain of a sub-intensity: holding rate per state and
// cumulative jump tables (last column is absorption).
class JumpChain {
 public:
  static constexpr int kAbsorbed = -1;

  explicit JumpChain(const SubIntensity& sub);

  int draw_initial(const RowVector& alpha, Rng& rng) const;

  struct Jump {
    double holding;  // time spent in the current state
    int next;        // destination state or kAbsorbed
  };

  // A state with zero total rate holds forever (holding = +inf, next = itself).
  Jump step(int state, Rng& rng) const;

  int dim() const { return static_cast<int>(rates_.size()); }

 private:
  std::vector<double> rates_;
  std::vector<std::vector<double>> cumulative_;
  std::vector<std::vector<int>> targets_;
};

struct SamplePath {
  double time = 0.0;
  std::vector<int> states;
};

// Deterministic given seed.
SamplePath sample(const PhaseType& ph, std::uint64_t seed);

}  // namespace phrec
