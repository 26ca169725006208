#pragma once

// Maximum-likelihood fitting of the heart model: Nelder-Mead on a smooth
// bijection of the parameter box, multi-start, and a nonparametric bootstrap
// over patients.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phrec/heart_model.hpp"
#include "json.hpp"

namespace phrec {

struct ParamBounds {
  double lo = 0.0;
  double hi = 0.0;
  bool log_scale = false;  // searched uniformly in log(theta)
};

using BoundsTable = std::array<ParamBounds, HeartParams::kCount>;

// a, b, q in [1e-12, 1]; p in [0, 20]; lambda0, lambda1 in [1e-12, 5];
// gammas in [-5, 5].
BoundsTable default_bounds();

// Index in HeartParams::to_vector() order; throws InvalidConfig for unknown names.
int param_index(const std::string& name);

struct FitConfig {
  int n_states = 3;
  BoundsTable bounds = default_bounds();
  int starts = 32;
  bool central_start = true;             // first start at a fixed mid-box guess
  std::vector<HeartParams> initial;      // extra warm starts, run before the others
  int max_evals = 20000;                 // per start, including restarts
  int max_restarts = 3;
  double xtol = 1e-6;                    // simplex spread in unit-box coordinates
  double ftol = 1e-8;
  double initial_step = 0.5;             // simplex edge in transformed coordinates
  std::uint64_t seed = 1;
  int threads = 1;
  HeartOptions heart;
};

struct FitResult {
  HeartParams theta;
  double loglik = 0.0;
  bool converged = false;
  long evals = 0;
  int best_start = 0;
  int failed_starts = 0;
  std::vector<double> start_logliks;  // best value reached from each start
};

// Throws InvalidConfig for bad bounds or counts, AllStartsFailed when no start
// reaches a finite likelihood.
FitResult fit(const std::vector<PatientRecord>& patients, const FitConfig& config);

// Same search with the listed parameters held at 0.
FitResult fit_restricted(const std::vector<PatientRecord>& patients, const FitConfig& config,
                         const std::vector<int>& frozen);

struct BootstrapResult {
  std::vector<FitResult> replicates;  // successful replicates, by index
  std::vector<int> failed;            // indices of replicates that failed
  std::array<double, HeartParams::kCount> std{};
  std::array<std::array<double, 2>, HeartParams::kCount> ci95{};
  std::array<double, HeartParams::kCount> median{};
};

struct BootstrapConfig {
  int replicates = 1000;
  std::uint64_t seed = 1;
  // Per-replicate seeds; when empty they are derived from (seed, index).
  std::vector<std::uint64_t> seed_table;
  std::vector<int> frozen;
  int threads = 1;
};

// Resamples patients with replacement, refits each resample from `point` plus
// one quasi-random start, and summarises the estimates. Throws BootstrapFailed
// when more than 10% of replicates fail.
BootstrapResult bootstrap(const std::vector<PatientRecord>& patients, const FitConfig& config,
                          const BootstrapConfig& boot, const HeartParams& point);

// Patient indices drawn for one replicate.
std::vector<std::size_t> resample_indices(std::size_t count, std::uint64_t seed);

nlohmann::json to_json(const HeartParams& theta);
nlohmann::json to_json(const FitResult& result);
nlohmann::json to_json(const BootstrapResult& result, const FitResult& point);

}  // namespace phrec
