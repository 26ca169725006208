#pragma once

// Path simulation of a stage model for cross-checking the analytic modules.
// N(t) counts jumps between different stages plus the jump into death.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "phrec/stage_model.hpp"
#include "json.hpp"

namespace phrec {

struct SimSummary {
  std::size_t paths = 0;
  int start_stage = 0;
  std::vector<double> horizons;
  int lmax = 0;
  // [h][l] for l = 0..lmax; index lmax + 1 collects N(t) > lmax.
  std::vector<std::vector<double>> count_freq;
  std::vector<std::vector<double>> count_se;
  // [h]: mean of min(first exit from the start stage, t).
  std::vector<double> sojourn_mean;
  std::vector<double> sojourn_se;
  // [h][j]: fraction of paths in stage j at t; j == k is death.
  std::vector<std::vector<double>> stage_hit_freq;
};

// sqrt(p (1 - p) / paths).
double binomial_se(double p, std::size_t paths);

// Paths start from the normalised stage-i slice of alpha. Each path draws
// from its own stream seeded by (seed, path index), so results do not depend
// on the thread count.
SimSummary simulate_counts(const StageModel& model, int i, std::span<const double> horizons, int lmax,
                           std::size_t paths, std::uint64_t seed, int threads = 1);

struct SojournSummary {
  std::size_t paths = 0;
  std::size_t conditioned = 0;        // paths with J_u in stage i
  double mean = 0.0;                  // mean of min(exit after u, u + t) - u
  double se = 0.0;
  std::vector<double> state_freq;     // distribution over stage i's states at u
};

// Paths start from the model's alpha.
SojournSummary simulate_sojourn(const StageModel& model, int i, double u, double t, std::size_t paths,
                                std::uint64_t seed, int threads = 1);

nlohmann::json to_json(const SimSummary& summary);

}  // namespace phrec
