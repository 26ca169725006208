#include "phrec/mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "phrec/error.hpp"
#include "phrec/parallel.hpp"
#include "phrec/phase_type.hpp"
#include "phrec/rng.hpp"

namespace phrec {

namespace {

constexpr std::string_view kModule = "mc-oracle";
constexpr std::size_t kChunk = 4096;

struct CountTally {
  std::vector<std::vector<std::size_t>> counts;  // [h][l]
  std::vector<std::vector<std::size_t>> stages;  // [h][j]
  std::vector<double> sojourn;                   // [h]
  std::vector<double> sojourn_sq;                // [h]
};

struct SojournTally {
  std::size_t conditioned = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::vector<std::size_t> states;
};

void check_paths(std::size_t paths) {
  if (paths < 1) throw Error(ErrorCode::InvalidConfig, kModule, "paths must be >= 1");
}

int stage_of(const StageModel& model, int state) {
  return state == JumpChain::kAbsorbed ? model.death() : state / model.n();
}

// Chunks of paths are tallied independently and merged in index order.
template <typename Tally, typename Init, typename Path>
std::vector<Tally> run_chunks(std::size_t paths, int threads, Init init, Path path) {
  const std::size_t chunks = (paths + kChunk - 1) / kChunk;
  std::vector<Tally> tallies(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    Tally tally = init();
    const std::size_t end = std::min(paths, (c + 1) * kChunk);
    for (std::size_t p = c * kChunk; p < end; ++p) path(p, tally);
    tallies[c] = std::move(tally);
  });
  return tallies;
}

}  // namespace

double binomial_se(double p, std::size_t paths) {
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(paths));
}

SimSummary simulate_counts(const StageModel& model, int i, std::span<const double> horizons, int lmax,
                           std::size_t paths, std::uint64_t seed, int threads) {
  check_paths(paths);
  if (lmax < 0) throw Error(ErrorCode::InvalidConfig, kModule, "lmax must be >= 0");
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    if (!(horizons[h] >= 0.0) || (h > 0 && horizons[h] < horizons[h - 1])) {
      throw Error(ErrorCode::NegativeTime, kModule, "horizons must be ascending and non-negative");
    }
  }
  RowVector alpha = RowVector::Zero(model.dim());
  alpha.segment(model.offset(i), model.n()) = stage_start_vector(model, i);
  const JumpChain chain(model.full());
  const std::size_t H = horizons.size();
  const int k = model.k();

  const auto init = [&] {
    return CountTally{std::vector<std::vector<std::size_t>>(H, std::vector<std::size_t>(lmax + 2, 0)),
                      std::vector<std::vector<std::size_t>>(H, std::vector<std::size_t>(k + 1, 0)),
                      std::vector<double>(H, 0.0), std::vector<double>(H, 0.0)};
  };
  const auto path = [&](std::size_t p, CountTally& tally) {
    Rng rng(derive_seed(seed, p));
    int state = chain.draw_initial(alpha, rng);
    int stage = i;
    int count = 0;
    double time = 0.0;
    double first_exit = std::numeric_limits<double>::infinity();
    std::size_t h = 0;
    const auto record_until = [&](double next_time) {
      // Horizons strictly before the next jump see the current state.
      while (h < H && horizons[h] < next_time) {
        ++tally.counts[h][std::min(count, lmax + 1)];
        ++tally.stages[h][stage];
        const double stay = std::min(first_exit, horizons[h]);
        tally.sojourn[h] += stay;
        tally.sojourn_sq[h] += stay * stay;
        ++h;
      }
    };
    while (h < H) {
      if (state == JumpChain::kAbsorbed) {
        record_until(std::numeric_limits<double>::infinity());
        break;
      }
      const auto jump = chain.step(state, rng);
      const double next_time = time + jump.holding;
      record_until(next_time);
      if (h == H) break;
      const int next_stage = stage_of(model, jump.next);
      if (next_stage != stage) {
        ++count;
        if (!std::isfinite(first_exit)) first_exit = next_time;
      }
      time = next_time;
      state = jump.next;
      stage = next_stage;
    }
  };
  const auto tallies = run_chunks<CountTally>(paths, threads, init, path);

  CountTally total = init();
  for (const auto& t : tallies) {
    for (std::size_t h = 0; h < H; ++h) {
      for (int l = 0; l <= lmax + 1; ++l) total.counts[h][l] += t.counts[h][l];
      for (int j = 0; j <= k; ++j) total.stages[h][j] += t.stages[h][j];
      total.sojourn[h] += t.sojourn[h];
      total.sojourn_sq[h] += t.sojourn_sq[h];
    }
  }
  SimSummary out;
  out.paths = paths;
  out.start_stage = i;
  out.horizons.assign(horizons.begin(), horizons.end());
  out.lmax = lmax;
  const double N = static_cast<double>(paths);
  for (std::size_t h = 0; h < H; ++h) {
    std::vector<double> freq, se, hit;
    for (int l = 0; l <= lmax + 1; ++l) {
      freq.push_back(total.counts[h][l] / N);
      se.push_back(binomial_se(freq.back(), paths));
    }
    for (int j = 0; j <= k; ++j) hit.push_back(total.stages[h][j] / N);
    out.count_freq.push_back(std::move(freq));
    out.count_se.push_back(std::move(se));
    out.stage_hit_freq.push_back(std::move(hit));
    const double mean = total.sojourn[h] / N;
    const double var = paths > 1 ? std::max(total.sojourn_sq[h] / N - mean * mean, 0.0) * N / (N - 1) : 0.0;
    out.sojourn_mean.push_back(mean);
    out.sojourn_se.push_back(std::sqrt(var / N));
  }
  return out;
}

SojournSummary simulate_sojourn(const StageModel& model, int i, double u, double t, std::size_t paths,
                                std::uint64_t seed, int threads) {
  check_paths(paths);
  if (i < 0 || i >= model.k()) throw Error(ErrorCode::IndexOutOfRange, kModule, "stage " + std::to_string(i));
  if (!(u >= 0.0) || !(t >= 0.0)) throw Error(ErrorCode::NegativeTime, kModule, "u and t must be >= 0");
  const JumpChain chain(model.full());
  const int n = model.n();

  const auto init = [&] { return SojournTally{0, 0.0, 0.0, std::vector<std::size_t>(n, 0)}; };
  const auto path = [&](std::size_t p, SojournTally& tally) {
    Rng rng(derive_seed(seed, p));
    int state = chain.draw_initial(model.alpha(), rng);
    double time = 0.0;
    // Advance to the jump that straddles u.
    while (true) {
      if (state == JumpChain::kAbsorbed) return;
      const auto jump = chain.step(state, rng);
      if (time + jump.holding > u) {
        if (stage_of(model, state) != i) return;
        ++tally.conditioned;
        ++tally.states[state - model.offset(i)];
        double exit = time + jump.holding;
        int next = jump.next;
        while (exit < u + t && stage_of(model, next) == i) {
          const auto more = chain.step(next, rng);
          exit += more.holding;
          next = more.next;
        }
        const double stay = std::min(exit, u + t) - u;
        tally.sum += stay;
        tally.sum_sq += stay * stay;
        return;
      }
      time += jump.holding;
      state = jump.next;
    }
  };
  const auto tallies = run_chunks<SojournTally>(paths, threads, init, path);

  SojournTally total = init();
  for (const auto& tl : tallies) {
    total.conditioned += tl.conditioned;
    total.sum += tl.sum;
    total.sum_sq += tl.sum_sq;
    for (int s = 0; s < n; ++s) total.states[s] += tl.states[s];
  }
  SojournSummary out;
  out.paths = paths;
  out.conditioned = total.conditioned;
  out.state_freq.assign(n, 0.0);
  if (total.conditioned == 0) return out;
  const double m = static_cast<double>(total.conditioned);
  out.mean = total.sum / m;
  const double var = m > 1 ? std::max(total.sum_sq / m - out.mean * out.mean, 0.0) * m / (m - 1) : 0.0;
  out.se = std::sqrt(var / m);
  for (int s = 0; s < n; ++s) out.state_freq[s] = total.states[s] / m;
  return out;
}

nlohmann::json to_json(const SimSummary& summary) {
  return {{"paths", summary.paths},
          {"start_stage", summary.start_stage},
          {"horizons", summary.horizons},
          {"lmax", summary.lmax},
          {"count_freq", summary.count_freq},
          {"count_se", summary.count_se},
          {"sojourn_mean", summary.sojourn_mean},
          {"sojourn_se", summary.sojourn_se},
          {"stage_hit_freq", summary.stage_hit_freq}};
}

}  // namespace phrec
