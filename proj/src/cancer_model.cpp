#include "phrec/cancer_model.hpp"

#include <cmath>
#include <string>

#include "phrec/count_ode.hpp"
#include "phrec/error.hpp"
#include "phrec/parallel.hpp"

namespace phrec {

StageModel build_cancer_generator(const CancerParams& params, int start_stage, ForwardReading reading) {
  if (start_stage < 0 || start_stage >= kCancerStages) {
    throw Error(ErrorCode::IndexOutOfRange, "cancer-model", "start stage " + std::to_string(start_stage));
  }
  constexpr int m = kCancerStages * kCancerStates;
  // 1-based state numbers, column 0 collects deaths.
  Matrix rates = Matrix::Zero(m + 1, m + 1);
  const auto progression = [&](int i) { return params.a + params.q * std::pow(i, params.p); };

  for (int i = 1; i < m; ++i) {
    if (i % kCancerStates != 0) rates(i, i + 1) = params.lambda;
  }
  for (int i = 6; i <= 10; ++i) {
    for (int l = 0; l <= 4; ++l) rates(i + 5 * l, i - 5) = params.gamma * std::pow(0.1, l);
  }
  for (int i = 11; i <= 15; ++i) {
    for (int l = 0; l <= 3; ++l) rates(i + 5 * l, i + 5 * (l - 1)) = params.beta * std::pow(0.1, l);
  }
  const int first = reading == ForwardReading::Printed ? 1 : 0;
  for (int i = 1; i <= 5; ++i) {
    for (int l = first; l <= first + 3; ++l) rates(i + 5 * l, i + 5 * (l + 1)) += (l + 1) * progression(i);
    for (int l = 0; l <= 4; ++l) rates(i, i + 5 * (l + 1)) += std::pow(0.1, l) * progression(i);
    rates(i, 0) = std::pow(0.1, 5) + progression(i);
    for (int l = 0; l <= 4; ++l) rates(i + 5 * (l + 1), 0) = std::pow(0.1, 4 - l) + progression(i);
  }

  Matrix T = rates.bottomRightCorner(m, m);
  for (int r = 0; r < m; ++r) T(r, r) = -(T.row(r).sum() + rates(r + 1, 0));
  RowVector alpha = RowVector::Zero(m);
  alpha(start_stage * kCancerStates) = 1.0;
  return make_stage_model(kCancerStages, kCancerStates, T, alpha, {"R", "0", "1", "2", "3", "4"}, "month");
}

CancerTables cancer_tables(const CancerParams& params, ForwardReading reading, int threads) {
  CancerTables tables;
  parallel_for(5, threads, [&](std::size_t c) {
    const int stage = cancer_stage(static_cast<int>(c));
    const StageModel model = build_cancer_generator(params, stage, reading);
    const CountDistribution dist = count_distribution(model, stage, tables.horizons, 2);
    for (const auto& row : dist.probs) tables.count[c].push_back({row[0], row[1], row[2]});
    for (const double t : tables.horizons) tables.sojourn[c].push_back(expected_sojourn(model, stage, 0.0, t));
    tables.one_step[c].assign(tables.step_horizons.size(), {});
    for (int j = 0; j <= model.death(); ++j) {
      if (j == stage) continue;
      const auto probs = count_prob_between(model, stage, j, tables.step_horizons, 1);
      for (std::size_t h = 0; h < probs.size(); ++h) tables.one_step[c][h][j] = probs[h];
    }
  });
  return tables;
}

}  // namespace phrec
