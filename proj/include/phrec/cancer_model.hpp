#pragma once

// Six-stage cancer model: a recovery stage R followed by cancer stages 0..4,
// five states each, with rates per month.

#include <array>
#include <vector>

#include "phrec/stage_model.hpp"

namespace phrec {

struct CancerParams {
  double lambda = 0.2;  // within-stage advance
  double gamma = 0.1;   // recovery
  double beta = 0.2;    // back-step to the previous cancer stage
  double a = 1e-3;
  double q = 1e-6;
  double p = 4.5;
};

// Index range of the forward family t_{i+5l, i+5(l+1)} = (l+1)(a + q i^p):
// l = 1..4 as printed, or l = 0..3.
enum class ForwardReading { Printed, Shifted };

inline constexpr int kCancerStages = 6;
inline constexpr int kCancerStates = 5;

// Model stage index of cancer stage c (0..4); R is stage 0.
constexpr int cancer_stage(int c) { return c + 1; }

// alpha puts mass 1 on the first state of `start_stage` (model index).
StageModel build_cancer_generator(const CancerParams& params = {}, int start_stage = cancer_stage(0),
                                  ForwardReading reading = ForwardReading::Printed);

struct CancerTables {
  std::vector<double> horizons{6, 12, 24, 36};        // months
  std::vector<double> step_horizons{6, 12};           // months
  // count[c][h][l] = P[N(t) = l], l = 0..2, for cancer input stage c.
  std::array<std::vector<std::array<double, 3>>, 5> count;
  // sojourn[c][h]: expected continuous stay in the input stage up to t.
  std::array<std::vector<double>, 5> sojourn;
  // one_step[c][h][j]: probability of exactly one transition, into
  // j = R, 0, 1, 2, 3, 4, D.
  std::array<std::vector<std::array<double, 7>>, 5> one_step;
};

CancerTables cancer_tables(const CancerParams& params = {},
                           ForwardReading reading = ForwardReading::Printed, int threads = 1);

}  // namespace phrec
