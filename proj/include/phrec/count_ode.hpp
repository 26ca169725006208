#pragma once

// Distribution of the number of stage transitions N(t) (moves between stages
// plus the final move into death) for a chain started in one stage.
//
// For a start stage i and a stage sequence (i_1, ..., i_m), the matrix
// x_{i_1..i_m}(t) collects the probability of following exactly that
// sequence by time t and obeys
//
//   d/dt x_{i_1..i_m} = x_{i_1..i_{m-1}} T_{i_{m-1}, i_m} + x_{i_1..i_m} T_{i_m},
//   x_{} = e^{T_i t},  x(0) = 0 otherwise.
//
// Death is a terminal pseudo-stage with T_D = 0 whose incoming block is the
// stage's death-rate column, so a D-terminated x is n x 1. Every sequence
// shares the state of its prefix, so the whole prefix tree is integrated as
// one stacked linear ODE.

#include <cstddef>
#include <span>
#include <vector>

#include "phrec/ode.hpp"
#include "phrec/stage_model.hpp"

namespace phrec {

// path entries are stage indices, or model.death() as the final entry.
struct StageSequence {
  int start = 0;
  std::vector<int> path;

  friend bool operator==(const StageSequence&, const StageSequence&) = default;
};

// Throws IndexOutOfRange / InvalidModel for sequences that repeat a stage in
// consecutive positions or place death anywhere but last.
void check_sequence(const StageModel& model, const StageSequence& seq);

enum class XForm {
  Matrix,  // x itself; the root starts at I (n x n)
  Row,     // alpha_i x; the root starts at the normalised stage slice (1 x n)
};

// Values of one sequence's x at each grid point.
struct XState {
  StageSequence sequence;
  std::vector<Matrix> values;
};

// Integrates the stacked system for sequences that are closed under prefixes
// (all sharing one start stage). Returns one XState per requested sequence, in
// input order.
std::vector<XState> integrate_x_system(const StageModel& model,
                                       const std::vector<StageSequence>& sequences,
                                       std::span<const double> grid,
                                       const OdeTolerances& tol = {}, XForm form = XForm::Matrix);

struct CountOptions {
  OdeTolerances tol;
  std::size_t max_sequences = 100'000;
  // Sequences whose probability of ever being entered by the last horizon is
  // below this bound are not extended. 0 disables pruning.
  double prune_below = 0.0;
  int threads = 1;
};

struct CountDistribution {
  int start_stage = 0;
  std::vector<double> horizons;
  int lmax = 0;
  std::vector<std::vector<double>> probs;  // probs[h][l] = P[N(horizons[h]) = l]
  std::size_t sequences = 0;               // number of x matrices integrated
};

// alpha_i e^{t T_i} 1.
double count_prob_zero(const StageModel& model, int i, double t);

CountDistribution count_distribution(const StageModel& model, int i, std::span<const double> horizons,
                                     int lmax, const CountOptions& options = {});

// P[N(t) = l and J_t in E_j] for a chain started in stage i (death allowed as
// j). For l = 1 this is the single-sequence term alpha_i x_{(j)}(t) 1.
std::vector<double> count_prob_between(const StageModel& model, int i, int j,
                                       std::span<const double> horizons, int l = 1,
                                       const CountOptions& options = {});

// alpha_i x_{path}(t) 1 for one explicit sequence.
std::vector<double> sequence_prob(const StageModel& model, const StageSequence& seq,
                                  std::span<const double> horizons, const OdeTolerances& tol = {});

}  // namespace phrec
