#pragma once

#include <string>
#include <vector>

#include "phrec/matrix.hpp"
#include "phrec/phase_type.hpp"

namespace phrec {

// k alive stages of n chain states each, laid out stage-major over one
// sub-intensity matrix. Stages are indexed 0..k-1; death is the pseudo-stage
// with index k in destination arguments.
class StageModel {
 public:
  StageModel(int k, int n, SubIntensity full, RowVector alpha, std::vector<std::string> labels,
             std::string time_unit);

  int k() const { return k_; }
  int n() const { return n_; }
  int dim() const { return k_ * n_; }
  int death() const { return k_; }
  const SubIntensity& full() const { return full_; }
  const Matrix& T() const { return full_.T(); }
  const RowVector& alpha() const { return alpha_; }
  const std::vector<std::string>& stage_labels() const { return labels_; }
  const std::string& time_unit() const { return time_unit_; }

  // First chain state of stage i.
  int offset(int stage) const { return stage * n_; }

  // Same chain, different initial vector.
  StageModel with_alpha(RowVector alpha) const;

 private:
  int k_;
  int n_;
  SubIntensity full_;
  RowVector alpha_;
  std::vector<std::string> labels_;
  std::string time_unit_;
};

StageModel make_stage_model(int k, int n, const Matrix& T, const RowVector& alpha,
                            std::vector<std::string> labels = {}, std::string time_unit = "unit",
                            bool require_exit = true);

// T_i for i == j, T_{i,j} otherwise.
Matrix block(const StageModel& model, int i, int j);

// Death rates of the n states of stage i.
Vector exit_to_death(const StageModel& model, int i);

// I_{E,E_i}: (k n) x n selector with a unit at (n i + l, l).
Matrix stage_embedding(const StageModel& model, int i);

// 1_i: indicator of stage i's states.
Vector stage_indicator(const StageModel& model, int i);

// Stage-i slice of alpha, normalised. Throws ZeroProbabilityStage when alpha
// has no mass on stage i.
RowVector stage_start_vector(const StageModel& model, int i);

// Distribution over stage i's states at time u given J_u in E_i.
RowVector conditioned_alpha(const StageModel& model, int i, double u);

// Continuous stay in stage i entered through conditioned_alpha(i, u).
PhaseType stage_sojourn_distribution(const StageModel& model, int i, double u);

// Expected time spent continuously in stage i during [u, u + t] given J_u in E_i.
double expected_sojourn(const StageModel& model, int i, double u, double t);

// P[J_{u+t} in E_j | J_u in E_i]; j == model.death() gives absorbed mass.
double stage_transition_prob(const StageModel& model, int i, int j, double u, double t);

}  // namespace phrec
