#include "phrec/stage_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "phrec/error.hpp"

namespace phrec {

namespace {

constexpr std::string_view kModule = "stage-model";
constexpr double kConditioningFloor = 1e-300;

void check_stage(const StageModel& model, int i, bool allow_death = false) {
  const int hi = allow_death ? model.k() : model.k() - 1;
  if (i < 0 || i > hi) {
    throw Error(ErrorCode::IndexOutOfRange, kModule, "stage " + std::to_string(i));
  }
}

void check_time(double t, const char* name) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::NegativeTime, kModule, std::string(name) + " = " + std::to_string(t));
  }
}

// Row vector alpha e^{Tu} restricted to stage i (other entries zeroed) and
// its total mass.
std::pair<RowVector, double> restricted_mass(const StageModel& model, int i, double u) {
  const RowVector at_u = model.alpha() * expm(model.T(), u);
  RowVector restricted = RowVector::Zero(model.dim());
  restricted.segment(model.offset(i), model.n()) = at_u.segment(model.offset(i), model.n());
  const double mass = restricted.sum();
  if (!(mass >= kConditioningFloor)) {
    throw Error(ErrorCode::ZeroProbabilityStage, kModule,
                "P[J_u in stage " + std::to_string(i) + "] is below 1e-300");
  }
  return {restricted, mass};
}

}  // namespace

StageModel::StageModel(int k, int n, SubIntensity full, RowVector alpha,
                       std::vector<std::string> labels, std::string time_unit)
    : k_(k),
      n_(n),
      full_(std::move(full)),
      alpha_(std::move(alpha)),
      labels_(std::move(labels)),
      time_unit_(std::move(time_unit)) {
  if (k_ < 1 || n_ < 1 || full_.dim() != static_cast<Eigen::Index>(k_) * n_) {
    throw Error(ErrorCode::InvalidModel, kModule, "dim(T) must equal k*n");
  }
  if (alpha_.size() != full_.dim() || !alpha_.allFinite() || (alpha_.array() < 0.0).any() ||
      std::abs(alpha_.sum() - 1.0) > kStructuralTol) {
    throw Error(ErrorCode::InvalidModel, kModule, "alpha must be a probability vector of length k*n");
  }
  if (labels_.empty()) {
    for (int i = 0; i < k_; ++i) labels_.push_back(std::to_string(i + 1));
  }
  if (static_cast<int>(labels_.size()) != k_) {
    throw Error(ErrorCode::InvalidModel, kModule, "need one label per stage");
  }
}

StageModel StageModel::with_alpha(RowVector alpha) const {
  return StageModel(k_, n_, full_, std::move(alpha), labels_, time_unit_);
}

StageModel make_stage_model(int k, int n, const Matrix& T, const RowVector& alpha,
                            std::vector<std::string> labels, std::string time_unit,
                            bool require_exit) {
  return StageModel(k, n, validate_subintensity(T, require_exit), alpha, std::move(labels),
                    std::move(time_unit));
}

Matrix block(const StageModel& model, int i, int j) {
  check_stage(model, i);
  check_stage(model, j);
  return model.T().block(model.offset(i), model.offset(j), model.n(), model.n());
}

Vector exit_to_death(const StageModel& model, int i) {
  check_stage(model, i);
  return model.full().exit().segment(model.offset(i), model.n());
}

Matrix stage_embedding(const StageModel& model, int i) {
  check_stage(model, i);
  Matrix e = Matrix::Zero(model.dim(), model.n());
  e.block(model.offset(i), 0, model.n(), model.n()).setIdentity();
  return e;
}

Vector stage_indicator(const StageModel& model, int i) {
  check_stage(model, i);
  Vector v = Vector::Zero(model.dim());
  v.segment(model.offset(i), model.n()).setOnes();
  return v;
}

RowVector stage_start_vector(const StageModel& model, int i) {
  check_stage(model, i);
  const RowVector slice = model.alpha().segment(model.offset(i), model.n());
  const double mass = slice.sum();
  if (!(mass >= kConditioningFloor)) {
    throw Error(ErrorCode::ZeroProbabilityStage, kModule,
                "alpha has no mass on stage " + std::to_string(i));
  }
  return slice / mass;
}

RowVector conditioned_alpha(const StageModel& model, int i, double u) {
  check_stage(model, i);
  check_time(u, "u");
  const auto [restricted, mass] = restricted_mass(model, i, u);
  return restricted.segment(model.offset(i), model.n()) / mass;
}

PhaseType stage_sojourn_distribution(const StageModel& model, int i, double u) {
  return PhaseType(conditioned_alpha(model, i, u), validate_subintensity(block(model, i, i)));
}

double expected_sojourn(const StageModel& model, int i, double u, double t) {
  check_stage(model, i);
  check_time(u, "u");
  check_time(t, "t");
  const RowVector start = conditioned_alpha(model, i, u);
  if (t == 0.0) return 0.0;
  // Top-right column of exp([[T_i, 1], [0, 0]] t) is int_0^t e^{T_i w} dw 1,
  // which equals T_i^{-1} (e^{T_i t} - I) 1 without requiring T_i^{-1}.
  const int n = model.n();
  Matrix augmented = Matrix::Zero(n + 1, n + 1);
  augmented.topLeftCorner(n, n) = block(model, i, i);
  augmented.topRightCorner(n, 1).setOnes();
  const Matrix e = expm(augmented, t);
  const double value = (start * e.topRightCorner(n, 1)).value();
  return std::clamp(value, 0.0, t);
}

double stage_transition_prob(const StageModel& model, int i, int j, double u, double t) {
  check_stage(model, i);
  check_stage(model, j, true);
  check_time(u, "u");
  check_time(t, "t");
  const auto [restricted, mass] = restricted_mass(model, i, u);
  const RowVector at_t = restricted * expm(model.T(), t);
  double value = 0.0;
  if (j == model.death()) {
    value = mass - at_t.sum();
  } else {
    value = at_t.segment(model.offset(j), model.n()).sum();
  }
  return std::clamp(value / mass, 0.0, 1.0);
}

}  // namespace phrec
