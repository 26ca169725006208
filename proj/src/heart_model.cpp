#include "phrec/heart_model.hpp"

#include <cmath>
#include <string>

#include "phrec/count_ode.hpp"
#include "phrec/error.hpp"

namespace phrec {

namespace {

constexpr std::string_view kModule = "heart-model";

struct HeartBlocks {
  Matrix disease;     // T_1
  Matrix transplant;  // T_2
  Vector death1;      // q^1
  Vector death2;      // q^2
};

HeartBlocks heart_blocks(const HeartParams& theta, const Covariates& cov, double age_center) {
  const int n = theta.n;
  if (n < 1) throw Error(ErrorCode::InvalidModel, kModule, "n must be >= 1");
  for (const double r : {theta.a, theta.b, theta.q, theta.lambda0, theta.lambda1}) {
    if (!std::isfinite(r)) throw Error(ErrorCode::NonFiniteRate, kModule, "parameter not finite");
    if (r < 0.0) throw Error(ErrorCode::InvalidModel, kModule, "rates must be >= 0");
  }
  const double exponent = theta.p + theta.gamma1 * (cov.age - age_center) +
                          theta.gamma2 * cov.year + theta.gamma3 * cov.surgery;
  HeartBlocks h{Matrix::Zero(n, n), Matrix::Zero(n, n), Vector(n), Vector(n)};
  for (int i = 0; i < n; ++i) {
    const double shared = theta.a + theta.q * std::pow(static_cast<double>(i + 1), exponent);
    if (!std::isfinite(shared)) {
      throw Error(ErrorCode::NonFiniteRate, kModule,
                  "death rate of state " + std::to_string(i + 1) + " is not finite");
    }
    h.death1(i) = shared + theta.b;
    h.death2(i) = shared;
    const double advance = i + 1 < n ? theta.lambda0 : 0.0;
    if (i + 1 < n) {
      h.disease(i, i + 1) = advance;
      h.transplant(i, i + 1) = advance;
    }
    h.disease(i, i) = -(h.death1(i) + theta.lambda1 + advance);
    h.transplant(i, i) = -(h.death2(i) + advance);
  }
  return h;
}

void check_interval(double s, double t) {
  if (!(s >= 0.0) || !(t >= s) || !std::isfinite(t)) {
    throw Error(ErrorCode::BadInterval, kModule,
                "need 0 <= s <= t, got s = " + std::to_string(s) + ", t = " + std::to_string(t));
  }
}

void check_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::NegativeTime, kModule, "t = " + std::to_string(t));
  }
}

Vector death_column(const StageModel& model, int stage, ExitReading exit) {
  if (exit == ExitReading::DeathOnly) return exit_to_death(model, stage);
  return -(block(model, stage, stage) * Vector::Ones(model.n()));
}

// alpha_1 e^{T_1 s} T_12 e^{T_2 (t - s)}.
RowVector after_transplant(const StageModel& model, double s, double t) {
  check_interval(s, t);
  const RowVector start = stage_start_vector(model, 0);
  return start * expm(block(model, 0, 0), s) * block(model, 0, 1) * expm(block(model, 1, 1), t - s);
}

}  // namespace

std::vector<double> HeartParams::to_vector() const {
  return {a, b, q, p, lambda0, lambda1, gamma1, gamma2, gamma3};
}

HeartParams HeartParams::from_vector(const std::vector<double>& v, int n) {
  if (v.size() != kCount) {
    throw Error(ErrorCode::InvalidConfig, kModule, "expected 9 parameters");
  }
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], n};
}

const char* HeartParams::name(int index) {
  static constexpr const char* kNames[kCount] = {"a",       "b",       "q",      "p",     "lambda0",
                                                 "lambda1", "gamma1", "gamma2", "gamma3"};
  return kNames[index];
}

Scenario PatientRecord::scenario() const {
  if (transplant_time) return died ? Scenario::DiedAfterTransplant : Scenario::CensoredAfterTransplant;
  return died ? Scenario::DiedInDisease : Scenario::CensoredInDisease;
}

StageModel build_generator(const HeartParams& theta, const Covariates& cov,
                           const HeartOptions& options) {
  const HeartBlocks h = heart_blocks(theta, cov, options.age_center);
  const int n = theta.n;
  Matrix T = Matrix::Zero(2 * n, 2 * n);
  T.topLeftCorner(n, n) = h.disease;
  T.topRightCorner(n, n) = theta.lambda1 * Matrix::Identity(n, n);
  T.bottomRightCorner(n, n) = h.transplant;
  RowVector alpha = RowVector::Zero(2 * n);
  alpha(0) = 1.0;
  return make_stage_model(2, n, T, alpha, {"disease", "transplant"}, "day");
}

double f1(const StageModel& model, double t) {
  check_time(t);
  return (stage_start_vector(model, 0) * expm(block(model, 0, 0), t)).sum();
}

double f12(const StageModel& model, double s, double t) {
  return after_transplant(model, s, t).sum();
}

double f10(const StageModel& model, double t, ExitReading exit) {
  check_time(t);
  return (stage_start_vector(model, 0) * expm(block(model, 0, 0), t) * death_column(model, 0, exit))
      .value();
}

double f20(const StageModel& model, double s, double t, ExitReading exit) {
  return (after_transplant(model, s, t) * death_column(model, 1, exit)).value();
}

double patient_likelihood(const HeartParams& theta, const PatientRecord& patient,
                          const HeartOptions& options) {
  const HeartBlocks h = heart_blocks(theta, patient.covariates, options.age_center);
  const int n = theta.n;
  const bool full = options.exit == ExitReading::FullExit;
  const auto column = [&](const Matrix& sub, const Vector& death) -> Vector {
    return full ? Vector(-(sub * Vector::Ones(n))) : death;
  };
  const double split = patient.transplant_time.value_or(patient.end_time);
  check_interval(split, patient.end_time);
  // The chain starts in the first disease state, so alpha e^{T_1 s} is row 0.
  const RowVector in_disease = expm(h.disease, split).row(0);
  switch (patient.scenario()) {
    case Scenario::CensoredInDisease:
      return in_disease.sum();
    case Scenario::DiedInDisease:
      return (in_disease * column(h.disease, h.death1)).value();
    case Scenario::CensoredAfterTransplant:
    case Scenario::DiedAfterTransplant: {
      const RowVector after =
          theta.lambda1 * in_disease * expm(h.transplant, patient.end_time - split);
      return patient.died ? (after * column(h.transplant, h.death2)).value() : after.sum();
    }
  }
  return 0.0;
}

double log_likelihood(const HeartParams& theta, const std::vector<PatientRecord>& patients,
                      const HeartOptions& options) {
  double total = 0.0;
  for (const auto& patient : patients) {
    const double value = patient_likelihood(theta, patient, options);
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw Error(ErrorCode::NonPositiveLikelihood, kModule,
                  "patient " + std::to_string(patient.id) + " contributes " + std::to_string(value));
    }
    total += std::log(value);
  }
  return total;
}

double lrt(double full_loglik, double restricted_loglik) {
  return -2.0 * (restricted_loglik - full_loglik);
}

HeartParams reference_estimates() {
  return {4.9e-4, 0.0034, 6.4e-8, 9.3, 0.50, 0.0115, 0.098, -0.02, -0.92, 3};
}

HeartTables heart_tables(const HeartParams& theta, const HeartOptions& options) {
  HeartTables tables;
  for (const double age : {30.0, 50.0}) {
    for (const double year : {3.0, 5.0}) {
      for (const int surgery : {0, 1}) {
        const Covariates cov{age, year, surgery};
        const StageModel model = build_generator(theta, cov, options);
        const CountDistribution dist = count_distribution(model, 0, tables.horizons, 2);
        HeartTables::CountRow row{cov, {}};
        for (int l = 0; l <= 2; ++l) {
          for (const auto& at : dist.probs) row.p[l].push_back(at[l]);
        }
        tables.counts.push_back(std::move(row));
      }
    }
  }
  for (const double age : {30.0, 40.0, 50.0, 60.0}) {
    const StageModel model = build_generator(theta, {age, 3.0, 0}, options);
    HeartTables::SojournRow row{age, {}};
    for (const double t : tables.horizons) row.days.push_back(expected_sojourn(model, 0, 0.0, t));
    tables.sojourn.push_back(std::move(row));
  }
  const StageModel model = build_generator(theta, {30.0, 3.0, 0}, options);
  for (const double t : tables.horizons) tables.transitions[0].push_back(stage_transition_prob(model, 0, 1, 0.0, t));
  tables.transitions[1] = count_prob_between(model, 0, model.death(), tables.horizons, 1);
  tables.transitions[2] = sequence_prob(model, {0, {1, model.death()}}, tables.horizons);
  return tables;
}

}  // namespace phrec
