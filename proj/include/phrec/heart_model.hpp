#pragma once

// Two-stage (disease, transplant) model of survival on a transplant waiting
// list. Each stage has n ordered states advanced at rate lambda0; disease
// states move to the matching transplant state at rate lambda1 and both
// stages die at covariate-dependent rates
//
//   disease:    a + b + q i^(p + g1 age_c + g2 year + g3 surgery)
//   transplant: a     + q i^(same exponent)
//
// Rates are per day.

#include <array>
#include <optional>
#include <vector>

#include "phrec/stage_model.hpp"

namespace phrec {

inline constexpr double kAgeCenter = 48.0;

struct HeartParams {
  double a = 0.0;
  double b = 0.0;
  double q = 0.0;
  double p = 0.0;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma3 = 0.0;
  int n = 3;

  static constexpr int kCount = 9;
  // Order: a, b, q, p, lambda0, lambda1, gamma1, gamma2, gamma3.
  std::vector<double> to_vector() const;
  static HeartParams from_vector(const std::vector<double>& v, int n);
  static const char* name(int index);
};

struct Covariates {
  double age = 0.0;
  double year = 0.0;
  int surgery = 0;
};

enum class Scenario {
  CensoredInDisease,        // f1
  CensoredAfterTransplant,  // f12
  DiedInDisease,            // f10
  DiedAfterTransplant,      // f20
};

struct PatientRecord {
  int id = 0;
  std::optional<double> transplant_time;  // days
  double end_time = 0.0;                  // days
  bool died = false;
  Covariates covariates;

  Scenario scenario() const;
};

// Death intensity used by f10 / f20: the stage's death rates only, or the
// stage's whole exit (death plus, for disease, transplant).
enum class ExitReading { DeathOnly, FullExit };

struct HeartOptions {
  double age_center = kAgeCenter;
  ExitReading exit = ExitReading::DeathOnly;
};

// Throws NonFiniteRate when a rate is not finite, InvalidModel for negative
// rates or n < 1.
StageModel build_generator(const HeartParams& theta, const Covariates& cov,
                           const HeartOptions& options = {});

// Stage 0 is disease, stage 1 transplant.
double f1(const StageModel& model, double t);
double f12(const StageModel& model, double s, double t);
double f10(const StageModel& model, double t, ExitReading exit = ExitReading::DeathOnly);
double f20(const StageModel& model, double s, double t, ExitReading exit = ExitReading::DeathOnly);

// Contribution of one patient under its scenario.
double patient_likelihood(const HeartParams& theta, const PatientRecord& patient,
                          const HeartOptions& options = {});

// Sum of log contributions. Throws NonPositiveLikelihood naming the patient
// whose contribution is not positive.
double log_likelihood(const HeartParams& theta, const std::vector<PatientRecord>& patients,
                      const HeartOptions& options = {});

// -2 (restricted - full).
double lrt(double full_loglik, double restricted_loglik);

// Estimates for n = 3 used as the reference point of the demo tables.
HeartParams reference_estimates();

// Derived quantities at fixed covariates, horizons in days
// (1, 3, 6 months, 1 and 3 years with 30-day months and 365-day years).
struct HeartTables {
  std::vector<double> horizons{30, 90, 180, 365, 1095};
  struct CountRow {
    Covariates cov;
    std::array<std::vector<double>, 3> p;  // p[l][h] = P[N(t) = l]
  };
  std::vector<CountRow> counts;  // ages 30, 50 x years 3, 5 x surgery 0, 1
  struct SojournRow {
    double age;
    std::vector<double> days;  // expected stay in disease, by horizon
  };
  std::vector<SojournRow> sojourn;  // ages 30, 40, 50, 60 at year 3, no surgery
  // Age 30, year 3, no surgery: P(in transplant at t), P(died directly from
  // disease by t), P(transplanted then died by t).
  std::array<std::vector<double>, 3> transitions;
};

HeartTables heart_tables(const HeartParams& theta, const HeartOptions& options = {});

}  // namespace phrec
