#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phrec {

enum class ErrorCode {
  // matrix-core
  NotSquare,
  SignViolation,
  RowSumPositive,
  AllRowsConservative,
  Overflow,
  Singular,
  // ph-dist / stage-model
  InvalidDistribution,
  NegativeTime,
  IndexOutOfRange,
  ZeroProbabilityStage,
  InvalidModel,
  // count-ode
  SequenceExplosion,
  StepSizeUnderflow,
  // heart-model / fitter
  NonFiniteRate,
  BadInterval,
  NonPositiveLikelihood,
  AllStartsFailed,
  InvalidConfig,
  BootstrapFailed,
  // ingestion / cli
  MalformedRow,
  InconsistentPair,
  NonmonotoneInterval,
  MalformedDocument,
  UnknownFlag,
};

std::string_view to_string(ErrorCode code);

// Validation errors map to CLI exit code 1, numerical failures to 2.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string_view module, const std::string& detail);

  ErrorCode code() const { return code_; }
  const std::string& module() const { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

}  // namespace phrec
