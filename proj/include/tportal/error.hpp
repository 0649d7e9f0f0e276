#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tportal {

enum class ErrorCode {
  InvalidArgument,
  Io,
  MalformedRow,
  DuplicateMatchId,
  UnknownPosition,
  MixedMatches,
  UnknownTeam,
  BrokenAncestry,
  OutOfOrderDate,
  NoData,
  CyclicDependency,
  EmptyLeague,
  InsufficientData,
  SingularDesign,
  UnfittedModel,
  ZeroDenominator,
  ShapeMismatch,
  EmptyDataset,
  DivergedLoss,
  MissingEntity,
  AllZeroWeights,
  EmptyAfterFilters,
  EmptyCohort,
  ScenarioMismatch,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the library is reported through this type; `code()` is
/// the machine-readable part, `what()` carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tportal
