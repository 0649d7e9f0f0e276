#include "tportal/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "tportal/error.hpp"

namespace tportal {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateMatchId: return "DuplicateMatchId";
    case ErrorCode::UnknownPosition: return "UnknownPosition";
    case ErrorCode::MixedMatches: return "MixedMatches";
    case ErrorCode::UnknownTeam: return "UnknownTeam";
    case ErrorCode::BrokenAncestry: return "BrokenAncestry";
    case ErrorCode::OutOfOrderDate: return "OutOfOrderDate";
    case ErrorCode::NoData: return "NoData";
    case ErrorCode::CyclicDependency: return "CyclicDependency";
    case ErrorCode::EmptyLeague: return "EmptyLeague";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::UnfittedModel: return "UnfittedModel";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::MissingEntity: return "MissingEntity";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::EmptyAfterFilters: return "EmptyAfterFilters";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::ScenarioMismatch: return "ScenarioMismatch";
  }
  return "Unknown";
}

std::optional<Metric> metric_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    if (kMetricNames[i] == name) return static_cast<Metric>(i);
  }
  return std::nullopt;
}

std::optional<Position> position_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kPositionCount; ++i) {
    if (kPositionNames[i] == name) return static_cast<Position>(i);
  }
  return std::nullopt;
}

MetricVector& MetricVector::operator+=(const MetricVector& o) {
  for (std::size_t i = 0; i < kMetricCount; ++i) values[i] += o.values[i];
  return *this;
}

MetricVector& MetricVector::operator-=(const MetricVector& o) {
  for (std::size_t i = 0; i < kMetricCount; ++i) values[i] -= o.values[i];
  return *this;
}

MetricVector& MetricVector::operator*=(double s) {
  for (double& v : values) v *= s;
  return *this;
}

MetricVector operator+(MetricVector a, const MetricVector& b) { return a += b; }
MetricVector operator-(MetricVector a, const MetricVector& b) { return a -= b; }
MetricVector operator*(MetricVector a, double s) { return a *= s; }
MetricVector operator*(double s, MetricVector a) { return a *= s; }

double max_abs_diff(const MetricVector& a, const MetricVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < kMetricCount; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace tportal
