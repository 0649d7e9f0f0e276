#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace tportal {

inline constexpr std::size_t kMetricCount = 13;

/// The 13 per-90 metrics, in their fixed record order.
enum class Metric : std::size_t {
  Shots,
  Xg,
  Xa,
  Crosses,
  TotalPasses,
  ShortPasses,
  LongPasses,
  AttThirdPasses,
  PenAreaEntries,
  TakeOns,
  DefOwnThird,
  DefMidThird,
  DefAttThird,
};

/// snake_case field names used by every file format and the HTTP API.
inline constexpr std::array<std::string_view, kMetricCount> kMetricNames = {
    "shots",          "xg",          "xa",          "crosses",       "total_passes",
    "short_passes",   "long_passes", "att_third_passes", "pen_area_entries", "take_ons",
    "def_own_third",  "def_mid_third", "def_att_third"};

constexpr std::size_t index_of(Metric m) { return static_cast<std::size_t>(m); }
constexpr std::string_view name_of(Metric m) { return kMetricNames[index_of(m)]; }
std::optional<Metric> metric_from_name(std::string_view name);

struct MetricVector {
  std::array<double, kMetricCount> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](Metric m) { return values[index_of(m)]; }
  double operator[](Metric m) const { return values[index_of(m)]; }

  MetricVector& operator+=(const MetricVector& o);
  MetricVector& operator-=(const MetricVector& o);
  MetricVector& operator*=(double s);

  bool operator==(const MetricVector&) const = default;
};

MetricVector operator+(MetricVector a, const MetricVector& b);
MetricVector operator-(MetricVector a, const MetricVector& b);
MetricVector operator*(MetricVector a, double s);
MetricVector operator*(double s, MetricVector a);

/// Largest absolute elementwise difference.
double max_abs_diff(const MetricVector& a, const MetricVector& b);

inline constexpr std::size_t kPositionCount = 6;

enum class Position : std::size_t { GK, CB, FB, CM, W, ST };

inline constexpr std::array<std::string_view, kPositionCount> kPositionNames = {"GK", "CB", "FB",
                                                                                "CM", "W",  "ST"};

constexpr std::size_t index_of(Position p) { return static_cast<std::size_t>(p); }
constexpr std::string_view name_of(Position p) { return kPositionNames[index_of(p)]; }
std::optional<Position> position_from_name(std::string_view name);

}  // namespace tportal
