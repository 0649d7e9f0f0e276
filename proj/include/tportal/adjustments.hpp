#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tportal/features.hpp"
#include "tportal/metrics.hpp"
#include "tportal/ratings.hpp"

namespace tportal::adjust {

double median(std::vector<double> values);
/// Linearly interpolated quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

enum class Level { Team, TeamPosition };

/// Blended values of every entity whose latest sample before `date` sits in
/// `league`. For the team-position level, `position` selects the slot.
std::vector<MetricVector> league_values(const features::FeatureStore& store,
                                        const std::string& league, Level level,
                                        std::optional<Position> position, Date date);

/// League median of blended per-90 values for one metric. Throws EmptyLeague.
double naive_league_expectation(const features::FeatureStore& store, const std::string& league,
                                Metric metric, Level level, std::optional<Position> position,
                                Date date);
/// All 13 medians at once.
MetricVector naive_league_expectation(const features::FeatureStore& store,
                                      const std::string& league, Level level,
                                      std::optional<Position> position, Date date);

/// (v - median(D)) / (P75(D) - P25(D)); zero when D has fewer than two values
/// or no spread.
double relative_feature_value(double value, std::span<const double> distribution);

/// y = x + alpha + beta z, one coefficient pair per metric.
struct TeamAdjustmentModel {
  std::array<double, kMetricCount> alpha{};
  std::array<double, kMetricCount> beta{};
  std::array<double, kMetricCount> residual_variance{};
  std::size_t n = 0;
  bool fitted = false;
};

/// One team context change: target is the raw per-90 at the first sample of
/// the new epoch with w = 1; offset the naive league expectation and
/// `relative` the team's z in its previous league.
struct TeamAdjustmentRow {
  std::string team;
  Date date;
  MetricVector target;
  MetricVector offset;
  MetricVector relative;
};

/// Per metric, OLS of (y - x) on [1, z]. Throws InsufficientData (< 3 rows) or SingularDesign.
TeamAdjustmentModel fit_team_adjustment(std::span<const TeamAdjustmentRow> rows);

/// x + alpha + beta z, clamped at zero. Throws UnfittedModel.
double predict_team_prior(const TeamAdjustmentModel& model, Metric metric, double offset,
                          double relative);
MetricVector predict_team_prior(const TeamAdjustmentModel& model, const MetricVector& offset,
                                const MetricVector& relative);

/// Scales every position by team_new_j / team_old_j. A zero old team value is
/// only allowed when the matching position values are zero too (ZeroDenominator otherwise).
std::map<Position, MetricVector> adjust_team_positions(
    const MetricVector& team_old, const MetricVector& team_new,
    const std::map<Position, MetricVector>& positions);

inline constexpr std::size_t kPlayerCoefficients = 7;

/// y = a + b1 x1 + b2 x2 + b3 x3 + b4 x4 + b5 x4^2 + b6 x4^3 per metric, where
/// x1 is the player's previous value, x2 the new team-position value, x3 the
/// new-minus-old team-position difference and x4 the relative-ability change.
struct PlayerAdjustmentModel {
  std::array<std::array<double, kPlayerCoefficients>, kMetricCount> coefficients{};
  std::array<double, kMetricCount> residual_variance{};
  std::size_t n = 0;
  bool fitted = false;
};

struct PlayerAdjustmentRow {
  std::string player;
  Position position = Position::GK;
  Date date;
  MetricVector target;
  MetricVector previous;            // x1
  MetricVector new_team_position;   // x2
  MetricVector team_position_diff;  // x3
  double ability_change = 0.0;      // x4
};

/// The seven regressors [1, x1, x2, x3, x4, x4^2, x4^3].
std::array<double, kPlayerCoefficients> player_regressors(double x1, double x2, double x3,
                                                          double x4);

/// Throws InsufficientData (< 10 rows) or SingularDesign.
PlayerAdjustmentModel fit_player_adjustment(std::span<const PlayerAdjustmentRow> rows);

double predict_player_prior(const PlayerAdjustmentModel& model, Metric metric, double x1, double x2,
                            double x3, double x4);
MetricVector predict_player_prior(const PlayerAdjustmentModel& model, const MetricVector& x1,
                                  const MetricVector& x2, const MetricVector& x3, double x4);

/// (PR_new - mean PR of new league) - (PR_old - mean PR of old league) on the 0-100 scale.
double ability_change(const ratings::PowerRankingSnapshot& snap, const std::string& old_team,
                      const std::string& old_league, const std::string& new_team,
                      const std::string& new_league);

/// Relative ability of `team` against `league`, falling back to the team's own
/// league when `league` has no members on that date.
double relative_ability(const ratings::PowerRankingSnapshot& snap, const std::string& team,
                        const std::string& league);

/// Value of a timeline in a given league context on `date`: the latest blended
/// value before `date` if it belongs to that league, otherwise the prior of an
/// epoch in that league opened on or before `date`.
std::optional<MetricVector> context_value(const features::FeatureTimeline& tl,
                                          const std::string& league, Date date);

std::vector<TeamAdjustmentRow> build_team_rows(const features::FeatureStore& store);
std::vector<PlayerAdjustmentRow> build_player_rows(const features::FeatureStore& store,
                                                   const ratings::RatingHistory& history);

struct AdjustmentModels {
  TeamAdjustmentModel team;
  PlayerAdjustmentModel player;
  std::size_t team_rows = 0;
  std::size_t player_rows = 0;
};

/// Fits both models; a level with too little or degenerate data stays unfitted.
AdjustmentModels fit_adjustments(const features::FeatureStore& store,
                                 const ratings::RatingHistory& history);

/// Flat JSON with a schema version.
std::string to_json(const AdjustmentModels& models);
AdjustmentModels adjustment_models_from_json(std::string_view text);

/// Prior provider backed by the adjustment models, with naive fallbacks when
/// a model is unfitted or an entity has no previous context:
///  - team: league median of team values in the new league;
///  - team-position: the team's own change applied proportionally, else the league median;
///  - player: the new team-position value.
class AdjustmentPriors final : public features::PriorSource {
 public:
  AdjustmentPriors(const ratings::RatingHistory& history, AdjustmentModels models)
      : history_(history), models_(std::move(models)) {}

  MetricVector team_prior(const features::FeatureStore& store, const features::FeatureTimeline& tl,
                          const features::Context& ctx, Date date) const override;
  MetricVector team_position_prior(const features::FeatureStore& store,
                                   const features::FeatureTimeline& tl,
                                   const features::Context& ctx, Date date) const override;
  MetricVector player_prior(const features::FeatureStore& store,
                            const features::FeatureTimeline& tl, const features::Context& ctx,
                            Date date) const override;

  const AdjustmentModels& models() const { return models_; }

 private:
  const ratings::RatingHistory& history_;
  AdjustmentModels models_;
};

}  // namespace tportal::adjust
