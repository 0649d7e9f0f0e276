#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tportal/date.hpp"
#include "tportal/features.hpp"
#include "tportal/metrics.hpp"
#include "tportal/predictor.hpp"
#include "tportal/ratings.hpp"

namespace tportal::recruit {

/// Off-pitch facts about a player (age, market value) that the corpus lacks.
struct PlayerMeta {
  std::string player_id;
  std::string name;
  Date birth_date;
  double value = 0.0;
  Position position = Position::CM;
};

double age_years(Date birth, Date on);

/// Flat-file metadata source: players.csv with columns
/// player_id,name,birth_date,value,position.
class MetadataProvider {
 public:
  MetadataProvider() = default;
  explicit MetadataProvider(std::vector<PlayerMeta> players);

  static MetadataProvider read_csv(std::istream& in);
  void write_csv(std::ostream& out) const;

  const PlayerMeta* find(const std::string& player_id) const;
  const std::map<std::string, PlayerMeta>& players() const { return players_; }

 private:
  std::map<std::string, PlayerMeta> players_;
};

/// Importance weight per metric, each in [0, 1].
struct WeightProfile {
  std::string name;
  std::array<double, kMetricCount> weights{};

  /// Throws InvalidArgument for weights outside [0, 1] or non-finite.
  void validate() const;
  double total() const;

  /// `{"name": ..., "weights": {"take_ons": 1.0, ...}}`; omitted metrics weigh 0.
  static WeightProfile from_json(std::string_view text);
  std::string to_json() const;
};

/// Optional bounds; unset members do not filter.
struct FilterSet {
  /// Candidates must be strictly younger than this (years).
  std::optional<double> max_age;
  std::optional<double> max_value;
  /// Minutes at the requested position in the 365 days before the date.
  std::optional<double> min_position_minutes;
  /// Metadata (primary) positions allowed; empty allows all.
  std::vector<Position> allowed_positions;
  /// Current leagues allowed; empty allows all.
  std::vector<std::string> allowed_leagues;
  /// Ceiling on the current team's 0-100 Power Ranking.
  std::optional<double> max_team_rating;
  /// The same ceiling on the raw (unscaled) rating sum.
  std::optional<double> max_team_raw_rating;

  void validate() const;
};

/// Weighted min-max score of every prediction against the whole set:
/// sum_j w_j norm_j / sum_j w_j. A metric with no spread contributes 0.5.
/// Throws AllZeroWeights or EmptyCohort.
std::vector<double> score(std::span<const MetricVector> predictions, const WeightProfile& w);

/// The state a recruitment query reads.
struct Sources {
  const features::FeatureStore& store;
  const ratings::RatingHistory& history;
  const predictor::TransferModel& model;
  const MetadataProvider& metadata;
  double red_minutes = 500.0;
};

struct ShortlistRequest {
  std::string destination_team;
  Position position = Position::W;
  WeightProfile weights;
  FilterSet filters;
  std::size_t k = 10;
  Date date;
};

struct ShortlistEntry {
  std::string player_id;
  std::string name;
  double score = 0.0;
  predictor::Prediction prediction;
  std::string team;
  std::string league;
  /// Unknown when the metadata provider has no record of the player.
  std::optional<double> age;
  std::optional<double> value;
};

/// Minutes the player logged at `position` in [date - 365, date).
double recent_minutes(const features::FeatureTimeline& tl, Date date);

/// Filters the pool, simulates every survivor at the destination, scores
/// them against each other and returns the top k (score descending, ties
/// by player id). Players already at the destination are skipped; players
/// without metadata are kept unless an age, value or position filter is set.
/// Throws EmptyAfterFilters, AllZeroWeights, MissingEntity.
std::vector<ShortlistEntry> build_shortlist(const ShortlistRequest& req, const Sources& src);

/// CSV: rank,score,player_id,player,team,competition,age,value
void write_shortlist_csv(std::ostream& out, std::span<const ShortlistEntry> entries);

enum class Highlight { Subject, Teammate, League };
std::string_view to_string(Highlight h);

struct SwarmPoint {
  std::string player_id;
  std::string team;
  double value = 0.0;
  Highlight highlight = Highlight::League;
};

struct SwarmDataset {
  Metric metric = Metric::Shots;
  std::string league;
  Position position = Position::W;
  predictor::TransferScenario subject;
  std::vector<SwarmPoint> points;  // subject first, then cohort by player id
  double subject_percentile = 50.0;
};

/// Mid-rank percentile of `value` among `others`: 100 (below + equal / 2) / n,
/// n = |others|; 50 for an empty set.
double percentile_midrank(double value, std::span<const double> others);

/// The subject (simulated per its scenario) against every other player of
/// `position` in `league`, each simulated at their current club. Teammates
/// are cohort members at the subject's destination team.
/// Throws EmptyCohort when the league has no such players and the subject is not placed in it.
SwarmDataset swarm(const std::string& league, Position position, Metric metric,
                   const predictor::TransferScenario& subject, const Sources& src);

std::string to_json(const SwarmDataset& d);

enum class Verdict { Hot, Tepid, Not };
std::string_view to_string(Verdict v);

struct VerdictThresholds {
  double hot_percentile = 70.0;
  double not_percentile = 40.0;
  double hot_retention = 0.85;
  double not_retention = 0.6;
};

struct VerdictResult {
  Verdict verdict = Verdict::Tepid;
  /// Weighted mean destination-league percentile.
  double percentile = 0.0;
  /// Weighted mean of destination/origin value ratios (each capped at 2).
  double retention = 0.0;
};

/// Hot if p >= hot_percentile and r >= hot_retention; Not if p < not_percentile
/// or r < not_retention; Tepid otherwise.
Verdict classify(double percentile, double retention, const VerdictThresholds& t = {});

VerdictResult verdict(const predictor::Prediction& destination, const predictor::Prediction& origin,
                      const WeightProfile& w, const VerdictThresholds& t = {});

}  // namespace tportal::recruit
