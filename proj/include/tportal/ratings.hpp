#pragma once

#include <array>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tportal/date.hpp"
#include "tportal/ingest.hpp"

namespace tportal::ratings {

enum class Level { Continent, Country, League, Team };

struct EloNode {
  std::string node_id;
  Level level = Level::Team;
  double elo = 0.0;
  Date last_updated;
};

struct EloConfig {
  double base_team_elo = 1500.0;
  double base_group_elo = 0.0;
  double k_team = 20.0;
  double k_group = 10.0;
  double home_advantage = 60.0;
  double draw_score = 0.5;
};

struct LeagueInfo {
  std::string league_id;
  std::string country;
  std::string continent;
};

/// League -> country -> continent map. Read from `topology.json`:
/// `{"leagues": [{"league_id": ..., "country": ..., "continent": ...}, ...]}`.
class Topology {
 public:
  void add(LeagueInfo info);
  const LeagueInfo* find(const std::string& league_id) const;
  const std::map<std::string, LeagueInfo>& leagues() const { return leagues_; }

  static Topology from_json(std::string_view text);
  std::string to_json() const;

 private:
  std::map<std::string, LeagueInfo> leagues_;
};

enum class Outcome { HomeWin, Draw, AwayWin };

struct MatchResult {
  std::string home;
  std::string away;
  Outcome outcome = Outcome::Draw;
  Date date;
};

/// What one `apply_match` call changed.
struct MatchUpdate {
  double expected_home = 0.5;
  double home_team_delta = 0.0;
  double away_team_delta = 0.0;
  std::optional<Level> group_level;
  double home_group_delta = 0.0;
  double away_group_delta = 0.0;
};

/// Logistic expected score of side A; home advantage is added to A's rating
/// difference when `a_is_home`.
double expected_score(double score_a, double score_b, bool a_is_home, const EloConfig& cfg);

/// Four-level Elo state. A team's strength is the sum of its own node and
/// the league, country and continent nodes above it.
class RatingHierarchy {
 public:
  explicit RatingHierarchy(EloConfig cfg = {});

  const EloConfig& config() const { return cfg_; }

  /// Creates league/country/continent nodes on first sight.
  void add_league(const LeagueInfo& info);
  void register_team(const std::string& team, const std::string& league, Date date);
  bool has_team(const std::string& team) const;

  /// Moves a team into another league, re-basing its own node so its final
  /// score is unchanged by the move.
  void move_team(const std::string& team, const std::string& new_league, Date date);

  double final_score(const std::string& team) const;
  const std::string& league_of(const std::string& team) const;
  const EloNode& node(Level level, const std::string& id) const;
  std::vector<std::string> teams() const;

  /// Updates both team nodes plus the one group level where the two
  /// ancestries first diverge (none for a same-league match).
  MatchUpdate apply_match(const MatchResult& result);

  /// Adds `delta` to every node of one level.
  void shift_level(Level level, double delta);

  Date last_match_date() const { return last_date_; }

 private:
  struct Ancestry {
    const std::string* league;
    const std::string* country;
    const std::string* continent;
  };
  Ancestry ancestry(const std::string& team) const;
  EloNode& node_mut(Level level, const std::string& id);

  EloConfig cfg_;
  std::array<std::map<std::string, EloNode>, 4> nodes_;
  std::map<std::string, std::string> team_league_;
  std::map<std::string, std::string> league_country_;
  std::map<std::string, std::string> country_continent_;
  Date last_date_{std::numeric_limits<std::int32_t>::min()};
};

/// Daily 0-100 Power Rankings.
struct PowerRankingSnapshot {
  Date date;
  std::map<std::string, double> scores;
  std::map<std::string, double> raw;
  std::map<std::string, std::string> league;

  double score_of(const std::string& team) const;
  double raw_of(const std::string& team) const;
  /// Mean scaled score of the teams in `league` on this date; throws EmptyLeague.
  double league_mean(const std::string& league_id) const;
  /// Team score minus the mean of `league_id` (defaults to the team's own league).
  double relative_ability(const std::string& team, const std::string& league_id = {}) const;
};

/// Global min-max of final scores onto [0, 100]; a zero range maps everything to 50.
PowerRankingSnapshot scale_daily(const RatingHierarchy& h, Date date);

/// Snapshots in date order; each one reflects every match on or before its date.
class RatingHistory {
 public:
  void push(PowerRankingSnapshot snap);
  /// Latest snapshot dated on or before `date`; the earliest one if none is.
  const PowerRankingSnapshot& as_of(Date date) const;
  /// Latest snapshot strictly before `date`.
  const PowerRankingSnapshot& before(Date date) const;
  bool empty() const { return snaps_.empty(); }
  const std::vector<PowerRankingSnapshot>& snapshots() const { return snaps_; }

  /// CSV with columns date,team_id,raw_final_score,scaled_score.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<PowerRankingSnapshot> snaps_;
};

Outcome outcome_of(const ingest::MatchRecord& m);

struct Replay {
  RatingHierarchy hierarchy;
  RatingHistory history;
};

/// Registers every team with the league of its first appearance, then applies
/// the corpus in date order, moving teams whose domestic league changes and
/// snapshotting after each match day. The first snapshot is dated the day
/// before the first match.
Replay replay(std::span<const ingest::MatchRecord> corpus, const Topology& topology,
              const EloConfig& cfg = {});

}  // namespace tportal::ratings
