#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tportal/date.hpp"
#include "tportal/metrics.hpp"

namespace tportal::ingest {

/// One position stint of one player in one match; metrics are raw counts.
struct Appearance {
  std::string player_id;
  std::string team_id;
  Position position = Position::GK;
  double minutes = 0.0;
  MetricVector metrics;

  bool operator==(const Appearance&) const = default;
};

/// A match as read from the corpus. `league_id` is the competition; the
/// per-side league ids name each team's domestic league and default to it.
struct MatchRecord {
  std::string match_id;
  Date date;
  std::string league_id;
  std::string home_team_id;
  std::string away_team_id;
  std::string home_league_id;
  std::string away_league_id;
  int home_goals = 0;
  int away_goals = 0;
  std::vector<Appearance> appearances;

  const std::string& league_of(const std::string& team_id) const;
  bool operator==(const MatchRecord&) const = default;
};

struct PlayerPositionKey {
  std::string player;
  Position position = Position::GK;
  std::string team;
  std::string league;
  auto operator<=>(const PlayerPositionKey&) const = default;
};

struct TeamPositionKey {
  std::string team;
  Position position = Position::GK;
  std::string league;
  auto operator<=>(const TeamPositionKey&) const = default;
};

struct TeamKey {
  std::string team;
  std::string league;
  auto operator<=>(const TeamKey&) const = default;
};

using EntityKey = std::variant<PlayerPositionKey, TeamPositionKey, TeamKey>;

std::string describe(const EntityKey& key);

/// Per-game totals for one entity. Raw counts; per-90 conversion happens in features.
struct GameLine {
  EntityKey key;
  std::string match_id;
  Date date;
  double minutes = 0.0;
  MetricVector metrics;
};

enum class CorpusFormat { Ndjson, Csv };

/// Parses a whole corpus and returns it sorted by (date, match_id).
/// Throws Error with MalformedRow / DuplicateMatchId / UnknownPosition; the
/// message names the 1-based source line.
std::vector<MatchRecord> parse_corpus(std::istream& source, CorpusFormat format);
std::vector<MatchRecord> parse_corpus(std::string_view source, CorpusFormat format);

/// Checks every MatchRecord invariant; throws MalformedRow describing the first violation.
void validate(const MatchRecord& match);

/// Canonical one-line JSON for a match (fixed key order, shortest round-trip numbers).
std::string to_ndjson(const MatchRecord& match);
void write_ndjson(std::ostream& out, std::span<const MatchRecord> matches);
void write_csv(std::ostream& out, std::span<const MatchRecord> matches);

/// One line per (player, position) with positive minutes. Multiple rows for the
/// same pair are summed; different positions are never merged.
std::vector<GameLine> aggregate_player_positions(const MatchRecord& match);

struct Rollup {
  std::vector<GameLine> team_positions;
  std::vector<GameLine> teams;
};

/// Sums player-position lines of a single match into team-position and team
/// lines. Output is sorted by key, so it does not depend on input order.
Rollup rollup(std::span<const GameLine> player_lines);

}  // namespace tportal::ingest
