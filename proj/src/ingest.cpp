#include "tportal/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "tportal/error.hpp"
#include "tportal/text.hpp"

namespace tportal::ingest {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kPassTolerance = 1e-9;

[[noreturn]] void malformed(std::size_t line, const std::string& reason) {
  throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line) + ": " + reason);
}

void check_record(const MatchRecord& m, std::size_t line) {
  try {
    validate(m);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MalformedRow) throw;
    malformed(line, e.what());
  }
}

Position parse_position(const std::string& s, std::size_t line) {
  auto p = position_from_name(s);
  if (!p) {
    throw Error(ErrorCode::UnknownPosition,
                "line " + std::to_string(line) + ": unknown position '" + s + "'");
  }
  return *p;
}

Date parse_date(const std::string& s, std::size_t line) {
  try {
    return Date::parse(s);
  } catch (const Error&) {
    malformed(line, "unparseable date '" + s + "'");
  }
}

template <typename T>
T require(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) malformed(line, std::string("missing field '") + field + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    malformed(line, std::string("field '") + field + "' has the wrong type");
  }
}

int require_goals(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) malformed(line, std::string("missing field '") + field + "'");
  if (!it->is_number_integer()) malformed(line, std::string("'") + field + "' must be an integer");
  return it->get<int>();
}

MatchRecord match_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) malformed(line, "expected a JSON object");
  MatchRecord m;
  m.match_id = require<std::string>(j, "match_id", line);
  m.date = parse_date(require<std::string>(j, "date", line), line);
  m.league_id = require<std::string>(j, "league_id", line);
  m.home_team_id = require<std::string>(j, "home_team_id", line);
  m.away_team_id = require<std::string>(j, "away_team_id", line);
  m.home_league_id = j.value("home_league_id", m.league_id);
  m.away_league_id = j.value("away_league_id", m.league_id);
  m.home_goals = require_goals(j, "home_goals", line);
  m.away_goals = require_goals(j, "away_goals", line);
  auto apps = j.find("appearances");
  if (apps == j.end() || !apps->is_array()) malformed(line, "missing 'appearances' array");
  for (const json& a : *apps) {
    if (!a.is_object()) malformed(line, "appearance must be an object");
    Appearance app;
    app.player_id = require<std::string>(a, "player_id", line);
    app.team_id = require<std::string>(a, "team_id", line);
    app.position = parse_position(require<std::string>(a, "position", line), line);
    app.minutes = require<double>(a, "minutes", line);
    auto mets = a.find("metrics");
    if (mets == a.end() || !mets->is_object()) malformed(line, "appearance without 'metrics'");
    for (std::size_t i = 0; i < kMetricCount; ++i) {
      auto it = mets->find(std::string(kMetricNames[i]));
      if (it == mets->end() || !it->is_number()) {
        malformed(line, "metric '" + std::string(kMetricNames[i]) + "' missing or not numeric");
      }
      app.metrics[i] = it->get<double>();
    }
    if (mets->size() != kMetricCount) malformed(line, "unexpected metric field");
    m.appearances.push_back(std::move(app));
  }
  return m;
}

void sort_and_check_unique(std::vector<MatchRecord>& out, const std::vector<std::size_t>& lines) {
  std::map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto [it, inserted] = seen.emplace(out[i].match_id, lines[i]);
    if (!inserted) {
      throw Error(ErrorCode::DuplicateMatchId, "line " + std::to_string(lines[i]) + ": match_id '" +
                                                   out[i].match_id + "' already seen on line " +
                                                   std::to_string(it->second));
    }
  }
  std::sort(out.begin(), out.end(), [](const MatchRecord& a, const MatchRecord& b) {
    return std::tie(a.date, a.match_id) < std::tie(b.date, b.match_id);
  });
}

std::vector<MatchRecord> parse_ndjson(std::istream& in) {
  std::vector<MatchRecord> out;
  std::vector<std::size_t> lines;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    if (!is_valid_utf8(text)) malformed(line, "invalid UTF-8");
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      malformed(line, std::string("invalid JSON: ") + e.what());
    }
    MatchRecord m = match_from_json(j, line);
    check_record(m, line);
    out.push_back(std::move(m));
    lines.push_back(line);
  }
  sort_and_check_unique(out, lines);
  return out;
}

const std::vector<std::string> kCsvMatchColumns = {"match_id",     "date",         "league_id",
                                                   "home_team_id", "away_team_id", "home_goals",
                                                   "away_goals"};

std::vector<MatchRecord> parse_csv(std::istream& in) {
  std::string text;
  std::size_t line = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    if (!is_valid_utf8(text)) malformed(line, "invalid UTF-8");
    header = split_csv_line(text);
  }
  if (header.empty()) return {};

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  std::vector<std::string> required = kCsvMatchColumns;
  for (const char* c : {"player_id", "team_id", "position", "minutes"}) required.emplace_back(c);
  for (auto n : kMetricNames) required.emplace_back(n);
  for (const auto& r : required) {
    if (!col.count(r)) malformed(line, "CSV header lacks column '" + r + "'");
  }

  std::vector<MatchRecord> out;
  std::vector<std::size_t> first_line;
  std::map<std::string, std::size_t> index;  // match_id -> position in out
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    if (!is_valid_utf8(text)) malformed(line, "invalid UTF-8");
    auto cells = split_csv_line(text);
    if (cells.size() != header.size()) {
      malformed(line, "expected " + std::to_string(header.size()) + " cells, got " +
                          std::to_string(cells.size()));
    }
    auto cell = [&](const std::string& name) -> const std::string& { return cells[col.at(name)]; };
    auto number = [&](const std::string& name) {
      double v = 0.0;
      if (!parse_double(cell(name), v)) malformed(line, "column '" + name + "' is not a number");
      return v;
    };
    auto integer = [&](const std::string& name) {
      long long v = 0;
      if (!parse_integer(cell(name), v)) malformed(line, "column '" + name + "' is not an integer");
      return static_cast<int>(v);
    };

    MatchRecord header_part;
    header_part.match_id = cell("match_id");
    header_part.date = parse_date(cell("date"), line);
    header_part.league_id = cell("league_id");
    header_part.home_team_id = cell("home_team_id");
    header_part.away_team_id = cell("away_team_id");
    header_part.home_goals = integer("home_goals");
    header_part.away_goals = integer("away_goals");
    header_part.home_league_id = header_part.league_id;
    header_part.away_league_id = header_part.league_id;
    if (col.count("home_league_id") && !cell("home_league_id").empty())
      header_part.home_league_id = cell("home_league_id");
    if (col.count("away_league_id") && !cell("away_league_id").empty())
      header_part.away_league_id = cell("away_league_id");

    Appearance app;
    app.player_id = cell("player_id");
    app.team_id = cell("team_id");
    app.position = parse_position(cell("position"), line);
    app.minutes = number("minutes");
    for (std::size_t i = 0; i < kMetricCount; ++i) app.metrics[i] = number(std::string(kMetricNames[i]));

    auto it = index.find(header_part.match_id);
    if (it == index.end()) {
      index.emplace(header_part.match_id, out.size());
      header_part.appearances.push_back(std::move(app));
      out.push_back(std::move(header_part));
      first_line.push_back(line);
    } else {
      MatchRecord& m = out[it->second];
      if (m.date != header_part.date || m.league_id != header_part.league_id ||
          m.home_team_id != header_part.home_team_id || m.away_team_id != header_part.away_team_id ||
          m.home_goals != header_part.home_goals || m.away_goals != header_part.away_goals ||
          m.home_league_id != header_part.home_league_id ||
          m.away_league_id != header_part.away_league_id) {
        malformed(line, "match columns disagree with earlier rows of '" + m.match_id + "'");
      }
      m.appearances.push_back(std::move(app));
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) check_record(out[i], first_line[i]);
  sort_and_check_unique(out, first_line);
  return out;
}

ordered_json match_to_json(const MatchRecord& m) {
  ordered_json j;
  j["match_id"] = m.match_id;
  j["date"] = m.date.to_string();
  j["league_id"] = m.league_id;
  j["home_team_id"] = m.home_team_id;
  j["away_team_id"] = m.away_team_id;
  if (m.home_league_id != m.league_id) j["home_league_id"] = m.home_league_id;
  if (m.away_league_id != m.league_id) j["away_league_id"] = m.away_league_id;
  j["home_goals"] = m.home_goals;
  j["away_goals"] = m.away_goals;
  ordered_json apps = ordered_json::array();
  for (const auto& a : m.appearances) {
    ordered_json aj;
    aj["player_id"] = a.player_id;
    aj["team_id"] = a.team_id;
    aj["position"] = std::string(name_of(a.position));
    aj["minutes"] = a.minutes;
    ordered_json mj;
    for (std::size_t i = 0; i < kMetricCount; ++i) mj[std::string(kMetricNames[i])] = a.metrics[i];
    aj["metrics"] = std::move(mj);
    apps.push_back(std::move(aj));
  }
  j["appearances"] = std::move(apps);
  return j;
}

}  // namespace

const std::string& MatchRecord::league_of(const std::string& team_id) const {
  if (team_id == home_team_id) return home_league_id.empty() ? league_id : home_league_id;
  if (team_id == away_team_id) return away_league_id.empty() ? league_id : away_league_id;
  throw Error(ErrorCode::UnknownTeam, "team '" + team_id + "' did not play in " + match_id);
}

std::string describe(const EntityKey& key) {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, PlayerPositionKey>) {
          return "player:" + k.player + "/" + std::string(name_of(k.position)) + "@" + k.team + "/" +
                 k.league;
        } else if constexpr (std::is_same_v<K, TeamPositionKey>) {
          return "team_position:" + k.team + "/" + std::string(name_of(k.position)) + "@" + k.league;
        } else {
          return "team:" + k.team + "@" + k.league;
        }
      },
      key);
}

void validate(const MatchRecord& m) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::MalformedRow, "match '" + m.match_id + "': " + why);
  };
  if (m.match_id.empty()) fail("empty match_id");
  if (m.home_team_id.empty() || m.away_team_id.empty()) fail("empty team id");
  if (m.home_team_id == m.away_team_id) fail("team cannot play itself");
  if (m.home_goals < 0 || m.away_goals < 0) fail("negative goals");
  std::map<std::string, double> minutes_by_player;
  for (const auto& a : m.appearances) {
    if (a.team_id != m.home_team_id && a.team_id != m.away_team_id) {
      fail("appearance of '" + a.player_id + "' for team '" + a.team_id + "' not in this match");
    }
    if (!(a.minutes > 0.0) || a.minutes > 120.0) {
      fail("minutes must be in (0, 120], got " + format_double(a.minutes));
    }
    for (std::size_t i = 0; i < kMetricCount; ++i) {
      if (!std::isfinite(a.metrics[i]) || a.metrics[i] < 0.0) {
        fail("metric '" + std::string(kMetricNames[i]) + "' must be a non-negative number");
      }
    }
    if (a.metrics[Metric::ShortPasses] + a.metrics[Metric::LongPasses] >
        a.metrics[Metric::TotalPasses] + kPassTolerance) {
      fail("short_passes + long_passes exceeds total_passes for '" + a.player_id + "'");
    }
    double& total = minutes_by_player[a.player_id];
    total += a.minutes;
    if (total > 120.0) fail("player '" + a.player_id + "' exceeds 120 minutes");
  }
}

std::vector<MatchRecord> parse_corpus(std::istream& source, CorpusFormat format) {
  return format == CorpusFormat::Ndjson ? parse_ndjson(source) : parse_csv(source);
}

std::vector<MatchRecord> parse_corpus(std::string_view source, CorpusFormat format) {
  std::istringstream in{std::string(source)};
  return parse_corpus(in, format);
}

std::string to_ndjson(const MatchRecord& match) { return match_to_json(match).dump(); }

void write_ndjson(std::ostream& out, std::span<const MatchRecord> matches) {
  for (const auto& m : matches) out << to_ndjson(m) << '\n';
}

void write_csv(std::ostream& out, std::span<const MatchRecord> matches) {
  std::vector<std::string> header = kCsvMatchColumns;
  for (const char* c : {"home_league_id", "away_league_id", "player_id", "team_id", "position",
                        "minutes"})
    header.emplace_back(c);
  for (auto n : kMetricNames) header.emplace_back(n);
  out << join_csv_line(header) << '\n';
  for (const auto& m : matches) {
    for (const auto& a : m.appearances) {
      std::vector<std::string> row = {m.match_id,       m.date.to_string(),
                                      m.league_id,      m.home_team_id,
                                      m.away_team_id,   std::to_string(m.home_goals),
                                      std::to_string(m.away_goals), m.home_league_id,
                                      m.away_league_id, a.player_id,
                                      a.team_id,        std::string(name_of(a.position)),
                                      format_double(a.minutes)};
      for (std::size_t i = 0; i < kMetricCount; ++i) row.push_back(format_double(a.metrics[i]));
      out << join_csv_line(row) << '\n';
    }
  }
}

std::vector<GameLine> aggregate_player_positions(const MatchRecord& match) {
  std::map<std::pair<std::string, Position>, GameLine> by_stint;
  for (const auto& a : match.appearances) {
    if (!(a.minutes > 0.0)) continue;
    auto key = std::make_pair(a.player_id, a.position);
    auto it = by_stint.find(key);
    if (it == by_stint.end()) {
      GameLine line;
      line.key = PlayerPositionKey{a.player_id, a.position, a.team_id, match.league_of(a.team_id)};
      line.match_id = match.match_id;
      line.date = match.date;
      line.minutes = a.minutes;
      line.metrics = a.metrics;
      by_stint.emplace(std::move(key), std::move(line));
    } else {
      it->second.minutes += a.minutes;
      it->second.metrics += a.metrics;
    }
  }
  std::vector<GameLine> out;
  out.reserve(by_stint.size());
  for (auto& [k, line] : by_stint) out.push_back(std::move(line));
  return out;
}

Rollup rollup(std::span<const GameLine> player_lines) {
  Rollup out;
  if (player_lines.empty()) return out;
  const std::string& match_id = player_lines.front().match_id;
  // Summation happens in key order so the result is bit-identical for any input permutation.
  std::vector<const GameLine*> ordered;
  ordered.reserve(player_lines.size());
  for (const auto& line : player_lines) ordered.push_back(&line);
  std::sort(ordered.begin(), ordered.end(),
            [](const GameLine* a, const GameLine* b) { return a->key < b->key; });
  std::map<TeamPositionKey, GameLine> positions;
  for (const GameLine* lp : ordered) {
    const GameLine& line = *lp;
    if (line.match_id != match_id) {
      throw Error(ErrorCode::MixedMatches,
                  "rollup mixes '" + match_id + "' and '" + line.match_id + "'");
    }
    const auto* pk = std::get_if<PlayerPositionKey>(&line.key);
    if (!pk) throw Error(ErrorCode::InvalidArgument, "rollup expects player-position lines");
    TeamPositionKey tk{pk->team, pk->position, pk->league};
    auto it = positions.find(tk);
    if (it == positions.end()) {
      positions.emplace(tk, GameLine{tk, line.match_id, line.date, line.minutes, line.metrics});
    } else {
      it->second.minutes += line.minutes;
      it->second.metrics += line.metrics;
    }
  }
  std::map<TeamKey, GameLine> teams;
  for (auto& [tk, line] : positions) {
    TeamKey key{tk.team, tk.league};
    auto it = teams.find(key);
    if (it == teams.end()) {
      teams.emplace(key, GameLine{key, line.match_id, line.date, line.minutes, line.metrics});
    } else {
      it->second.minutes += line.minutes;
      it->second.metrics += line.metrics;
    }
    out.team_positions.push_back(line);
  }
  for (auto& [k, line] : teams) out.teams.push_back(std::move(line));
  return out;
}

}  // namespace tportal::ingest
