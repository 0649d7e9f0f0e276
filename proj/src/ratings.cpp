#include "tportal/ratings.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"
#include "tportal/error.hpp"
#include "tportal/text.hpp"

namespace tportal::ratings {

namespace {

std::size_t slot(Level level) { return static_cast<std::size_t>(level); }

}  // namespace

void Topology::add(LeagueInfo info) {
  if (info.league_id.empty() || info.country.empty() || info.continent.empty()) {
    throw Error(ErrorCode::InvalidArgument, "league topology entries need all three ids");
  }
  leagues_[info.league_id] = std::move(info);
}

const LeagueInfo* Topology::find(const std::string& league_id) const {
  auto it = leagues_.find(league_id);
  return it == leagues_.end() ? nullptr : &it->second;
}

Topology Topology::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("topology: ") + e.what());
  }
  Topology t;
  if (!j.contains("leagues") || !j["leagues"].is_array()) {
    throw Error(ErrorCode::InvalidArgument, "topology: missing 'leagues' array");
  }
  for (const auto& l : j["leagues"]) {
    try {
      t.add({l.at("league_id").get<std::string>(), l.at("country").get<std::string>(),
             l.at("continent").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("topology: ") + e.what());
    }
  }
  return t;
}

std::string Topology::to_json() const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& [id, l] : leagues_) {
    nlohmann::ordered_json e;
    e["league_id"] = l.league_id;
    e["country"] = l.country;
    e["continent"] = l.continent;
    arr.push_back(std::move(e));
  }
  nlohmann::ordered_json j;
  j["leagues"] = std::move(arr);
  return j.dump(2);
}

double expected_score(double score_a, double score_b, bool a_is_home, const EloConfig& cfg) {
  const double diff = score_a - score_b + (a_is_home ? cfg.home_advantage : 0.0);
  return 1.0 / (1.0 + std::pow(10.0, -diff / 400.0));
}

RatingHierarchy::RatingHierarchy(EloConfig cfg) : cfg_(cfg) {
  if (!(cfg_.k_team > 0.0) || !(cfg_.k_group > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "Elo K factors must be positive");
  }
}

void RatingHierarchy::add_league(const LeagueInfo& info) {
  auto ensure = [&](Level level, const std::string& id) {
    auto& m = nodes_[slot(level)];
    if (!m.count(id)) m.emplace(id, EloNode{id, level, cfg_.base_group_elo, Date{}});
  };
  ensure(Level::League, info.league_id);
  ensure(Level::Country, info.country);
  ensure(Level::Continent, info.continent);
  league_country_[info.league_id] = info.country;
  country_continent_[info.country] = info.continent;
}

void RatingHierarchy::register_team(const std::string& team, const std::string& league, Date date) {
  if (!nodes_[slot(Level::League)].count(league)) {
    throw Error(ErrorCode::BrokenAncestry, "league '" + league + "' is not in the topology");
  }
  auto& teams = nodes_[slot(Level::Team)];
  if (!teams.count(team)) teams.emplace(team, EloNode{team, Level::Team, cfg_.base_team_elo, date});
  team_league_[team] = league;
}

bool RatingHierarchy::has_team(const std::string& team) const { return team_league_.count(team) > 0; }

void RatingHierarchy::move_team(const std::string& team, const std::string& new_league, Date date) {
  const double before = final_score(team);
  if (!nodes_[slot(Level::League)].count(new_league)) {
    throw Error(ErrorCode::BrokenAncestry, "league '" + new_league + "' is not in the topology");
  }
  team_league_[team] = new_league;
  const Ancestry a = ancestry(team);
  EloNode& t = node_mut(Level::Team, team);
  t.elo = before - (node(Level::League, *a.league).elo + node(Level::Country, *a.country).elo +
                    node(Level::Continent, *a.continent).elo);
  t.last_updated = date;
}

RatingHierarchy::Ancestry RatingHierarchy::ancestry(const std::string& team) const {
  auto tl = team_league_.find(team);
  if (tl == team_league_.end()) throw Error(ErrorCode::UnknownTeam, "team '" + team + "'");
  auto lc = league_country_.find(tl->second);
  if (lc == league_country_.end()) {
    throw Error(ErrorCode::BrokenAncestry, "league '" + tl->second + "' has no country");
  }
  auto cc = country_continent_.find(lc->second);
  if (cc == country_continent_.end()) {
    throw Error(ErrorCode::BrokenAncestry, "country '" + lc->second + "' has no continent");
  }
  return {&tl->second, &lc->second, &cc->second};
}

const EloNode& RatingHierarchy::node(Level level, const std::string& id) const {
  const auto& m = nodes_[slot(level)];
  auto it = m.find(id);
  if (it == m.end()) {
    if (level == Level::Team) throw Error(ErrorCode::UnknownTeam, "team '" + id + "'");
    throw Error(ErrorCode::BrokenAncestry, "missing hierarchy node '" + id + "'");
  }
  return it->second;
}

EloNode& RatingHierarchy::node_mut(Level level, const std::string& id) {
  return const_cast<EloNode&>(std::as_const(*this).node(level, id));
}

double RatingHierarchy::final_score(const std::string& team) const {
  const Ancestry a = ancestry(team);
  return node(Level::Team, team).elo + node(Level::League, *a.league).elo +
         node(Level::Country, *a.country).elo + node(Level::Continent, *a.continent).elo;
}

const std::string& RatingHierarchy::league_of(const std::string& team) const {
  return *ancestry(team).league;
}

std::vector<std::string> RatingHierarchy::teams() const {
  std::vector<std::string> out;
  out.reserve(team_league_.size());
  for (const auto& [t, l] : team_league_) out.push_back(t);
  return out;
}

MatchUpdate RatingHierarchy::apply_match(const MatchResult& r) {
  if (r.date < last_date_) {
    throw Error(ErrorCode::OutOfOrderDate, "match on " + r.date.to_string() + " after " +
                                               last_date_.to_string());
  }
  const Ancestry home = ancestry(r.home);
  const Ancestry away = ancestry(r.away);

  MatchUpdate u;
  u.expected_home = expected_score(final_score(r.home), final_score(r.away), true, cfg_);
  const double actual = r.outcome == Outcome::HomeWin ? 1.0
                        : r.outcome == Outcome::Draw  ? cfg_.draw_score
                                                      : 0.0;
  const double surprise = actual - u.expected_home;

  const double team_delta = cfg_.k_team * surprise;
  node_mut(Level::Team, r.home).elo += team_delta;
  node_mut(Level::Team, r.away).elo -= team_delta;
  node_mut(Level::Team, r.home).last_updated = r.date;
  node_mut(Level::Team, r.away).last_updated = r.date;
  u.home_team_delta = team_delta;
  u.away_team_delta = -team_delta;

  const std::string* home_group = nullptr;
  const std::string* away_group = nullptr;
  if (*home.league == *away.league) {
    // same league: only the team level moves
  } else if (*home.country == *away.country) {
    u.group_level = Level::League;
    home_group = home.league;
    away_group = away.league;
  } else if (*home.continent == *away.continent) {
    u.group_level = Level::Country;
    home_group = home.country;
    away_group = away.country;
  } else {
    u.group_level = Level::Continent;
    home_group = home.continent;
    away_group = away.continent;
  }
  if (u.group_level) {
    const double group_delta = cfg_.k_group * surprise;
    EloNode& hn = node_mut(*u.group_level, *home_group);
    EloNode& an = node_mut(*u.group_level, *away_group);
    hn.elo += group_delta;
    an.elo -= group_delta;
    hn.last_updated = r.date;
    an.last_updated = r.date;
    u.home_group_delta = group_delta;
    u.away_group_delta = -group_delta;
  }
  last_date_ = r.date;
  return u;
}

void RatingHierarchy::shift_level(Level level, double delta) {
  for (auto& [id, n] : nodes_[slot(level)]) n.elo += delta;
}

double PowerRankingSnapshot::score_of(const std::string& team) const {
  auto it = scores.find(team);
  if (it == scores.end()) throw Error(ErrorCode::UnknownTeam, "team '" + team + "'");
  return it->second;
}

double PowerRankingSnapshot::raw_of(const std::string& team) const {
  auto it = raw.find(team);
  if (it == raw.end()) throw Error(ErrorCode::UnknownTeam, "team '" + team + "'");
  return it->second;
}

double PowerRankingSnapshot::league_mean(const std::string& league_id) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [team, l] : league) {
    if (l == league_id) {
      sum += scores.at(team);
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::EmptyLeague, "no teams in league '" + league_id + "'");
  return sum / static_cast<double>(n);
}

double PowerRankingSnapshot::relative_ability(const std::string& team,
                                              const std::string& league_id) const {
  const std::string& l = league_id.empty() ? league.at(team) : league_id;
  return score_of(team) - league_mean(l);
}

PowerRankingSnapshot scale_daily(const RatingHierarchy& h, Date date) {
  PowerRankingSnapshot s;
  s.date = date;
  const auto teams = h.teams();
  if (teams.empty()) throw Error(ErrorCode::InvalidArgument, "no teams registered");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& t : teams) {
    const double f = h.final_score(t);
    s.raw[t] = f;
    s.league[t] = h.league_of(t);
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  const double range = hi - lo;
  for (const auto& [t, f] : s.raw) {
    s.scores[t] = range > 0.0 ? 100.0 * (f - lo) / range : 50.0;
  }
  return s;
}

void RatingHistory::push(PowerRankingSnapshot snap) {
  if (!snaps_.empty() && snap.date < snaps_.back().date) {
    throw Error(ErrorCode::OutOfOrderDate, "snapshot dated " + snap.date.to_string());
  }
  if (!snaps_.empty() && snap.date == snaps_.back().date) {
    snaps_.back() = std::move(snap);
  } else {
    snaps_.push_back(std::move(snap));
  }
}

const PowerRankingSnapshot& RatingHistory::as_of(Date date) const {
  if (snaps_.empty()) throw Error(ErrorCode::NoData, "empty rating history");
  auto it = std::upper_bound(snaps_.begin(), snaps_.end(), date,
                             [](Date d, const PowerRankingSnapshot& s) { return d < s.date; });
  if (it == snaps_.begin()) return snaps_.front();
  return *std::prev(it);
}

const PowerRankingSnapshot& RatingHistory::before(Date date) const { return as_of(date - 1); }

void RatingHistory::write_csv(std::ostream& out) const {
  out << "date,team_id,raw_final_score,scaled_score\n";
  for (const auto& s : snaps_) {
    const std::string d = s.date.to_string();
    for (const auto& [team, raw] : s.raw) {
      out << d << ',' << team << ',' << format_double(raw) << ',' << format_double(s.scores.at(team))
          << '\n';
    }
  }
}

Outcome outcome_of(const ingest::MatchRecord& m) {
  if (m.home_goals > m.away_goals) return Outcome::HomeWin;
  if (m.home_goals < m.away_goals) return Outcome::AwayWin;
  return Outcome::Draw;
}

Replay replay(std::span<const ingest::MatchRecord> corpus, const Topology& topology,
              const EloConfig& cfg) {
  Replay r{RatingHierarchy(cfg), {}};
  for (const auto& [id, info] : topology.leagues()) r.hierarchy.add_league(info);
  if (corpus.empty()) return r;

  for (const auto& m : corpus) {
    for (const std::string* team : {&m.home_team_id, &m.away_team_id}) {
      if (!r.hierarchy.has_team(*team)) {
        const std::string& league = m.league_of(*team);
        if (!topology.find(league)) {
          throw Error(ErrorCode::BrokenAncestry,
                      "league '" + league + "' of team '" + *team + "' is not in the topology");
        }
        r.hierarchy.register_team(*team, league, m.date);
      }
    }
  }
  r.history.push(scale_daily(r.hierarchy, corpus.front().date - 1));

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& m = corpus[i];
    for (const std::string* team : {&m.home_team_id, &m.away_team_id}) {
      const std::string& league = m.league_of(*team);
      if (r.hierarchy.league_of(*team) != league) r.hierarchy.move_team(*team, league, m.date);
    }
    r.hierarchy.apply_match({m.home_team_id, m.away_team_id, outcome_of(m), m.date});
    if (i + 1 == corpus.size() || corpus[i + 1].date != m.date) {
      r.history.push(scale_daily(r.hierarchy, m.date));
    }
  }
  return r;
}

}  // namespace tportal::ratings
