#include "tportal/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "tportal/error.hpp"

namespace tportal::synth {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::array<std::pair<Position, std::size_t>, 6> kSquad{{{Position::GK, 1},
                                                                  {Position::CB, 2},
                                                                  {Position::FB, 2},
                                                                  {Position::CM, 3},
                                                                  {Position::W, 2},
                                                                  {Position::ST, 1}}};

constexpr int kMatchdayGap = 10;

Position secondary_of(Position p) {
  switch (p) {
    case Position::GK: return Position::GK;
    case Position::CB: return Position::FB;
    case Position::FB: return Position::CB;
    case Position::CM: return Position::W;
    case Position::W: return Position::ST;
    case Position::ST: return Position::W;
  }
  return p;
}

bool defensive(std::size_t j) {
  return j == static_cast<std::size_t>(Metric::DefOwnThird) ||
         j == static_cast<std::size_t>(Metric::DefMidThird) ||
         j == static_cast<std::size_t>(Metric::DefAttThird);
}

constexpr std::size_t kTotal = static_cast<std::size_t>(Metric::TotalPasses);
constexpr std::size_t kShort = static_cast<std::size_t>(Metric::ShortPasses);
constexpr std::size_t kLong = static_cast<std::size_t>(Metric::LongPasses);

MetricVector profile(std::initializer_list<double> v) {
  MetricVector m;
  std::copy(v.begin(), v.end(), m.values.begin());
  m[kTotal] = m[kShort] + m[kLong];
  return m;
}

/// Circle-method double round robin over n slots; returns (home, away) slot
/// pairs per round. A slot index == n marks a bye when n is odd.
std::vector<std::vector<std::pair<std::size_t, std::size_t>>> double_round_robin(std::size_t n) {
  const std::size_t m = n % 2 == 0 ? n : n + 1;
  std::vector<std::size_t> arr(m);
  std::iota(arr.begin(), arr.end(), 0);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> rounds;
  for (std::size_t r = 0; r + 1 < m; ++r) {
    std::vector<std::pair<std::size_t, std::size_t>> round;
    for (std::size_t i = 0; i < m / 2; ++i) {
      std::size_t a = arr[i], b = arr[m - 1 - i];
      if (a >= n || b >= n) continue;
      if ((r + i) % 2 == 1) std::swap(a, b);
      round.emplace_back(a, b);
    }
    rounds.push_back(std::move(round));
    std::rotate(arr.begin() + 1, arr.end() - 1, arr.end());
  }
  const std::size_t half = rounds.size();
  for (std::size_t r = 0; r < half; ++r) {
    std::vector<std::pair<std::size_t, std::size_t>> round;
    for (auto [a, b] : rounds[r]) round.emplace_back(b, a);
    rounds.push_back(std::move(round));
  }
  return rounds;
}

struct Standing {
  int points = 0;
  int goal_diff = 0;
  int goals = 0;
};

class Generator {
 public:
  explicit Generator(const WorldConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  World run() {
    world_.truth.kappa = cfg_.kappa;
    build_leagues();
    build_teams_and_players();
    for (std::size_t s = 0; s < cfg_.seasons; ++s) play_season(s);
    world_.transfers = transfers_;
    return std::move(world_);
  }

 private:
  double normal(double sd) { return std::normal_distribution<double>(0.0, sd)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  double mean_one_lognormal(double sd) { return std::exp(normal(1.0) * sd - 0.5 * sd * sd); }

  void build_leagues() {
    for (std::size_t c = 0; c < cfg_.continents; ++c) {
      const std::string continent = "C" + std::to_string(c + 1);
      const double c_off = normal(cfg_.continent_sd);
      for (std::size_t n = 0; n < cfg_.countries_per_continent; ++n) {
        const std::string country = continent + "N" + std::to_string(n + 1);
        const double n_off = normal(cfg_.country_sd);
        std::vector<std::string> tiers;
        for (std::size_t t = 0; t < cfg_.tiers; ++t) {
          const std::string league = country + "D" + std::to_string(t + 1);
          world_.topology.add({league, country, continent});
          quality_[league] = c_off + n_off - cfg_.tier_gap * static_cast<double>(t);
          leagues_.push_back(league);
          tiers.push_back(league);
        }
        country_tiers_.push_back(std::move(tiers));
      }
    }
  }

  void build_teams_and_players() {
    const double lo = std::log(cfg_.multiplier_min);
    const double hi = std::log(cfg_.multiplier_max);
    std::size_t team_no = 0;
    std::size_t player_no = 0;
    for (const auto& league : leagues_) {
      auto& members = membership_[league];
      for (std::size_t i = 0; i < cfg_.teams_per_league; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "T%03zu", ++team_no);
        const std::string team = buf;
        TeamLatent t;
        t.ability = quality_[league] + normal(cfg_.ability_sd);
        for (std::size_t j = 0; j < kMetricCount; ++j) {
          t.multiplier[j] = hi > lo ? std::exp(uniform(lo, hi)) : cfg_.multiplier_min;
        }
        t.multiplier[kTotal] = 1.0;  // total passes follow short + long
        world_.truth.teams[team] = t;
        members.push_back(team);
        for (const auto& [pos, count] : kSquad) {
          for (std::size_t k = 0; k < count; ++k) {
            std::snprintf(buf, sizeof buf, "P%04zu", ++player_no);
            const std::string id = buf;
            PlayerLatent p;
            p.primary = pos;
            for (std::size_t j = 0; j < kMetricCount; ++j) p.factor[j] = mean_one_lognormal(cfg_.style_sd);
            p.factor[kTotal] = 1.0;
            world_.truth.players[id] = p;
            squads_[team].push_back(id);

            recruit::PlayerMeta meta;
            meta.player_id = id;
            meta.name = "Player " + id.substr(1);
            meta.birth_date = Date(cfg_.first_season - 34, 1, 1) + static_cast<std::int32_t>(pick(16 * 365));
            meta.value = std::round(2e6 * std::exp(normal(0.8) + 0.5 * (t.ability - quality_[league])) / 1e4) * 1e4;
            meta.position = pos;
            world_.players.push_back(std::move(meta));
          }
        }
      }
    }
  }

  Date season_start(std::size_t s) const {
    return Date(cfg_.first_season + static_cast<int>(s), 8, 1);
  }

  void transfer_window() {
    std::vector<std::string> all;
    for (const auto& [team, squad] : squads_) all.insert(all.end(), squad.begin(), squad.end());
    std::sort(all.begin(), all.end());
    std::map<std::string, std::string> team_of;
    for (const auto& [team, squad] : squads_) {
      for (const auto& p : squad) team_of[p] = team;
    }
    std::vector<std::string> teams;
    for (const auto& [team, _] : squads_) teams.push_back(team);

    const auto swaps = static_cast<std::size_t>(
        std::llround(cfg_.transfer_fraction * static_cast<double>(all.size()) / 2.0));
    std::set<std::string> moved;
    std::size_t attempts = 0;
    for (std::size_t done = 0; done < swaps && attempts < swaps * 20; ++attempts) {
      const std::string& a = all[pick(all.size())];
      if (moved.count(a)) continue;
      const std::string ta = team_of[a];
      const std::string& tb = teams[pick(teams.size())];
      if (tb == ta) continue;
      const Position pos = world_.truth.players.at(a).primary;
      std::vector<std::string> options;
      for (const auto& p : squads_[tb]) {
        if (world_.truth.players.at(p).primary == pos && !moved.count(p)) options.push_back(p);
      }
      if (options.empty()) continue;
      const std::string b = options[pick(options.size())];
      auto& sa = squads_[ta];
      auto& sb = squads_[tb];
      *std::find(sa.begin(), sa.end(), a) = b;
      *std::find(sb.begin(), sb.end(), b) = a;
      team_of[a] = tb;
      team_of[b] = ta;
      moved.insert(a);
      moved.insert(b);
      transfers_ += 2;
      ++done;
    }
  }

  std::vector<ingest::Appearance> lineup(const std::string& team, double league_mean) {
    const TeamLatent& t = world_.truth.teams.at(team);
    const MetricVector g = world_.truth.link(t.ability - league_mean);
    std::vector<ingest::Appearance> out;
    auto stint = [&](const std::string& player, Position pos, double minutes) {
      const MetricVector style = world_.truth.style(player, pos);
      ingest::Appearance a;
      a.player_id = player;
      a.team_id = team;
      a.position = pos;
      a.minutes = minutes;
      for (std::size_t j = 0; j < kMetricCount; ++j) {
        if (j == kTotal) continue;
        const double noise = cfg_.noise_sigma > 0.0 ? mean_one_lognormal(cfg_.noise_sigma) : 1.0;
        a.metrics[j] = style[j] * t.multiplier[j] * g[j] * minutes / 90.0 * noise;
      }
      a.metrics[kTotal] = a.metrics[kShort] + a.metrics[kLong];
      out.push_back(std::move(a));
    };
    for (const auto& player : squads_.at(team)) {
      const Position pos = world_.truth.players.at(player).primary;
      const Position other = secondary_of(pos);
      if (other != pos && uniform(0.0, 1.0) < cfg_.second_position_rate) {
        const double first = static_cast<double>(45 + pick(41));
        stint(player, pos, first);
        stint(player, other, 90.0 - first);
      } else {
        stint(player, pos, 90.0);
      }
    }
    return out;
  }

  void play(const std::string& home, const std::string& away, const std::string& competition,
            Date date, const std::map<std::string, double>& means,
            const std::map<std::string, std::string>& league_of, std::map<std::string, Standing>* table) {
    const auto& th = world_.truth.teams.at(home);
    const auto& ta = world_.truth.teams.at(away);
    const double diff = th.ability - ta.ability;
    const int hg = std::poisson_distribution<int>(1.35 * std::exp(0.12 + 0.4 * diff))(rng_);
    const int ag = std::poisson_distribution<int>(1.35 * std::exp(-0.12 - 0.4 * diff))(rng_);

    ingest::MatchRecord m;
    char buf[16];
    std::snprintf(buf, sizeof buf, "M%06zu", ++match_no_);
    m.match_id = buf;
    m.date = date;
    m.league_id = competition;
    m.home_team_id = home;
    m.away_team_id = away;
    m.home_league_id = league_of.at(home);
    m.away_league_id = league_of.at(away);
    m.home_goals = hg;
    m.away_goals = ag;
    m.appearances = lineup(home, means.at(m.home_league_id));
    auto away_lineup = lineup(away, means.at(m.away_league_id));
    m.appearances.insert(m.appearances.end(), away_lineup.begin(), away_lineup.end());
    world_.corpus.push_back(std::move(m));

    if (table) {
      auto& h = (*table)[home];
      auto& a = (*table)[away];
      h.goals += hg;
      a.goals += ag;
      h.goal_diff += hg - ag;
      a.goal_diff += ag - hg;
      if (hg > ag) {
        h.points += 3;
      } else if (hg < ag) {
        a.points += 3;
      } else {
        h.points += 1;
        a.points += 1;
      }
    }
  }

  void play_season(std::size_t s) {
    const Date start = season_start(s);
    world_.truth.seasons.push_back({start, membership_});

    std::map<std::string, std::string> league_of;
    std::map<std::string, double> means;
    for (const auto& [league, teams] : membership_) {
      double sum = 0.0;
      for (const auto& t : teams) {
        league_of[t] = league;
        sum += world_.truth.teams.at(t).ability;
      }
      means[league] = sum / static_cast<double>(teams.size());
    }

    std::map<std::string, std::vector<std::vector<std::pair<std::string, std::string>>>> fixtures;
    std::size_t rounds = 0;
    for (const auto& league : leagues_) {
      auto order = membership_.at(league);
      std::shuffle(order.begin(), order.end(), rng_);
      auto& fx = fixtures[league];
      for (const auto& round : double_round_robin(order.size())) {
        std::vector<std::pair<std::string, std::string>> r;
        for (auto [a, b] : round) r.emplace_back(order[a], order[b]);
        fx.push_back(std::move(r));
      }
      rounds = std::max(rounds, fx.size());
    }

    std::set<std::size_t> cup_after;
    for (std::size_t c = 0; c < cfg_.cup_rounds; ++c) {
      cup_after.insert((c + 1) * rounds / (cfg_.cup_rounds + 1));
    }
    const std::size_t winter = rounds / 2;

    std::map<std::string, std::map<std::string, Standing>> tables;
    for (std::size_t r = 0; r < rounds; ++r) {
      if (r == 0 && s > 0) transfer_window();
      if (r == winter) transfer_window();
      const Date day = start + static_cast<std::int32_t>(r * kMatchdayGap);
      for (const auto& league : leagues_) {
        const auto& fx = fixtures[league];
        if (r >= fx.size()) continue;
        for (const auto& [h, a] : fx[r]) play(h, a, league, day, means, league_of, &tables[league]);
      }
      if (cup_after.count(r)) play_cup_round(day + kMatchdayGap / 2, means, league_of);
    }
    promote(tables);
  }

  void play_cup_round(Date day, const std::map<std::string, double>& means,
                      const std::map<std::string, std::string>& league_of) {
    auto leagues = leagues_;
    std::shuffle(leagues.begin(), leagues.end(), rng_);
    for (std::size_t i = 0; i + 1 < leagues.size(); i += 2) {
      auto a = membership_.at(leagues[i]);
      auto b = membership_.at(leagues[i + 1]);
      std::shuffle(b.begin(), b.end(), rng_);
      const std::size_t n = std::min(a.size(), b.size());
      for (std::size_t k = 0; k < n; ++k) {
        if (k % 2 == 0) {
          play(a[k], b[k], "CUP", day, means, league_of, nullptr);
        } else {
          play(b[k], a[k], "CUP", day, means, league_of, nullptr);
        }
      }
    }
  }

  void promote(const std::map<std::string, std::map<std::string, Standing>>& tables) {
    auto ranked = [&](const std::string& league) {
      auto teams = membership_.at(league);
      const auto& table = tables.at(league);
      std::sort(teams.begin(), teams.end(), [&](const std::string& x, const std::string& y) {
        const auto& a = table.at(x);
        const auto& b = table.at(y);
        if (a.points != b.points) return a.points > b.points;
        if (a.goal_diff != b.goal_diff) return a.goal_diff > b.goal_diff;
        if (a.goals != b.goals) return a.goals > b.goals;
        return x < y;
      });
      return teams;
    };
    for (const auto& tiers : country_tiers_) {
      for (std::size_t t = 0; t + 1 < tiers.size(); ++t) {
        auto upper = ranked(tiers[t]);
        auto lower = ranked(tiers[t + 1]);
        const std::size_t k = std::min({cfg_.promotion_slots, upper.size(), lower.size()});
        for (std::size_t i = 0; i < k; ++i) {
          std::swap(upper[upper.size() - 1 - i], lower[i]);
        }
        std::sort(upper.begin(), upper.end());
        std::sort(lower.begin(), lower.end());
        membership_[tiers[t]] = upper;
        membership_[tiers[t + 1]] = lower;
      }
    }
  }

  const WorldConfig& cfg_;
  std::mt19937_64 rng_;
  World world_;
  std::vector<std::string> leagues_;
  std::vector<std::vector<std::string>> country_tiers_;
  std::map<std::string, double> quality_;
  std::map<std::string, std::vector<std::string>> membership_;
  std::map<std::string, std::vector<std::string>> squads_;
  std::size_t match_no_ = 0;
  std::size_t transfers_ = 0;
};

json metrics_array(const MetricVector& v) { return std::vector<double>(v.values.begin(), v.values.end()); }

MetricVector read_metrics(const json& j) {
  if (!j.is_array() || j.size() != kMetricCount) {
    throw Error(ErrorCode::InvalidArgument, "expected 13 metric values");
  }
  MetricVector v;
  for (std::size_t i = 0; i < kMetricCount; ++i) v[i] = j[i].get<double>();
  return v;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out << content;
  if (!out) throw Error(ErrorCode::Io, "failed writing " + p.string());
}

}  // namespace

void WorldConfig::validate() const {
  if (continents == 0 || countries_per_continent == 0 || tiers == 0 || teams_per_league < 2 ||
      seasons == 0) {
    throw Error(ErrorCode::InvalidArgument, "world counts must be at least 1 (2 teams per league)");
  }
  if (!(noise_sigma >= 0.0) || !(style_sd >= 0.0) || !(ability_sd >= 0.0) ||
      !(multiplier_min > 0.0) || !(multiplier_max >= multiplier_min) ||
      !(transfer_fraction >= 0.0 && transfer_fraction <= 1.0) ||
      !(second_position_rate >= 0.0 && second_position_rate <= 1.0) || !std::isfinite(kappa)) {
    throw Error(ErrorCode::InvalidArgument, "invalid world configuration");
  }
}

std::string WorldConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["continents"] = continents;
  j["countries_per_continent"] = countries_per_continent;
  j["tiers"] = tiers;
  j["teams_per_league"] = teams_per_league;
  j["seasons"] = seasons;
  j["first_season"] = first_season;
  j["promotion_slots"] = promotion_slots;
  j["cup_rounds"] = cup_rounds;
  j["continent_sd"] = continent_sd;
  j["country_sd"] = country_sd;
  j["tier_gap"] = tier_gap;
  j["ability_sd"] = ability_sd;
  j["multiplier_min"] = multiplier_min;
  j["multiplier_max"] = multiplier_max;
  j["style_sd"] = style_sd;
  j["kappa"] = kappa;
  j["noise_sigma"] = noise_sigma;
  j["transfer_fraction"] = transfer_fraction;
  j["second_position_rate"] = second_position_rate;
  return j.dump(2);
}

WorldConfig WorldConfig::from_json(std::string_view text) {
  WorldConfig c;
  try {
    const auto j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "world config must be an object");
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("seed", c.seed);
    get("continents", c.continents);
    get("countries_per_continent", c.countries_per_continent);
    get("tiers", c.tiers);
    get("teams_per_league", c.teams_per_league);
    get("seasons", c.seasons);
    get("first_season", c.first_season);
    get("promotion_slots", c.promotion_slots);
    get("cup_rounds", c.cup_rounds);
    get("continent_sd", c.continent_sd);
    get("country_sd", c.country_sd);
    get("tier_gap", c.tier_gap);
    get("ability_sd", c.ability_sd);
    get("multiplier_min", c.multiplier_min);
    get("multiplier_max", c.multiplier_max);
    get("style_sd", c.style_sd);
    get("kappa", c.kappa);
    get("noise_sigma", c.noise_sigma);
    get("transfer_fraction", c.transfer_fraction);
    get("second_position_rate", c.second_position_rate);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("world config: ") + e.what());
  }
  c.validate();
  return c;
}

const std::array<MetricVector, kPositionCount>& position_profiles() {
  // shots, xg, xa, crosses, (total), short, long, att3rd, pen entries, take-ons, def own/mid/att
  static const std::array<MetricVector, kPositionCount> p{
      profile({0.01, 0.001, 0.002, 0.01, 0, 20, 8, 0.5, 0.05, 0.02, 1.0, 0.05, 0.01}),
      profile({0.5, 0.05, 0.02, 0.1, 0, 40, 6, 4, 0.3, 0.2, 5.0, 3.0, 0.3}),
      profile({0.5, 0.04, 0.12, 1.5, 0, 35, 4, 10, 1.5, 0.8, 3.5, 3.0, 1.0}),
      profile({1.0, 0.09, 0.12, 0.5, 0, 45, 4, 12, 2.0, 0.9, 2.0, 4.0, 1.5}),
      profile({2.0, 0.22, 0.18, 2.0, 0, 22, 2, 12, 2.5, 2.5, 1.0, 2.0, 1.8}),
      profile({2.8, 0.38, 0.10, 0.3, 0, 16, 1, 8, 1.0, 1.2, 0.4, 1.2, 2.0}),
  };
  return p;
}

MetricVector Truth::style(const std::string& player, Position pos) const {
  auto it = players.find(player);
  if (it == players.end()) throw Error(ErrorCode::MissingEntity, "unknown player '" + player + "'");
  MetricVector s = position_profiles()[index_of(pos)];
  for (std::size_t j = 0; j < kMetricCount; ++j) s[j] *= it->second.factor[j];
  s[kTotal] = s[kShort] + s[kLong];
  return s;
}

const std::string& Truth::league_of(const std::string& team, Date date) const {
  if (seasons.empty()) throw Error(ErrorCode::NoData, "truth has no seasons");
  auto it = std::upper_bound(seasons.begin(), seasons.end(), date,
                             [](Date d, const Season& s) { return d < s.start; });
  const Season& season = it == seasons.begin() ? seasons.front() : *std::prev(it);
  for (const auto& [league, teams] : season.leagues) {
    if (std::find(teams.begin(), teams.end(), team) != teams.end()) return league;
  }
  throw Error(ErrorCode::MissingEntity, "unknown team '" + team + "'");
}

double Truth::league_mean_ability(const std::string& league, Date date) const {
  auto it = std::upper_bound(seasons.begin(), seasons.end(), date,
                             [](Date d, const Season& s) { return d < s.start; });
  const Season& season = it == seasons.begin() ? seasons.front() : *std::prev(it);
  auto l = season.leagues.find(league);
  if (l == season.leagues.end() || l->second.empty()) {
    throw Error(ErrorCode::MissingEntity, "unknown league '" + league + "'");
  }
  double sum = 0.0;
  for (const auto& t : l->second) sum += teams.at(t).ability;
  return sum / static_cast<double>(l->second.size());
}

MetricVector Truth::link(double delta) const {
  MetricVector g;
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    g[j] = std::exp((defensive(j) ? -kappa : kappa) * delta);
  }
  return g;
}

MetricVector Truth::expected(const std::string& player, Position pos, const std::string& team,
                             Date date) const {
  auto t = teams.find(team);
  if (t == teams.end()) throw Error(ErrorCode::MissingEntity, "unknown team '" + team + "'");
  const MetricVector s = style(player, pos);
  const MetricVector g = link(t->second.ability - league_mean_ability(league_of(team, date), date));
  MetricVector mu;
  for (std::size_t j = 0; j < kMetricCount; ++j) mu[j] = s[j] * t->second.multiplier[j] * g[j];
  mu[kTotal] = mu[kShort] + mu[kLong];
  return mu;
}

std::string Truth::to_json() const {
  ordered_json j;
  j["kappa"] = kappa;
  ordered_json profiles = ordered_json::object();
  for (std::size_t p = 0; p < kPositionCount; ++p) {
    profiles[std::string(kPositionNames[p])] = metrics_array(position_profiles()[p]);
  }
  j["profiles"] = profiles;
  ordered_json tj = ordered_json::object();
  for (const auto& [id, t] : teams) {
    tj[id] = {{"ability", t.ability}, {"multiplier", metrics_array(t.multiplier)}};
  }
  j["teams"] = tj;
  ordered_json pj = ordered_json::object();
  for (const auto& [id, p] : players) {
    pj[id] = {{"primary", std::string(name_of(p.primary))}, {"factor", metrics_array(p.factor)}};
  }
  j["players"] = pj;
  ordered_json sj = ordered_json::array();
  for (const auto& s : seasons) sj.push_back({{"start", s.start.to_string()}, {"leagues", s.leagues}});
  j["seasons"] = sj;
  return j.dump();
}

Truth Truth::from_json(std::string_view text) {
  Truth t;
  try {
    const auto j = json::parse(text);
    t.kappa = j.at("kappa").get<double>();
    for (const auto& [id, v] : j.at("teams").items()) {
      t.teams[id] = {v.at("ability").get<double>(), read_metrics(v.at("multiplier"))};
    }
    for (const auto& [id, v] : j.at("players").items()) {
      const auto pos = position_from_name(v.at("primary").get<std::string>());
      if (!pos) throw Error(ErrorCode::UnknownPosition, "player '" + id + "'");
      t.players[id] = {*pos, read_metrics(v.at("factor"))};
    }
    for (const auto& s : j.at("seasons")) {
      t.seasons.push_back({Date::parse(s.at("start").get<std::string>()),
                           s.at("leagues").get<std::map<std::string, std::vector<std::string>>>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("truth file: ") + e.what());
  }
  return t;
}

World generate(const WorldConfig& cfg) {
  cfg.validate();
  Generator g(cfg);
  World w = g.run();
  std::sort(w.corpus.begin(), w.corpus.end(), [](const auto& a, const auto& b) {
    return std::tie(a.date, a.match_id) < std::tie(b.date, b.match_id);
  });
  return w;
}

void write_world(const World& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "corpus.ndjson", std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / "corpus.ndjson").string());
    ingest::write_ndjson(out, world.corpus);
  }
  write_file(dir / "topology.json", world.topology.to_json());
  write_file(dir / "truth.json", world.truth.to_json());
  std::ofstream out(dir / "players.csv", std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write players.csv");
  recruit::MetadataProvider(world.players).write_csv(out);
}

std::vector<MetricVector> oracle_targets(const Truth& truth,
                                         std::span<const predictor::TransferScenario> scenarios) {
  std::vector<MetricVector> out;
  out.reserve(scenarios.size());
  for (const auto& s : scenarios) {
    out.push_back(truth.expected(s.player, s.position, s.destination_team, s.date));
  }
  return out;
}

MetricVector oracle_eval(const Truth& truth, std::span<const predictor::TransferScenario> scenarios,
                         std::span<const MetricVector> predictions) {
  if (scenarios.size() != predictions.size()) {
    throw Error(ErrorCode::ScenarioMismatch, std::to_string(scenarios.size()) + " scenarios but " +
                                                 std::to_string(predictions.size()) +
                                                 " predictions");
  }
  if (scenarios.empty()) throw Error(ErrorCode::ScenarioMismatch, "no scenarios");
  std::vector<MetricVector> mu;
  try {
    mu = oracle_targets(truth, scenarios);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MissingEntity) throw;
    throw Error(ErrorCode::ScenarioMismatch, e.what());
  }
  MetricVector mse;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      const double d = predictions[i][j] - mu[i][j];
      mse[j] += d * d;
    }
  }
  return mse * (1.0 / static_cast<double>(mu.size()));
}

}  // namespace tportal::synth
