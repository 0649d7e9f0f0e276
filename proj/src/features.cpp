#include "tportal/features.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <ostream>

#include "json.hpp"
#include "tportal/error.hpp"

namespace tportal::features {

namespace {

template <typename Line>
Per90Window rolling_impl(std::span<const Line> lines, double window_minutes) {
  if (!(window_minutes > 0.0)) throw Error(ErrorCode::InvalidArgument, "window must be positive");
  if (lines.empty()) throw Error(ErrorCode::NoData, "no games in window");
  Per90Window out;
  MetricVector sum;
  double in_window = 0.0;
  double remaining = window_minutes;
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    out.cum_minutes += it->minutes;
    if (remaining <= 0.0) continue;
    if (it->minutes <= remaining) {
      sum += it->metrics;
      in_window += it->minutes;
      remaining -= it->minutes;
    } else {
      sum += it->metrics * (remaining / it->minutes);
      in_window += remaining;
      remaining = 0.0;
    }
  }
  if (!(in_window > 0.0)) throw Error(ErrorCode::NoData, "no minutes in window");
  out.per90 = sum * (90.0 / in_window);
  return out;
}

bool same(const Sample& a, const Sample& b) {
  return a.date == b.date && a.cum_minutes == b.cum_minutes && a.raw == b.raw &&
         a.prior == b.prior && a.weight == b.weight && a.blended == b.blended;
}

bool same(const FeatureTimeline& a, const FeatureTimeline& b) {
  if (a.epochs().size() != b.epochs().size()) return false;
  for (std::size_t e = 0; e < a.epochs().size(); ++e) {
    const Epoch& x = a.epochs()[e];
    const Epoch& y = b.epochs()[e];
    if (!(x.context == y.context) || x.prior != y.prior || x.samples.size() != y.samples.size()) {
      return false;
    }
    for (std::size_t i = 0; i < x.samples.size(); ++i) {
      if (!same(x.samples[i], y.samples[i])) return false;
    }
  }
  return true;
}

template <typename Map>
bool same_map(const Map& a, const Map& b) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !same(ia->second, ib->second)) return false;
  }
  return true;
}

std::string entity_label(const FeatureTimeline& tl, const Context& ctx) {
  switch (tl.level()) {
    case EntityLevel::Team:
      return ingest::describe(ingest::TeamKey{tl.id(), ctx.league});
    case EntityLevel::TeamPosition:
      return ingest::describe(ingest::TeamPositionKey{tl.id(), *tl.position(), ctx.league});
    case EntityLevel::PlayerPosition:
      return ingest::describe(
          ingest::PlayerPositionKey{tl.id(), *tl.position(), ctx.team, ctx.league});
  }
  return {};
}

nlohmann::ordered_json metrics_json(const MetricVector& v) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < kMetricCount; ++i) j[std::string(kMetricNames[i])] = v[i];
  return j;
}

}  // namespace

void WindowConfig::validate() const {
  if (!(player_window_minutes > 0) || !(team_position_window_minutes > 0) ||
      !(team_window_minutes > 0) || !(prior_constant > 0) || !(red_minutes >= 0)) {
    throw Error(ErrorCode::InvalidArgument, "window configuration values must be positive");
  }
}

std::string_view to_string(RagStatus s) {
  switch (s) {
    case RagStatus::Red: return "red";
    case RagStatus::Amber: return "amber";
    case RagStatus::Green: return "green";
  }
  return "red";
}

std::string_view to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::Ratings: return "ratings";
    case PhaseKind::TeamAndTeamPosition: return "team_and_team_position";
    case PhaseKind::PlayerPosition: return "player_position";
  }
  return "";
}

Per90Window rolling_per90(std::span<const Stint> lines, double window_minutes) {
  return rolling_impl(lines, window_minutes);
}

Per90Window rolling_per90(std::span<const ingest::GameLine> lines, double window_minutes) {
  return rolling_impl(lines, window_minutes);
}

Blend blend(const MetricVector& prior, const MetricVector& raw, double cum_minutes, double c) {
  if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "prior constant must be positive");
  if (cum_minutes < 0.0) throw Error(ErrorCode::InvalidArgument, "negative minutes");
  Blend b;
  b.weight = std::min(1.0, cum_minutes / c);
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    b.blended[i] = (1.0 - b.weight) * prior[i] + b.weight * raw[i];
  }
  return b;
}

RagStatus rag_for(double cum_minutes, double weight, double red_minutes) {
  if (weight >= 1.0) return RagStatus::Green;
  if (cum_minutes < red_minutes) return RagStatus::Red;
  return RagStatus::Amber;
}

FeatureTimeline::FeatureTimeline(EntityLevel level, std::string id, std::optional<Position> position,
                                 double window_minutes, double prior_constant)
    : level_(level), id_(std::move(id)), position_(position), window_(window_minutes),
      c_(prior_constant) {}

void FeatureTimeline::advance(const Stint& line, const Context& ctx, const PriorProvider& prior) {
  if (!epochs_.empty() && !epochs_.back().samples.empty() &&
      line.date < epochs_.back().samples.back().date) {
    throw Error(ErrorCode::OutOfOrderDate, id_ + ": game on " + line.date.to_string() +
                                               " precedes " +
                                               epochs_.back().samples.back().date.to_string());
  }
  if (epochs_.empty() || !(epochs_.back().context == ctx)) {
    Epoch e;
    e.index = static_cast<int>(epochs_.size());
    e.context = ctx;
    e.opened = line.date;
    e.prior = prior ? prior(*this, ctx, line.date) : MetricVector{};
    epochs_.push_back(std::move(e));
  }
  Epoch& e = epochs_.back();
  e.stints.push_back(line);
  const Per90Window r = rolling_per90(std::span<const Stint>(e.stints), window_);
  const Blend b = blend(e.prior, r.per90, r.cum_minutes, c_);
  e.samples.push_back({line.date, r.cum_minutes, r.per90, e.prior, b.weight, b.blended});
}

SampleRef FeatureTimeline::latest() const {
  for (auto it = epochs_.rbegin(); it != epochs_.rend(); ++it) {
    if (!it->samples.empty()) return {&*it, &it->samples.back()};
  }
  return {};
}

SampleRef FeatureTimeline::as_of(Date date) const {
  for (auto it = epochs_.rbegin(); it != epochs_.rend(); ++it) {
    if (it->samples.empty() || it->samples.front().date > date) continue;
    auto s = std::upper_bound(it->samples.begin(), it->samples.end(), date,
                              [](Date d, const Sample& x) { return d < x.date; });
    return {&*it, &*std::prev(s)};
  }
  return {};
}

SampleRef FeatureTimeline::before(Date date) const { return as_of(date - 1); }

RagStatus rag(const FeatureTimeline& tl, Date date, double red_minutes) {
  const SampleRef s = tl.as_of(date);
  if (!s) return RagStatus::Red;
  return rag_for(s.sample->cum_minutes, s.sample->weight, red_minutes);
}

const FeatureTimeline* FeatureStore::team(const std::string& id) const {
  auto it = teams.find(id);
  return it == teams.end() ? nullptr : &it->second;
}

const FeatureTimeline* FeatureStore::team_position(const std::string& team, Position p) const {
  auto it = team_positions.find({team, p});
  return it == team_positions.end() ? nullptr : &it->second;
}

const FeatureTimeline* FeatureStore::player(const std::string& id, Position p) const {
  auto it = players.find({id, p});
  return it == players.end() ? nullptr : &it->second;
}

bool FeatureStore::operator==(const FeatureStore& o) const {
  return same_map(teams, o.teams) && same_map(team_positions, o.team_positions) &&
         same_map(players, o.players);
}

ComputationPlan pipeline_order(std::span<const ingest::MatchRecord> corpus) {
  std::vector<std::string> teams;
  std::vector<std::string> players;
  {
    std::map<std::string, bool> t;
    std::map<PositionedId, bool> p;
    for (const auto& m : corpus) {
      t[m.home_team_id];
      t[m.away_team_id];
      for (const auto& a : m.appearances) p[{a.player_id, a.position}];
    }
    for (const auto& [id, _] : t) teams.push_back(id);
    for (const auto& [id, _] : p) players.push_back(id.first + "/" + std::string(name_of(id.second)));
  }
  ComputationPlan plan;
  plan.phases.push_back({PhaseKind::Ratings, {}, teams});
  plan.phases.push_back({PhaseKind::TeamAndTeamPosition, {PhaseKind::Ratings}, teams});
  plan.phases.push_back(
      {PhaseKind::PlayerPosition, {PhaseKind::Ratings, PhaseKind::TeamAndTeamPosition}, players});
  for (std::size_t i = 0; i < plan.phases.size(); ++i) {
    for (PhaseKind r : plan.phases[i].reads) {
      if (static_cast<std::size_t>(r) >= i) {
        throw Error(ErrorCode::CyclicDependency,
                    std::string(to_string(plan.phases[i].kind)) + " reads " +
                        std::string(to_string(r)));
      }
    }
  }
  return plan;
}

FeatureStore build_features(std::span<const ingest::MatchRecord> corpus, const WindowConfig& cfg,
                            const PriorSource& priors, Execution exec) {
  cfg.validate();
  FeatureStore store;

  struct PlayerStints {
    FeatureTimeline* timeline = nullptr;
    std::vector<std::pair<Stint, Context>> games;
  };
  std::map<PositionedId, PlayerStints> player_games;

  // Phase 2: team and team-position timelines, in match order.
  for (const auto& m : corpus) {
    const auto lines = ingest::aggregate_player_positions(m);
    const auto roll = ingest::rollup(lines);
    for (const auto& line : roll.teams) {
      const auto& k = std::get<ingest::TeamKey>(line.key);
      auto [it, fresh] = store.teams.try_emplace(k.team);
      if (fresh) {
        it->second = FeatureTimeline(EntityLevel::Team, k.team, std::nullopt,
                                     cfg.team_window_minutes, cfg.prior_constant);
      }
      it->second.advance({line.date, line.minutes, line.metrics}, {k.team, k.league},
                         [&](const FeatureTimeline& tl, const Context& ctx, Date d) {
                           return priors.team_prior(store, tl, ctx, d);
                         });
    }
    for (const auto& line : roll.team_positions) {
      const auto& k = std::get<ingest::TeamPositionKey>(line.key);
      auto [it, fresh] = store.team_positions.try_emplace({k.team, k.position});
      if (fresh) {
        it->second = FeatureTimeline(EntityLevel::TeamPosition, k.team, k.position,
                                     cfg.team_position_window_minutes, cfg.prior_constant);
      }
      it->second.advance({line.date, line.minutes, line.metrics}, {k.team, k.league},
                         [&](const FeatureTimeline& tl, const Context& ctx, Date d) {
                           return priors.team_position_prior(store, tl, ctx, d);
                         });
    }
    for (const auto& line : lines) {
      const auto& k = std::get<ingest::PlayerPositionKey>(line.key);
      player_games[{k.player, k.position}].games.push_back(
          {Stint{line.date, line.minutes, line.metrics}, Context{k.team, k.league}});
    }
  }

  // Phase 3: player-position timelines. Each one only reads its own history
  // plus the finished team-level store, so they are independent.
  std::vector<PlayerStints*> work;
  work.reserve(player_games.size());
  for (auto& [id, pg] : player_games) {
    auto [it, fresh] = store.players.try_emplace(id);
    it->second = FeatureTimeline(EntityLevel::PlayerPosition, id.first, id.second,
                                 cfg.player_window_minutes, cfg.prior_constant);
    pg.timeline = &it->second;
    work.push_back(&pg);
  }

  const FeatureStore& frozen = store;
  auto run_one = [&](PlayerStints& pg) {
    const PriorProvider provider = [&](const FeatureTimeline& tl, const Context& ctx, Date d) {
      return priors.player_prior(frozen, tl, ctx, d);
    };
    for (const auto& [stint, ctx] : pg.games) pg.timeline->advance(stint, ctx, provider);
  };

  if (exec == Execution::Serial) {
    for (PlayerStints* pg : work) run_one(*pg);
  } else {
    std::exception_ptr failure;
    std::mutex failure_mu;
    const long n = static_cast<long>(work.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (long i = 0; i < n; ++i) {
      try {
        run_one(*work[static_cast<std::size_t>(i)]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  return store;
}

void write_snapshot(std::ostream& out, const FeatureStore& store, const WindowConfig& cfg,
                    bool full_history, const std::string& filter) {
  auto emit = [&](const FeatureTimeline& tl) {
    for (const Epoch& e : tl.epochs()) {
      const std::string key = entity_label(tl, e.context);
      if (!filter.empty() && key.find(filter) == std::string::npos) continue;
      const std::size_t first = full_history || e.samples.empty() ? 0 : e.samples.size() - 1;
      for (std::size_t i = first; i < e.samples.size(); ++i) {
        const Sample& s = e.samples[i];
        nlohmann::ordered_json j;
        j["entity_key"] = key;
        j["date"] = s.date.to_string();
        j["epoch"] = e.index;
        j["m"] = s.cum_minutes;
        j["w"] = s.weight;
        j["P"] = metrics_json(s.prior);
        j["R"] = metrics_json(s.raw);
        j["X"] = metrics_json(s.blended);
        j["rag"] = std::string(to_string(rag_for(s.cum_minutes, s.weight, cfg.red_minutes)));
        out << j.dump() << '\n';
      }
    }
  };
  for (const auto& [id, tl] : store.teams) emit(tl);
  for (const auto& [id, tl] : store.team_positions) emit(tl);
  for (const auto& [id, tl] : store.players) emit(tl);
}

}  // namespace tportal::features
