#include "tportal/recruitment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>

#include "json.hpp"
#include "tportal/error.hpp"
#include "tportal/text.hpp"

namespace tportal::recruit {

using predictor::TransferScenario;

namespace {

const std::vector<std::string> kMetaColumns{"player_id", "name", "birth_date", "value", "position"};

std::string current_league(const ratings::RatingHistory& history, const std::string& team,
                           Date date) {
  const auto& snap = history.before(date);
  auto it = snap.league.find(team);
  if (it == snap.league.end()) throw Error(ErrorCode::MissingEntity, "unknown team '" + team + "'");
  return it->second;
}

}  // namespace

double age_years(Date birth, Date on) { return static_cast<double>(on - birth) / 365.2425; }

MetadataProvider::MetadataProvider(std::vector<PlayerMeta> players) {
  for (auto& p : players) {
    const std::string id = p.player_id;
    players_[id] = std::move(p);
  }
}

MetadataProvider MetadataProvider::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (split_csv_line(line) != kMetaColumns) {
    throw Error(ErrorCode::MalformedRow, "line 1: players.csv header must be " +
                                             join_csv_line(kMetaColumns));
  }
  std::vector<PlayerMeta> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = "line " + std::to_string(n) + ": ";
    if (cells.size() != kMetaColumns.size()) {
      throw Error(ErrorCode::MalformedRow, where + "expected 5 columns");
    }
    PlayerMeta p;
    p.player_id = cells[0];
    p.name = cells[1];
    try {
      p.birth_date = Date::parse(cells[2]);
    } catch (const Error&) {
      throw Error(ErrorCode::MalformedRow, where + "bad birth_date");
    }
    if (!parse_double(cells[3], p.value) || !(p.value >= 0.0)) {
      throw Error(ErrorCode::MalformedRow, where + "bad value");
    }
    const auto pos = position_from_name(cells[4]);
    if (!pos) throw Error(ErrorCode::UnknownPosition, where + "'" + cells[4] + "'");
    p.position = *pos;
    if (p.player_id.empty()) throw Error(ErrorCode::MalformedRow, where + "empty player_id");
    out.push_back(std::move(p));
  }
  return MetadataProvider(std::move(out));
}

void MetadataProvider::write_csv(std::ostream& out) const {
  out << join_csv_line(kMetaColumns) << '\n';
  for (const auto& [id, p] : players_) {
    out << join_csv_line({p.player_id, p.name, p.birth_date.to_string(), format_double(p.value),
                          std::string(name_of(p.position))})
        << '\n';
  }
}

const PlayerMeta* MetadataProvider::find(const std::string& player_id) const {
  auto it = players_.find(player_id);
  return it == players_.end() ? nullptr : &it->second;
}

void WeightProfile::validate() const {
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    if (!(weights[j] >= 0.0 && weights[j] <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument,
                  "weight for " + std::string(kMetricNames[j]) + " must lie in [0, 1]");
    }
  }
}

double WeightProfile::total() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

WeightProfile WeightProfile::from_json(std::string_view text) {
  WeightProfile w;
  try {
    const auto j = nlohmann::json::parse(text);
    w.name = j.value("name", std::string{});
    const auto& ws = j.at("weights");
    if (!ws.is_object()) throw Error(ErrorCode::InvalidArgument, "weights must be an object");
    for (const auto& [key, value] : ws.items()) {
      const auto m = metric_from_name(key);
      if (!m) throw Error(ErrorCode::InvalidArgument, "unknown metric '" + key + "'");
      if (!value.is_number()) throw Error(ErrorCode::InvalidArgument, "weight must be a number");
      w.weights[index_of(*m)] = value.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("weight profile: ") + e.what());
  }
  w.validate();
  return w;
}

std::string WeightProfile::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  nlohmann::ordered_json ws = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    if (weights[k] != 0.0) ws[std::string(kMetricNames[k])] = weights[k];
  }
  j["weights"] = ws;
  return j.dump(2);
}

void FilterSet::validate() const {
  for (const auto* v : {&max_age, &max_value, &min_position_minutes, &max_team_rating,
                         &max_team_raw_rating}) {
    if (*v && !std::isfinite(**v)) throw Error(ErrorCode::InvalidArgument, "filter bounds must be finite");
  }
}

std::vector<double> score(std::span<const MetricVector> predictions, const WeightProfile& w) {
  w.validate();
  const double total = w.total();
  if (!(total > 0.0)) throw Error(ErrorCode::AllZeroWeights, "at least one weight must be positive");
  if (predictions.empty()) throw Error(ErrorCode::EmptyCohort, "nothing to score");
  std::vector<double> out(predictions.size(), 0.0);
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    const double wj = w.weights[j];
    if (wj == 0.0) continue;
    double lo = predictions[0][j], hi = predictions[0][j];
    for (const auto& p : predictions) {
      lo = std::min(lo, p[j]);
      hi = std::max(hi, p[j]);
    }
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      const double norm = hi > lo ? (predictions[i][j] - lo) / (hi - lo) : 0.5;
      out[i] += wj * norm;
    }
  }
  for (double& s : out) s = std::clamp(s / total, 0.0, 1.0);
  return out;
}

double recent_minutes(const features::FeatureTimeline& tl, Date date) {
  double m = 0.0;
  for (const auto& e : tl.epochs()) {
    for (const auto& s : e.stints) {
      if (s.date < date && date - s.date <= 365) m += s.minutes;
    }
  }
  return m;
}

std::vector<ShortlistEntry> build_shortlist(const ShortlistRequest& req, const Sources& src) {
  req.weights.validate();
  if (!(req.weights.total() > 0.0)) {
    throw Error(ErrorCode::AllZeroWeights, "at least one weight must be positive");
  }
  req.filters.validate();
  if (req.k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const std::string dest_league = current_league(src.history, req.destination_team, req.date);
  const auto& snap = src.history.before(req.date);
  const auto& f = req.filters;

  struct Candidate {
    TransferScenario scenario;
    const PlayerMeta* meta;
  };
  std::vector<Candidate> pool;
  for (const auto& [id, tl] : src.store.players) {
    if (id.second != req.position) continue;
    // Players without metadata stay eligible unless a filter needs it.
    const PlayerMeta* meta = src.metadata.find(id.first);
    if (!meta && (f.max_age || f.max_value || !f.allowed_positions.empty())) continue;
    const auto ref = tl.before(req.date);
    if (!ref || req.date - ref.sample->date > 365) continue;
    const auto& ctx = ref.epoch->context;
    if (ctx.team == req.destination_team) continue;
    if (meta && f.max_age && !(age_years(meta->birth_date, req.date) < *f.max_age)) continue;
    if (meta && f.max_value && !(meta->value <= *f.max_value)) continue;
    if (f.min_position_minutes && !(recent_minutes(tl, req.date) >= *f.min_position_minutes)) {
      continue;
    }
    if (meta && !f.allowed_positions.empty() &&
        std::find(f.allowed_positions.begin(), f.allowed_positions.end(), meta->position) ==
            f.allowed_positions.end()) {
      continue;
    }
    if (!f.allowed_leagues.empty() &&
        std::find(f.allowed_leagues.begin(), f.allowed_leagues.end(), ctx.league) ==
            f.allowed_leagues.end()) {
      continue;
    }
    if (f.max_team_rating) {
      auto it = snap.scores.find(ctx.team);
      if (it == snap.scores.end() || !(it->second <= *f.max_team_rating)) continue;
    }
    if (f.max_team_raw_rating) {
      auto it = snap.raw.find(ctx.team);
      if (it == snap.raw.end() || !(it->second <= *f.max_team_raw_rating)) continue;
    }
    pool.push_back({{id.first, req.position, ctx.team, ctx.league, req.destination_team,
                     dest_league, req.date},
                    meta});
  }
  if (pool.empty()) throw Error(ErrorCode::EmptyAfterFilters, "no candidate passes the filters");

  std::vector<TransferScenario> scenarios;
  for (const auto& c : pool) scenarios.push_back(c.scenario);
  const auto values = predictor::predict_many(scenarios, src.model, src.store, src.history);
  const auto scores = score(values, req.weights);

  const auto cohort = predictor::league_cohort(src.store, dest_league, req.position, req.date);
  const auto cohort_values = predictor::predict_many(cohort, src.model, src.store, src.history);

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return pool[a].scenario.player < pool[b].scenario.player;
  });
  order.resize(std::min(order.size(), req.k));

  std::vector<ShortlistEntry> out;
  for (std::size_t i : order) {
    const auto& c = pool[i];
    std::vector<MetricVector> others;
    for (std::size_t k = 0; k < cohort.size(); ++k) {
      if (cohort[k].player != c.scenario.player) others.push_back(cohort_values[k]);
    }
    ShortlistEntry e;
    e.player_id = c.scenario.player;
    e.name = c.meta ? c.meta->name : c.scenario.player;
    e.score = scores[i];
    e.prediction =
        predictor::make_prediction(c.scenario, values[i], others, src.store, src.red_minutes);
    e.team = c.scenario.origin_team;
    e.league = c.scenario.origin_league;
    if (c.meta) {
      e.age = age_years(c.meta->birth_date, req.date);
      e.value = c.meta->value;
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_shortlist_csv(std::ostream& out, std::span<const ShortlistEntry> entries) {
  out << "rank,score,player_id,player,team,competition,age,value\n";
  std::size_t rank = 0;
  for (const auto& e : entries) {
    char age[32] = "";
    if (e.age) std::snprintf(age, sizeof age, "%.1f", *e.age);
    out << join_csv_line({std::to_string(++rank), format_double(e.score), e.player_id, e.name,
                          e.team, e.league, age, e.value ? format_double(*e.value) : ""})
        << '\n';
  }
}

std::string_view to_string(Highlight h) {
  switch (h) {
    case Highlight::Subject: return "subject";
    case Highlight::Teammate: return "teammate";
    case Highlight::League: return "league";
  }
  return "";
}

double percentile_midrank(double value, std::span<const double> others) {
  if (others.empty()) return 50.0;
  double rank = 0.0;
  for (double v : others) {
    if (v < value) {
      rank += 1.0;
    } else if (v == value) {
      rank += 0.5;
    }
  }
  return 100.0 * rank / static_cast<double>(others.size());
}

SwarmDataset swarm(const std::string& league, Position position, Metric metric,
                   const TransferScenario& subject, const Sources& src) {
  auto cohort = predictor::league_cohort(src.store, league, position, subject.date);
  std::erase_if(cohort, [&](const TransferScenario& c) { return c.player == subject.player; });
  if (cohort.empty() && subject.destination_league != league) {
    throw Error(ErrorCode::EmptyCohort, "no " + std::string(name_of(position)) + " players in " + league);
  }
  const auto values = predictor::predict_many(cohort, src.model, src.store, src.history);
  const MetricVector mine =
      predictor::predict_metrics(src.model, predictor::assemble_input(subject, src.store, src.history));

  SwarmDataset d;
  d.metric = metric;
  d.league = league;
  d.position = position;
  d.subject = subject;
  d.points.push_back({subject.player, subject.destination_team, mine[metric], Highlight::Subject});
  std::vector<double> others;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const Highlight h = cohort[i].origin_team == subject.destination_team ? Highlight::Teammate
                                                                          : Highlight::League;
    d.points.push_back({cohort[i].player, cohort[i].origin_team, values[i][metric], h});
    others.push_back(values[i][metric]);
  }
  d.subject_percentile = percentile_midrank(mine[metric], others);
  return d;
}

std::string to_json(const SwarmDataset& d) {
  nlohmann::ordered_json j;
  j["metric"] = std::string(name_of(d.metric));
  j["league"] = d.league;
  j["position"] = std::string(name_of(d.position));
  j["subject"] = {{"player_id", d.subject.player},
                  {"origin_team", d.subject.origin_team},
                  {"destination_team", d.subject.destination_team},
                  {"date", d.subject.date.to_string()}};
  j["subject_percentile"] = d.subject_percentile;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const auto& p : d.points) {
    pts.push_back({{"player_id", p.player_id},
                   {"team", p.team},
                   {"value", p.value},
                   {"highlight", std::string(to_string(p.highlight))}});
  }
  j["points"] = pts;
  return j.dump();
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Hot: return "Hot";
    case Verdict::Tepid: return "Tepid";
    case Verdict::Not: return "Not";
  }
  return "";
}

Verdict classify(double percentile, double retention, const VerdictThresholds& t) {
  if (percentile >= t.hot_percentile && retention >= t.hot_retention) return Verdict::Hot;
  if (percentile < t.not_percentile || retention < t.not_retention) return Verdict::Not;
  return Verdict::Tepid;
}

VerdictResult verdict(const predictor::Prediction& destination, const predictor::Prediction& origin,
                      const WeightProfile& w, const VerdictThresholds& t) {
  w.validate();
  const double total = w.total();
  if (!(total > 0.0)) throw Error(ErrorCode::AllZeroWeights, "at least one weight must be positive");
  VerdictResult r;
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    const double wj = w.weights[j];
    if (wj == 0.0) continue;
    r.percentile += wj * destination.percentiles[j];
    const double o = origin.values[j];
    const double ratio = o > 0.0 ? std::min(2.0, destination.values[j] / o) : 1.0;
    r.retention += wj * ratio;
  }
  r.percentile /= total;
  r.retention /= total;
  r.verdict = classify(r.percentile, r.retention, t);
  return r;
}

}  // namespace tportal::recruit
