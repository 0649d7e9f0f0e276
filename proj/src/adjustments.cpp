#include "tportal/adjustments.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "tportal/error.hpp"
#include "tportal/linalg.hpp"

namespace tportal::adjust {

using features::Context;
using features::FeatureStore;
using features::FeatureTimeline;
using features::SampleRef;

namespace {

constexpr int kSchemaVersion = 1;

const features::Epoch* last_epoch_with_samples(const FeatureTimeline& tl) {
  for (auto it = tl.epochs().rbegin(); it != tl.epochs().rend(); ++it) {
    if (!it->samples.empty()) return &*it;
  }
  return nullptr;
}

std::vector<double> column(const std::vector<MetricVector>& values, std::size_t j) {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v[j]);
  return out;
}

MetricVector relative_vector(const MetricVector& value, const std::vector<MetricVector>& dist) {
  MetricVector z;
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    const auto d = column(dist, j);
    z[j] = relative_feature_value(value[j], d);
  }
  return z;
}

/// First sample of an epoch with the prior fully discarded.
const features::Sample* first_settled(const features::Epoch& e) {
  for (const auto& s : e.samples) {
    if (s.weight >= 1.0) return &s;
  }
  return nullptr;
}

std::optional<MetricVector> naive_or_none(const FeatureStore& store, const std::string& league,
                                          Level level, std::optional<Position> pos, Date date) {
  try {
    return naive_league_expectation(store, league, level, pos, date);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyLeague) throw;
    return std::nullopt;
  }
}

nlohmann::json array_json(const std::array<double, kMetricCount>& a) {
  return nlohmann::json(std::vector<double>(a.begin(), a.end()));
}

void read_array(const nlohmann::json& j, std::array<double, kMetricCount>& out) {
  if (!j.is_array() || j.size() != kMetricCount) {
    throw Error(ErrorCode::InvalidArgument, "expected an array of 13 numbers");
  }
  for (std::size_t i = 0; i < kMetricCount; ++i) out[i] = j[i].get<double>();
}

}  // namespace

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::NoData, "quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<MetricVector> league_values(const FeatureStore& store, const std::string& league,
                                        Level level, std::optional<Position> position, Date date) {
  std::vector<MetricVector> out;
  auto take = [&](const FeatureTimeline& tl) {
    const SampleRef s = tl.before(date);
    if (s && s.epoch->context.league == league) out.push_back(s.sample->blended);
  };
  if (level == Level::Team) {
    for (const auto& [id, tl] : store.teams) take(tl);
  } else {
    if (!position) throw Error(ErrorCode::InvalidArgument, "team-position level needs a position");
    for (const auto& [id, tl] : store.team_positions) {
      if (id.second == *position) take(tl);
    }
  }
  return out;
}

MetricVector naive_league_expectation(const FeatureStore& store, const std::string& league,
                                      Level level, std::optional<Position> position, Date date) {
  const auto values = league_values(store, league, level, position, date);
  if (values.empty()) {
    throw Error(ErrorCode::EmptyLeague, "no observed entities in league " + league + " before " +
                                            date.to_string());
  }
  MetricVector out;
  for (std::size_t j = 0; j < kMetricCount; ++j) out[j] = median(column(values, j));
  return out;
}

double naive_league_expectation(const FeatureStore& store, const std::string& league,
                                Metric metric, Level level, std::optional<Position> position,
                                Date date) {
  return naive_league_expectation(store, league, level, position, date)[metric];
}

double relative_feature_value(double value, std::span<const double> distribution) {
  if (distribution.size() < 2) return 0.0;
  std::vector<double> d(distribution.begin(), distribution.end());
  const double iqr = quantile(d, 0.75) - quantile(d, 0.25);
  if (!(iqr > 0.0)) return 0.0;
  return (value - median(std::move(d))) / iqr;
}

TeamAdjustmentModel fit_team_adjustment(std::span<const TeamAdjustmentRow> rows) {
  if (rows.size() < 3) {
    throw Error(ErrorCode::InsufficientData,
                "team adjustment needs at least 3 rows, got " + std::to_string(rows.size()));
  }
  TeamAdjustmentModel model;
  model.n = rows.size();
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    linalg::Matrix design(rows.size(), 2);
    std::vector<double> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      design(i, 0) = 1.0;
      design(i, 1) = rows[i].relative[j];
      y[i] = rows[i].target[j] - rows[i].offset[j];
    }
    try {
      const auto fit = linalg::ols(design, y);
      model.alpha[j] = fit.coefficients[0];
      model.beta[j] = fit.coefficients[1];
      model.residual_variance[j] = fit.residual_variance;
    } catch (const Error& e) {
      throw Error(e.code(), std::string("team adjustment, ") + std::string(kMetricNames[j]) +
                                ": " + e.what());
    }
  }
  model.fitted = true;
  return model;
}

double predict_team_prior(const TeamAdjustmentModel& model, Metric metric, double offset,
                          double relative) {
  if (!model.fitted) throw Error(ErrorCode::UnfittedModel, "team adjustment model is not fitted");
  const auto j = static_cast<std::size_t>(metric);
  return std::max(0.0, offset + model.alpha[j] + model.beta[j] * relative);
}

MetricVector predict_team_prior(const TeamAdjustmentModel& model, const MetricVector& offset,
                                const MetricVector& relative) {
  MetricVector out;
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    out[j] = predict_team_prior(model, static_cast<Metric>(j), offset[j], relative[j]);
  }
  return out;
}

std::map<Position, MetricVector> adjust_team_positions(
    const MetricVector& team_old, const MetricVector& team_new,
    const std::map<Position, MetricVector>& positions) {
  std::map<Position, MetricVector> out;
  for (const auto& [pos, v] : positions) {
    MetricVector scaled;
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      if (team_old[j] == 0.0) {
        if (v[j] != 0.0) {
          throw Error(ErrorCode::ZeroDenominator,
                      "team value for " + std::string(kMetricNames[j]) + " is zero");
        }
        scaled[j] = 0.0;
      } else {
        scaled[j] = v[j] * team_new[j] / team_old[j];
      }
    }
    out.emplace(pos, scaled);
  }
  return out;
}

std::array<double, kPlayerCoefficients> player_regressors(double x1, double x2, double x3,
                                                          double x4) {
  return {1.0, x1, x2, x3, x4, x4 * x4, x4 * x4 * x4};
}

PlayerAdjustmentModel fit_player_adjustment(std::span<const PlayerAdjustmentRow> rows) {
  if (rows.size() < 10) {
    throw Error(ErrorCode::InsufficientData,
                "player adjustment needs at least 10 rows, got " + std::to_string(rows.size()));
  }
  PlayerAdjustmentModel model;
  model.n = rows.size();
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    linalg::Matrix design(rows.size(), kPlayerCoefficients);
    std::vector<double> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const auto x = player_regressors(r.previous[j], r.new_team_position[j],
                                       r.team_position_diff[j], r.ability_change);
      std::copy(x.begin(), x.end(), design.row(i).begin());
      y[i] = r.target[j];
    }
    try {
      const auto fit = linalg::ols(design, y);
      std::copy(fit.coefficients.begin(), fit.coefficients.end(), model.coefficients[j].begin());
      model.residual_variance[j] = fit.residual_variance;
    } catch (const Error& e) {
      throw Error(e.code(), std::string("player adjustment, ") + std::string(kMetricNames[j]) +
                                ": " + e.what());
    }
  }
  model.fitted = true;
  return model;
}

double predict_player_prior(const PlayerAdjustmentModel& model, Metric metric, double x1, double x2,
                            double x3, double x4) {
  if (!model.fitted) {
    throw Error(ErrorCode::UnfittedModel, "player adjustment model is not fitted");
  }
  const auto& b = model.coefficients[static_cast<std::size_t>(metric)];
  const auto x = player_regressors(x1, x2, x3, x4);
  double y = 0.0;
  for (std::size_t k = 0; k < kPlayerCoefficients; ++k) y += b[k] * x[k];
  return std::max(0.0, y);
}

MetricVector predict_player_prior(const PlayerAdjustmentModel& model, const MetricVector& x1,
                                  const MetricVector& x2, const MetricVector& x3, double x4) {
  MetricVector out;
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    out[j] = predict_player_prior(model, static_cast<Metric>(j), x1[j], x2[j], x3[j], x4);
  }
  return out;
}

double relative_ability(const ratings::PowerRankingSnapshot& snap, const std::string& team,
                        const std::string& league) {
  try {
    return snap.relative_ability(team, league);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyLeague) throw;
    return snap.relative_ability(team);
  }
}

double ability_change(const ratings::PowerRankingSnapshot& snap, const std::string& old_team,
                      const std::string& old_league, const std::string& new_team,
                      const std::string& new_league) {
  return relative_ability(snap, new_team, new_league) -
         relative_ability(snap, old_team, old_league);
}

std::optional<MetricVector> context_value(const FeatureTimeline& tl, const std::string& league,
                                          Date date) {
  const SampleRef s = tl.before(date);
  if (s && s.epoch->context.league == league) return s.sample->blended;
  for (auto it = tl.epochs().rbegin(); it != tl.epochs().rend(); ++it) {
    if (it->context.league == league && it->opened <= date &&
        (!s || it->opened > s.sample->date)) {
      return it->prior;
    }
  }
  return std::nullopt;
}

std::vector<TeamAdjustmentRow> build_team_rows(const FeatureStore& store) {
  std::vector<TeamAdjustmentRow> rows;
  for (const auto& [id, tl] : store.teams) {
    const auto& epochs = tl.epochs();
    for (std::size_t e = 1; e < epochs.size(); ++e) {
      const auto& prev = epochs[e - 1];
      const auto& cur = epochs[e];
      if (prev.samples.empty()) continue;
      const features::Sample* settled = first_settled(cur);
      if (!settled) continue;
      const auto offset = naive_or_none(store, cur.context.league, Level::Team, std::nullopt,
                                        cur.opened);
      if (!offset) continue;
      const auto dist =
          league_values(store, prev.context.league, Level::Team, std::nullopt, cur.opened);
      rows.push_back({id, cur.opened, settled->raw, *offset,
                      relative_vector(prev.samples.back().blended, dist)});
    }
  }
  return rows;
}

std::vector<PlayerAdjustmentRow> build_player_rows(const FeatureStore& store,
                                                   const ratings::RatingHistory& history) {
  std::vector<PlayerAdjustmentRow> rows;
  for (const auto& [id, tl] : store.players) {
    const Position pos = id.second;
    const auto& epochs = tl.epochs();
    for (std::size_t e = 1; e < epochs.size(); ++e) {
      const auto& prev = epochs[e - 1];
      const auto& cur = epochs[e];
      if (prev.samples.empty()) continue;
      const features::Sample* settled = first_settled(cur);
      if (!settled) continue;
      const auto* tp_new = store.team_position(cur.context.team, pos);
      const auto* tp_old = store.team_position(prev.context.team, pos);
      if (!tp_new || !tp_old) continue;
      const auto x2 = context_value(*tp_new, cur.context.league, cur.opened);
      const auto old = context_value(*tp_old, prev.context.league, cur.opened);
      if (!x2 || !old) continue;
      const auto& snap = history.before(cur.opened);
      const double x4 = ability_change(snap, prev.context.team, prev.context.league,
                                       cur.context.team, cur.context.league);
      rows.push_back({id.first, pos, cur.opened, settled->raw, prev.samples.back().blended, *x2,
                      *x2 - *old, x4});
    }
  }
  return rows;
}

AdjustmentModels fit_adjustments(const FeatureStore& store, const ratings::RatingHistory& history) {
  AdjustmentModels out;
  const auto team_rows = build_team_rows(store);
  const auto player_rows = build_player_rows(store, history);
  out.team_rows = team_rows.size();
  out.player_rows = player_rows.size();
  auto soft = [](auto&& fit) {
    try {
      fit();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientData && e.code() != ErrorCode::SingularDesign) throw;
    }
  };
  soft([&] { out.team = fit_team_adjustment(team_rows); });
  soft([&] { out.player = fit_player_adjustment(player_rows); });
  return out;
}

std::string to_json(const AdjustmentModels& m) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["team"]["fitted"] = m.team.fitted;
  j["team"]["n"] = m.team.n;
  j["team"]["rows"] = m.team_rows;
  j["team"]["alpha"] = array_json(m.team.alpha);
  j["team"]["beta"] = array_json(m.team.beta);
  j["team"]["residual_variance"] = array_json(m.team.residual_variance);
  j["player"]["fitted"] = m.player.fitted;
  j["player"]["n"] = m.player.n;
  j["player"]["rows"] = m.player_rows;
  nlohmann::json coef = nlohmann::json::array();
  for (const auto& c : m.player.coefficients) coef.push_back(std::vector<double>(c.begin(), c.end()));
  j["player"]["coefficients"] = coef;
  j["player"]["residual_variance"] = array_json(m.player.residual_variance);
  return j.dump(2);
}

AdjustmentModels adjustment_models_from_json(std::string_view text) {
  AdjustmentModels m;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw Error(ErrorCode::InvalidArgument, "unsupported adjustment schema version");
    }
    const auto& t = j.at("team");
    m.team.fitted = t.at("fitted").get<bool>();
    m.team.n = t.at("n").get<std::size_t>();
    m.team_rows = t.value("rows", std::size_t{0});
    read_array(t.at("alpha"), m.team.alpha);
    read_array(t.at("beta"), m.team.beta);
    read_array(t.at("residual_variance"), m.team.residual_variance);
    const auto& p = j.at("player");
    m.player.fitted = p.at("fitted").get<bool>();
    m.player.n = p.at("n").get<std::size_t>();
    m.player_rows = p.value("rows", std::size_t{0});
    const auto& coef = p.at("coefficients");
    if (!coef.is_array() || coef.size() != kMetricCount) {
      throw Error(ErrorCode::InvalidArgument, "player coefficients must have 13 rows");
    }
    for (std::size_t r = 0; r < kMetricCount; ++r) {
      if (coef[r].size() != kPlayerCoefficients) {
        throw Error(ErrorCode::InvalidArgument, "player coefficient rows must have 7 values");
      }
      for (std::size_t k = 0; k < kPlayerCoefficients; ++k) {
        m.player.coefficients[r][k] = coef[r][k].get<double>();
      }
    }
    read_array(p.at("residual_variance"), m.player.residual_variance);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("adjustment file: ") + e.what());
  }
  return m;
}

MetricVector AdjustmentPriors::team_prior(const FeatureStore& store, const FeatureTimeline& tl,
                                          const Context& ctx, Date date) const {
  const auto naive = naive_or_none(store, ctx.league, Level::Team, std::nullopt, date);
  const features::Epoch* prev = last_epoch_with_samples(tl);
  if (!prev) return naive.value_or(MetricVector{});
  const MetricVector& old_value = prev->samples.back().blended;
  const MetricVector offset = naive.value_or(old_value);
  if (!models_.team.fitted) return offset;
  const auto dist = league_values(store, prev->context.league, Level::Team, std::nullopt, date);
  return predict_team_prior(models_.team, offset, relative_vector(old_value, dist));
}

MetricVector AdjustmentPriors::team_position_prior(const FeatureStore& store,
                                                   const FeatureTimeline& tl, const Context& ctx,
                                                   Date date) const {
  const Position pos = *tl.position();
  const auto naive = naive_or_none(store, ctx.league, Level::TeamPosition, pos, date);
  const features::Epoch* prev = last_epoch_with_samples(tl);
  const FeatureTimeline* team = store.team(ctx.team);
  if (prev && team && team->epochs().size() >= 2) {
    // Carry the team's own league change through to each position slot.
    const auto& team_new = team->epochs().back();
    const features::Epoch* team_old = nullptr;
    for (auto it = std::next(team->epochs().rbegin()); it != team->epochs().rend(); ++it) {
      if (!it->samples.empty()) {
        team_old = &*it;
        break;
      }
    }
    if (team_new.context.league == ctx.league && team_old &&
        team_old->context.league == prev->context.league) {
      try {
        const auto scaled = adjust_team_positions(team_old->samples.back().blended,
                                                  team_new.prior,
                                                  {{pos, prev->samples.back().blended}});
        return scaled.at(pos);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroDenominator) throw;
      }
    }
  }
  if (naive) return *naive;
  if (prev) return prev->samples.back().blended;
  return {};
}

MetricVector AdjustmentPriors::player_prior(const FeatureStore& store, const FeatureTimeline& tl,
                                            const Context& ctx, Date date) const {
  const Position pos = *tl.position();
  std::optional<MetricVector> x2;
  if (const auto* tp = store.team_position(ctx.team, pos)) x2 = context_value(*tp, ctx.league, date);
  if (!x2) x2 = naive_or_none(store, ctx.league, Level::TeamPosition, pos, date);
  const features::Epoch* prev = last_epoch_with_samples(tl);
  if (!models_.player.fitted || !prev || !x2) {
    if (x2) return *x2;
    return prev ? prev->samples.back().blended : MetricVector{};
  }
  std::optional<MetricVector> old;
  if (const auto* tp = store.team_position(prev->context.team, pos)) {
    old = context_value(*tp, prev->context.league, date);
  }
  const MetricVector x3 = old ? *x2 - *old : MetricVector{};
  const double x4 = history_.empty()
                        ? 0.0
                        : ability_change(history_.before(date), prev->context.team,
                                         prev->context.league, ctx.team, ctx.league);
  return predict_player_prior(models_.player, prev->samples.back().blended, *x2, x3, x4);
}

}  // namespace tportal::adjust
