// Acceptance gate: one PASS/FAIL line per criterion, every tolerance pinned
// below. Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracle.hpp"
#include "support.hpp"
#include "tportal/adjustments.hpp"
#include "tportal/config.hpp"
#include "tportal/error.hpp"
#include "tportal/features.hpp"
#include "tportal/pipeline.hpp"
#include "tportal/predictor.hpp"
#include "tportal/ratings.hpp"
#include "tportal/recruitment.hpp"
#include "tportal/synthworld.hpp"

namespace fs = std::filesystem;
using namespace tportal;

namespace tol {
constexpr double kBlend = 1e-12;
constexpr double kBlendSeconds = 1.0;
constexpr double kEloZeroSum = 1e-9;
constexpr double kEloShift = 1e-9;
constexpr double kScaleEnds = 1e-12;
constexpr double kEloSeconds = 10.0;
constexpr double kProportional = 1e-12;
constexpr double kOracleAgreement = 1e-8;
constexpr double kStandardErrors = 3.0;
// Planted coefficients outside the SE bound across all 117 noisy ones; at the
// nominal 0.27% rate P(>= 4 misses) is about 4e-4.
constexpr std::size_t kCoverageMisses = 3;
constexpr double kNoiseless = 1e-8;
constexpr double kFitSeconds = 30.0;
constexpr double kGradient = 1e-4;
constexpr double kGradientSeconds = 60.0;
constexpr double kTransferGain = 0.30;
constexpr double kEndToEndSeconds = 15 * 60.0;
constexpr double kScoreScale = 1e-12;
}  // namespace tol

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %d  %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome blend_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> value(0.0, 20.0), minutes(0.0, 3000.0), c(1.0, 2000.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    MetricVector p, r;
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      p[j] = value(rng);
      r[j] = value(rng);
    }
    // boundary tuples: m = 0, m = c and m > c appear deterministically
    const double cc = c(rng);
    const double m = i % 10 == 0 ? 0.0 : i % 10 == 1 ? cc : minutes(rng);
    const auto b = features::blend(p, r, m, cc);
    const double w = m >= cc ? 1.0 : m / cc;
    worst = std::max(worst, std::abs(b.weight - w));
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      const double x = (1.0 - w) * p[j] + w * r[j];
      worst = std::max(worst, std::abs(b.blended[j] - x) / std::max(1.0, std::abs(x)));
    }
  }
  const double s = seconds_since(t0);
  return {worst <= tol::kBlend && s < tol::kBlendSeconds,
          fmt("max err %.2e (tol %.0e), %.3f s", worst, tol::kBlend, s)};
}

// ---------------------------------------------------------------- 2

struct EloWorld {
  std::vector<ratings::LeagueInfo> leagues;
  std::map<std::string, std::string> team_league;
  std::vector<std::string> teams;
  std::vector<ratings::MatchResult> matches;
};

EloWorld elo_world() {
  EloWorld w;
  for (int c = 1; c <= 2; ++c) {
    for (int n = 1; n <= 2; ++n) {
      for (int d = 1; d <= 2; ++d) {
        const std::string country = "C" + std::to_string(c) + "N" + std::to_string(n);
        const std::string league = country + "D" + std::to_string(d);
        w.leagues.push_back({league, country, "C" + std::to_string(c)});
        for (int t = 0; t < 6; ++t) {
          const std::string team = league + "T" + std::to_string(t);
          w.team_league[team] = league;
          w.teams.push_back(team);
        }
      }
    }
  }
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> pick(0, w.teams.size() - 1);
  std::uniform_int_distribution<int> outcome(0, 2);
  const Date start = Date::parse("2020-01-01");
  for (int i = 0; i < 5000; ++i) {
    std::size_t a = pick(rng), b = pick(rng);
    while (b == a) b = pick(rng);
    w.matches.push_back({w.teams[a], w.teams[b], static_cast<ratings::Outcome>(outcome(rng)),
                         start + i / 5});
  }
  return w;
}

ratings::RatingHierarchy fresh(const EloWorld& w) {
  ratings::RatingHierarchy h;
  for (const auto& l : w.leagues) h.add_league(l);
  for (const auto& t : w.teams) h.register_team(t, w.team_league.at(t), Date::parse("2019-12-31"));
  return h;
}

/// Level at which two teams' ancestries first differ, or nothing for the same league.
std::optional<ratings::Level> divergence(const EloWorld& w, const std::string& a, const std::string& b) {
  const auto& la = w.team_league.at(a);
  const auto& lb = w.team_league.at(b);
  if (la == lb) return std::nullopt;
  const auto info = [&](const std::string& l) {
    return *std::find_if(w.leagues.begin(), w.leagues.end(), [&](auto& x) { return x.league_id == l; });
  };
  const auto ia = info(la), ib = info(lb);
  if (ia.country == ib.country) return ratings::Level::League;
  if (ia.continent == ib.continent) return ratings::Level::Country;
  return ratings::Level::Continent;
}

Outcome elo_invariants() {
  const auto t0 = Clock::now();
  const EloWorld w = elo_world();
  auto h = fresh(w);

  std::vector<std::pair<ratings::Level, std::string>> group_nodes;
  std::set<std::string> seen;
  for (const auto& l : w.leagues) {
    group_nodes.emplace_back(ratings::Level::League, l.league_id);
    if (seen.insert(l.country).second) group_nodes.emplace_back(ratings::Level::Country, l.country);
    if (seen.insert(l.continent).second) group_nodes.emplace_back(ratings::Level::Continent, l.continent);
  }
  auto group_state = [&] {
    std::vector<double> v;
    for (const auto& [lvl, id] : group_nodes) v.push_back(h.node(lvl, id).elo);
    return v;
  };

  double zero_sum = 0.0;
  std::size_t level_errors = 0, cross = 0, scale_errors = 0, rank_errors = 0, days = 0;
  for (std::size_t i = 0; i < w.matches.size(); ++i) {
    const auto& m = w.matches[i];
    const auto before = group_state();
    const auto u = h.apply_match(m);
    const auto after = group_state();
    zero_sum = std::max({zero_sum, std::abs(u.home_team_delta + u.away_team_delta),
                         std::abs(u.home_group_delta + u.away_group_delta)});
    const auto expect = divergence(w, m.home, m.away);
    std::set<ratings::Level> changed;
    for (std::size_t k = 0; k < group_nodes.size(); ++k) {
      if (after[k] != before[k]) changed.insert(group_nodes[k].first);
    }
    if (expect) {
      ++cross;
      // a draw between equal sides can leave everything unchanged; otherwise exactly one level moves
      const bool still = u.home_group_delta == 0.0 && changed.empty();
      if (!still && (changed.size() != 1 || *changed.begin() != *expect)) ++level_errors;
      if (u.group_level != expect) ++level_errors;
    } else if (!changed.empty() || u.group_level) {
      ++level_errors;
    }

    const bool day_end = i + 1 == w.matches.size() || w.matches[i + 1].date != m.date;
    if (!day_end) continue;
    ++days;
    const auto snap = ratings::scale_daily(h, m.date);
    double lo = 1e300, hi = -1e300;
    for (const auto& [t, s] : snap.scores) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      const double raw = h.node(ratings::Level::Team, t).elo +
                         h.node(ratings::Level::League, w.team_league.at(t)).elo +
                         [&] {
                           const auto& l = *std::find_if(w.leagues.begin(), w.leagues.end(), [&](auto& x) {
                             return x.league_id == w.team_league.at(t);
                           });
                           return h.node(ratings::Level::Country, l.country).elo +
                                  h.node(ratings::Level::Continent, l.continent).elo;
                         }();
      if (std::abs(raw - snap.raw_of(t)) > 1e-9) ++rank_errors;
    }
    if (std::abs(lo) > tol::kScaleEnds || std::abs(hi - 100.0) > tol::kScaleEnds) ++scale_errors;
    for (const auto& [a, ra] : snap.raw) {
      for (const auto& [b, rb] : snap.raw) {
        if (ra < rb && !(snap.scores.at(a) < snap.scores.at(b))) ++rank_errors;
      }
    }
  }

  // constant shift at each level leaves every update and every scaled score unchanged
  double shift_err = 0.0;
  for (auto level : {ratings::Level::Continent, ratings::Level::Country, ratings::Level::League,
                     ratings::Level::Team}) {
    auto a = fresh(w), b = fresh(w);
    b.shift_level(level, 137.25);
    for (std::size_t i = 0; i < w.matches.size(); ++i) {
      const auto ua = a.apply_match(w.matches[i]);
      const auto ub = b.apply_match(w.matches[i]);
      shift_err = std::max({shift_err, std::abs(ua.home_team_delta - ub.home_team_delta),
                            std::abs(ua.home_group_delta - ub.home_group_delta),
                            std::abs(ua.expected_home - ub.expected_home)});
      if (i % 50 == 49) {
        const auto sa = ratings::scale_daily(a, w.matches[i].date);
        const auto sb = ratings::scale_daily(b, w.matches[i].date);
        for (const auto& [t, s] : sa.scores) shift_err = std::max(shift_err, std::abs(s - sb.scores.at(t)));
      }
    }
  }

  const double s = seconds_since(t0);
  const bool ok = zero_sum <= tol::kEloZeroSum && level_errors == 0 && scale_errors == 0 &&
                  rank_errors == 0 && shift_err <= tol::kEloShift && cross > 1000 &&
                  s < tol::kEloSeconds;
  std::ostringstream d;
  d << "5000 matches (" << cross << " cross-group), " << days << " days; zero-sum "
    << fmt("%.1e", zero_sum) << ", level errors " << level_errors << ", scale errors " << scale_errors
    << ", rank errors " << rank_errors << ", shift " << fmt("%.1e", shift_err) << ", "
    << fmt("%.2f s", s);
  return {ok, d.str()};
}

// ---------------------------------------------------------------- 3

Outcome proportional_adjustment() {
  MetricVector old_team, new_team, st, cb;
  old_team[Metric::Xg] = 1.5;
  new_team[Metric::Xg] = 0.9;
  st[Metric::Xg] = 1.0;
  cb[Metric::Xg] = 0.05;
  const auto out = adjust::adjust_team_positions(old_team, new_team, {{Position::ST, st}, {Position::CB, cb}});
  const double st_new = out.at(Position::ST)[Metric::Xg];
  const double cb_new = out.at(Position::CB)[Metric::Xg];
  bool ok = std::abs(st_new - 0.6) <= tol::kProportional && std::abs(cb_new - 0.03) <= tol::kProportional;

  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    MetricVector o, n;
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      o[j] = u(rng);
      n[j] = u(rng);
    }
    std::map<Position, MetricVector> pos;
    for (std::size_t p = 0; p < kPositionCount; ++p) {
      MetricVector v;
      for (std::size_t j = 0; j < kMetricCount; ++j) v[j] = u(rng);
      pos[static_cast<Position>(p)] = v;
    }
    const auto got = adjust::adjust_team_positions(o, n, pos);
    for (const auto& [p, v] : pos) {
      for (std::size_t j = 0; j < kMetricCount; ++j) {
        const double want = v[j] * n[j] / o[j];
        worst = std::max(worst, std::abs(got.at(p)[j] - want) / std::max(1.0, std::abs(want)));
      }
    }
  }
  ok = ok && worst <= tol::kProportional;
  return {ok, fmt("ST %.15g, CB %.15g; 1000 random max err %.1e (tol %.0e)", st_new, cb_new, worst,
                  tol::kProportional)};
}

// ---------------------------------------------------------------- 4

struct FitCheck {
  double oracle_gap = 0.0;          // relative distance to the oracle coefficients
  double oracle_z = 0.0;            // |fit - oracle| / SE
  double planted_z = 0.0;           // |fit - planted| / SE (or absolute error when noiseless)
  std::size_t planted_outside = 0;  // planted coefficients beyond the SE bound
  std::size_t coefficients = 0;
};

void compare(FitCheck& c, const Eigen::VectorXd& fit, const testing::OracleFit& oracle,
             const Eigen::VectorXd& planted, bool noiseless) {
  for (Eigen::Index k = 0; k < fit.size(); ++k) {
    c.oracle_gap = std::max(c.oracle_gap, std::abs(fit[k] - oracle.beta[k]) / (1.0 + std::abs(oracle.beta[k])));
    ++c.coefficients;
    if (noiseless) {
      if (std::abs(fit[k] - planted[k]) > tol::kNoiseless * (1.0 + std::abs(planted[k]))) ++c.planted_outside;
      c.planted_z = std::max(c.planted_z, std::abs(fit[k] - planted[k]));
    } else {
      const double se = oracle.standard_error[k];
      c.oracle_z = std::max(c.oracle_z, std::abs(fit[k] - oracle.beta[k]) / se);
      const double z = std::abs(fit[k] - planted[k]) / se;
      c.planted_z = std::max(c.planted_z, z);
      if (z > tol::kStandardErrors) ++c.planted_outside;
    }
  }
}

FitCheck team_fit(std::size_t n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::array<double, kMetricCount> alpha{}, beta{};
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    alpha[j] = 0.3 * g(rng);
    beta[j] = 0.2 * g(rng);
  }
  std::vector<adjust::TeamAdjustmentRow> rows(n);
  for (auto& r : rows) {
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      r.offset[j] = u(rng);
      r.relative[j] = g(rng);
      r.target[j] = r.offset[j] + alpha[j] + beta[j] * r.relative[j] + sigma * g(rng);
    }
  }
  const auto model = adjust::fit_team_adjustment(rows);
  FitCheck c;
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      x(i, 1) = rows[i].relative[j];
      y[i] = rows[i].target[j] - rows[i].offset[j];
    }
    const auto oracle = testing::oracle_ols(x, y);
    compare(c, Eigen::Vector2d(model.alpha[j], model.beta[j]), oracle,
            Eigen::Vector2d(alpha[j], beta[j]), sigma == 0.0);
  }
  return c;
}

FitCheck player_fit(std::size_t n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::array<std::array<double, adjust::kPlayerCoefficients>, kMetricCount> b{};
  for (auto& row : b) {
    row = {0.2 * g(rng), 0.5 + 0.2 * g(rng), 0.3 + 0.2 * g(rng), 0.2 * g(rng),
           0.02 * g(rng), 0.001 * g(rng), 0.0001 * g(rng)};
  }
  std::vector<adjust::PlayerAdjustmentRow> rows(n);
  for (auto& r : rows) {
    r.ability_change = 15.0 * g(rng);  // 0-100 scale differences
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      r.previous[j] = u(rng);
      r.new_team_position[j] = u(rng);
      r.team_position_diff[j] = 0.5 * g(rng);
      const auto reg = adjust::player_regressors(r.previous[j], r.new_team_position[j],
                                                 r.team_position_diff[j], r.ability_change);
      double y = sigma * g(rng);
      for (std::size_t k = 0; k < reg.size(); ++k) y += b[j][k] * reg[k];
      r.target[j] = y;
    }
  }
  const auto model = adjust::fit_player_adjustment(rows);
  FitCheck c;
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    Eigen::MatrixXd x(n, adjust::kPlayerCoefficients);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = rows[i];
      const double a = r.ability_change;
      const double regs[] = {1.0, r.previous[j], r.new_team_position[j], r.team_position_diff[j],
                             a, a * a, a * a * a};
      for (std::size_t k = 0; k < adjust::kPlayerCoefficients; ++k) x(i, k) = regs[k];
      y[i] = r.target[j];
    }
    const auto oracle = testing::oracle_ols(x, y);
    Eigen::VectorXd fit(adjust::kPlayerCoefficients), planted(adjust::kPlayerCoefficients);
    for (std::size_t k = 0; k < adjust::kPlayerCoefficients; ++k) {
      fit[k] = model.coefficients[j][k];
      planted[k] = b[j][k];
    }
    compare(c, fit, oracle, planted, sigma == 0.0);
  }
  return c;
}

Outcome adjustment_fits() {
  const auto t0 = Clock::now();
  const auto team = team_fit(2000, 0.1, 404);
  const auto player = player_fit(5000, 0.1, 405);
  const auto team0 = team_fit(2000, 0.0, 406);
  const auto player0 = player_fit(5000, 0.0, 407);
  const double s = seconds_since(t0);
  const double gap = std::max({team.oracle_gap, player.oracle_gap, team0.oracle_gap, player0.oracle_gap});
  const double oracle_z = std::max(team.oracle_z, player.oracle_z);
  const std::size_t coefficients = team.coefficients + player.coefficients;
  const std::size_t outside = team.planted_outside + player.planted_outside;
  const bool ok = oracle_z <= tol::kStandardErrors && outside <= tol::kCoverageMisses &&
                  team0.planted_outside == 0 && player0.planted_outside == 0 &&
                  gap <= tol::kOracleAgreement && s < tol::kFitSeconds;
  std::ostringstream d;
  d << "fit vs oracle max " << fmt("%.1e SE", oracle_z) << " (gap " << fmt("%.1e", gap) << "); planted: "
    << outside << " of " << coefficients << " beyond " << tol::kStandardErrors << " SE (allowed "
    << tol::kCoverageMisses << ", max " << fmt("%.2f", std::max(team.planted_z, player.planted_z))
    << "); noiseless max err " << fmt("%.1e", std::max(team0.planted_z, player0.planted_z)) << "; "
    << fmt("%.2f s", s);
  return {ok, d.str()};
}

// ---------------------------------------------------------------- 5

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  std::ostringstream d;
  double worst = 0.0;
  std::uint64_t seed = 500;
  const predictor::HyperParams hp;  // default trunk and head widths
  for (auto g : predictor::kGroups) {
    const nn::Architecture arch{predictor::input_indices(g).size(), hp.trunk, hp.head,
                                predictor::targets_of(g).size()};
    const auto r = testing::gradient_check(arch, 100, ++seed);
    worst = std::max(worst, r.max_relative_error);
    d << predictor::to_string(g) << ' ' << fmt("%.1e", r.max_relative_error) << " (" << r.rejected
      << " rejected), ";
  }
  const double s = seconds_since(t0);
  d << "tol " << fmt("%.0e", tol::kGradient) << ", " << fmt("%.2f s", s);
  return {worst < tol::kGradient && s < tol::kGradientSeconds, d.str()};
}

// ---------------------------------------------------------------- 6

Outcome end_to_end() {
  const auto t0 = Clock::now();
  const Config cfg = Config::load(fs::path(TPORTAL_SOURCE_DIR) / "config" / "default.json");
  const auto world = synth::generate(cfg.world);
  const auto history = ratings::replay(world.corpus, world.topology, cfg.elo).history;
  const auto stages = pipeline::build_feature_stages(world.corpus, history, cfg);
  auto examples = predictor::build_examples(stages.store, history, cfg.examples);
  const std::size_t transfers = static_cast<std::size_t>(
      std::count_if(examples.begin(), examples.end(), [](const auto& e) { return e.is_transfer; }));
  const auto trained = pipeline::train(std::move(examples), cfg, cfg.seed);
  const auto& test = trained.split.test;
  const auto e = predictor::evaluate(trained.model, test);
  const double tr = e.mean_improvement(predictor::Split::Transfer);
  const double non = e.mean_improvement(predictor::Split::NonTransfer);

  // the same predictions scored against the generating law
  std::vector<predictor::TransferScenario> scenarios;
  std::vector<MetricVector> pred, base;
  std::vector<char> flags;
  for (const auto& ex : test) {
    scenarios.push_back(ex.scenario);
    pred.push_back(predictor::predict_metrics(trained.model, ex.input));
    base.push_back(ex.baseline);
    flags.push_back(ex.is_transfer);
  }
  const auto mu = synth::oracle_targets(world.truth, scenarios);
  std::unique_ptr<bool[]> is_transfer(new bool[flags.size()]);
  for (std::size_t i = 0; i < flags.size(); ++i) is_transfer[i] = flags[i] != 0;
  const auto oe = predictor::evaluate(pred, base, mu, std::span<const bool>(is_transfer.get(), flags.size()));
  const double oracle_tr = oe.mean_improvement(predictor::Split::Transfer);

  const double s = seconds_since(t0);
  const bool ok = world.topology.leagues().size() >= 8 && transfers >= 2000 &&
                  cfg.world.multiplier_max >= 2.0 && cfg.world.kappa > 0.0 &&
                  tr >= tol::kTransferGain && tr > non && s < tol::kEndToEndSeconds;
  std::ostringstream d;
  d << world.topology.leagues().size() << " leagues, " << transfers << " transfer scenarios, "
    << test.size() << " held out (" << e.count(predictor::Split::Transfer) << " transfers); "
    << fmt("transfer %.1f%% vs non-transfer %.1f%% (need >= %.0f%%); vs law %.1f%%; ", 100 * tr,
           100 * non, 100 * tol::kTransferGain, 100 * oracle_tr)
    << fmt("%.0f s", s);
  return {ok, d.str()};
}

// ---------------------------------------------------------------- 7

std::vector<std::size_t> ranking(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  return order;
}

Outcome shortlist_properties() {
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::lognormal_distribution<double> value(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(2, 60), metric(0, kMetricCount - 1);

  auto random_profile = [&] {
    recruit::WeightProfile w;
    for (auto& x : w.weights) x = u(rng) < 0.3 ? 0.0 : u(rng);
    w.weights[metric(rng)] = 0.05 + 0.95 * u(rng);
    return w;
  };
  auto random_predictions = [&] {
    std::vector<MetricVector> p(size(rng));
    for (auto& v : p) {
      for (std::size_t j = 0; j < kMetricCount; ++j) v[j] = value(rng);
    }
    return p;
  };

  std::size_t range = 0, invariance = 0, monotone = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto w = random_profile();
    auto p = random_predictions();
    const auto s = recruit::score(p, w);
    for (double x : s) range += !(x >= 0.0 && x <= 1.0);

    auto scaled = w;
    const double c = 0.01 + 0.99 * u(rng);
    for (auto& x : scaled.weights) x *= c;
    const auto s2 = recruit::score(p, scaled);
    bool same = ranking(s) == ranking(s2);
    for (std::size_t i = 0; i < s.size(); ++i) same = same && std::abs(s[i] - s2[i]) <= tol::kScoreScale;
    invariance += !same;

    // raise one candidate on one weighted metric
    std::size_t j = metric(rng);
    while (w.weights[j] == 0.0) j = metric(rng);
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng);
    const auto r0 = ranking(s);
    const auto rank_before = std::find(r0.begin(), r0.end(), i) - r0.begin();
    p[i][j] += value(rng);
    const auto s3 = recruit::score(p, w);
    const auto r3 = ranking(s3);
    const auto rank_after = std::find(r3.begin(), r3.end(), i) - r3.begin();
    monotone += !(s3[i] >= s[i] - 1e-15 && rank_after <= rank_before);
  }

  // filter soundness on a trained synthetic world
  const auto& tw = testing::trained_world();
  const auto& st = *tw.state;
  const auto src = st.sources();
  std::vector<std::string> teams, leagues;
  for (const auto& [t, _] : st.store.teams) teams.push_back(t);
  for (const auto& [l, _] : st.topology.leagues()) leagues.push_back(l);
  const auto& snap = st.history.before(st.as_of);
  std::size_t trials = 0, empty = 0, entries = 0, violations = 0;
  const std::array<Position, 4> outfield{Position::W, Position::ST, Position::CM, Position::FB};
  while (trials < 1000) {
    recruit::ShortlistRequest req;
    req.destination_team = teams[std::uniform_int_distribution<std::size_t>(0, teams.size() - 1)(rng)];
    req.position = outfield[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
    req.weights = random_profile();
    req.k = 1 + std::uniform_int_distribution<std::size_t>(0, 14)(rng);
    req.date = st.as_of;
    auto& f = req.filters;
    if (u(rng) < 0.5) f.max_age = 18.0 + 16.0 * u(rng);
    if (u(rng) < 0.5) f.max_value = 5e5 + 2e7 * u(rng);
    if (u(rng) < 0.5) f.min_position_minutes = 3000.0 * u(rng);
    if (u(rng) < 0.3) {
      for (std::size_t p = 0; p < kPositionCount; ++p) {
        if (u(rng) < 0.5) f.allowed_positions.push_back(static_cast<Position>(p));
      }
    }
    if (u(rng) < 0.3) {
      for (const auto& l : leagues) {
        if (u(rng) < 0.5) f.allowed_leagues.push_back(l);
      }
    }
    if (u(rng) < 0.5) f.max_team_rating = 100.0 * u(rng);
    if (u(rng) < 0.3) f.max_team_raw_rating = 1350.0 + 300.0 * u(rng);
    ++trials;
    std::vector<recruit::ShortlistEntry> out;
    try {
      out = recruit::build_shortlist(req, src);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyAfterFilters) throw;
      ++empty;
      continue;
    }
    violations += out.size() > req.k;
    for (const auto& e : out) {
      ++entries;
      const auto* meta = st.metadata.find(e.player_id);
      const auto* tl = st.store.player(e.player_id, req.position);
      double minutes = 0.0;
      for (const auto& ep : tl->epochs()) {
        for (const auto& stint : ep.stints) {
          if (stint.date < req.date && req.date - stint.date <= 365) minutes += stint.minutes;
        }
      }
      const auto ctx = tl->before(req.date).epoch->context;
      bool ok = e.team == ctx.team && e.league == ctx.league && e.team != req.destination_team &&
                e.prediction.scenario.position == req.position;
      if (f.max_age) ok = ok && meta && recruit::age_years(meta->birth_date, req.date) < *f.max_age;
      if (f.max_value) ok = ok && meta && meta->value <= *f.max_value;
      if (f.min_position_minutes) ok = ok && minutes >= *f.min_position_minutes;
      if (!f.allowed_positions.empty()) {
        ok = ok && meta &&
             std::count(f.allowed_positions.begin(), f.allowed_positions.end(), meta->position);
      }
      if (!f.allowed_leagues.empty()) {
        ok = ok && std::count(f.allowed_leagues.begin(), f.allowed_leagues.end(), e.league);
      }
      if (f.max_team_rating) ok = ok && snap.score_of(e.team) <= *f.max_team_rating;
      if (f.max_team_raw_rating) ok = ok && snap.raw_of(e.team) <= *f.max_team_raw_rating;
      ok = ok && e.score >= 0.0 && e.score <= 1.0;
      violations += !ok;
    }
  }

  // the winger profile from config
  const auto profile = recruit::WeightProfile::from_json(
      read_file(fs::path(TPORTAL_SOURCE_DIR) / "config" / "winger_profile.json"));
  const std::map<Metric, double> table{{Metric::TakeOns, 1.0},
                                       {Metric::Xa, 1.0},
                                       {Metric::Xg, 0.7},
                                       {Metric::Crosses, 0.2},
                                       {Metric::PenAreaEntries, 0.2}};
  bool profile_ok = recruit::WeightProfile::from_json(profile.to_json()).weights == profile.weights;
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    const auto it = table.find(static_cast<Metric>(j));
    profile_ok = profile_ok && profile.weights[j] == (it == table.end() ? 0.0 : it->second);
  }

  const bool ok = range == 0 && invariance == 0 && monotone == 0 && violations == 0 && profile_ok &&
                  entries > 1000;
  std::ostringstream d;
  d << "1000 trials each: range " << range << ", scale " << invariance << ", monotone " << monotone
    << " failures; filters " << violations << " violations over " << entries << " entries ("
    << empty << " empty pools); winger profile " << (profile_ok ? "ok" : "MISMATCH");
  return {ok, d.str()};
}

// ---------------------------------------------------------------- 8

Outcome rag_thresholds() {
  const double c = 1000.0;
  auto r = [&](double m) { return features::rag_for(m, std::min(1.0, m / c)); };
  using features::RagStatus;

  // a single player with 450 minutes and one with a saturated window
  features::FeatureTimeline short_tl(features::EntityLevel::PlayerPosition, "p", Position::W, 1000, c);
  features::FeatureTimeline long_tl(features::EntityLevel::PlayerPosition, "q", Position::W, 1000, c);
  const features::PriorProvider zero = [](const auto&, const auto&, Date) { return MetricVector{}; };
  const features::Context ctx{"T", "L"};
  Date d = Date::parse("2021-01-01");
  for (int i = 0; i < 5; ++i) short_tl.advance({d + i * 7, 90.0, {}}, ctx, zero);
  for (int i = 0; i < 30; ++i) long_tl.advance({d + i * 7, 90.0, {}}, ctx, zero);
  const Date later = d + 400;

  const bool ok = features::rag(short_tl, later) == RagStatus::Red &&
                  features::rag(long_tl, later) == RagStatus::Green && r(450) == RagStatus::Red &&
                  r(499) == RagStatus::Red && r(500) == RagStatus::Amber &&
                  r(c - 1) == RagStatus::Amber && r(c) == RagStatus::Green;
  std::ostringstream o;
  o << "450 min " << features::to_string(features::rag(short_tl, later)) << ", saturated "
    << features::to_string(features::rag(long_tl, later)) << "; m=499 " << features::to_string(r(499))
    << ", 500 " << features::to_string(r(500)) << ", c-1 " << features::to_string(r(c - 1)) << ", c "
    << features::to_string(r(c));
  return {ok, o.str()};
}

// ---------------------------------------------------------------- 9

std::string quote(const std::string& s) { return "'" + s + "'"; }

Outcome cli_determinism() {
  const std::string cli = TPORTAL_CLI;
  const std::string cfg = (fs::path(TPORTAL_SOURCE_DIR) / "config" / "small_world.json").string();
  std::vector<std::string> evaluations;
  for (int run = 0; run < 2; ++run) {
    const auto dir = testing::temp_dir("acceptance_cli_" + std::to_string(run));
    for (const char* step : {"synth", "rate", "features", "fit-adjust", "train", "evaluate"}) {
      const std::string cmd = quote(cli) + " " + step + " --workdir " + quote(dir.string()) +
                              " --config " + quote(cfg) + " --seed 11 > " +
                              quote((dir / (std::string(step) + ".out")).string());
      if (std::system(cmd.c_str()) != 0) return {false, std::string("step failed: ") + step};
    }
    evaluations.push_back(read_file(dir / pipeline::files::kEvaluation) +
                          read_file(dir / pipeline::files::kOracleEvaluation));
  }
  const bool ok = !evaluations[0].empty() && evaluations[0] == evaluations[1];
  return {ok, "synth>rate>features>fit-adjust>train>evaluate twice, seed 11: evaluation CSVs " +
                  std::string(ok ? "byte-identical" : "differ") + " (" +
                  std::to_string(evaluations[0].size()) + " bytes)"};
}

}  // namespace

int main() {
  report(1, "blend exactness", blend_exactness);
  report(2, "rating invariants", elo_invariants);
  report(3, "proportional adjustment", proportional_adjustment);
  report(4, "adjustment regressions", adjustment_fits);
  report(5, "gradient checks", gradient_checks);
  report(6, "end-to-end vs persistence", end_to_end);
  report(7, "shortlist properties", shortlist_properties);
  report(8, "RAG thresholds", rag_thresholds);
  report(9, "CLI determinism", cli_determinism);
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
