#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "support.hpp"
#include "tportal/config.hpp"
#include "tportal/error.hpp"
#include "tportal/recruitment.hpp"

namespace tportal {
namespace {

using namespace recruit;

WeightProfile profile(std::initializer_list<std::pair<Metric, double>> w) {
  WeightProfile p;
  p.name = "test";
  for (auto [m, v] : w) p.weights[index_of(m)] = v;
  return p;
}

TEST(Score, SingleMetricIsNormalizedValue) {
  std::vector<MetricVector> preds(3);
  preds[0][Metric::Xg] = 0.2;
  preds[1][Metric::Xg] = 0.5;
  preds[2][Metric::Xg] = 0.4;
  const auto s = score(preds, profile({{Metric::Xg, 0.3}}));
  EXPECT_DOUBLE_EQ(s[0], 0.0);
  EXPECT_DOUBLE_EQ(s[1], 1.0);
  EXPECT_NEAR(s[2], 2.0 / 3, 1e-15);
}

TEST(Score, HandComputedWingerProfile) {
  const auto w = WeightProfile::from_json(
      read_file(std::filesystem::path(TPORTAL_SOURCE_DIR) / "config" / "winger_profile.json"));
  std::vector<MetricVector> p(3);
  // take_ons, xa, xg, crosses, pen_area_entries
  const double v[3][5] = {{3.0, 0.10, 0.20, 2.0, 1.0}, {1.0, 0.30, 0.40, 1.0, 3.0}, {2.0, 0.20, 0.30, 3.0, 2.0}};
  const Metric ms[5] = {Metric::TakeOns, Metric::Xa, Metric::Xg, Metric::Crosses, Metric::PenAreaEntries};
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 5; ++k) p[i][ms[k]] = v[i][k];
  }
  const auto s = score(p, w);
  // normalized: take_ons {1,0,.5}, xa {0,1,.5}, xg {0,1,.5}, crosses {.5,0,1}, pen {0,1,.5}
  const double total = 1.0 + 1.0 + 0.7 + 0.2 + 0.2;
  EXPECT_NEAR(s[0], (1.0 * 1 + 0.2 * 0.5) / total, 1e-12);
  EXPECT_NEAR(s[1], (1.0 + 0.7 + 0.2) / total, 1e-12);
  EXPECT_NEAR(s[2], (0.5 + 0.5 + 0.35 + 0.2 + 0.1) / total, 1e-12);
}

TEST(Score, HalvingWeightsChangesNothing) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 3);
  std::vector<MetricVector> p(8);
  for (auto& v : p) {
    for (auto& x : v.values) x = u(rng);
  }
  auto w = profile({{Metric::Shots, 0.6}, {Metric::Xa, 1.0}, {Metric::DefMidThird, 0.25}});
  const auto a = score(p, w);
  for (auto& x : w.weights) x *= 0.5;
  EXPECT_EQ(score(p, w), a);
}

TEST(Score, DegenerateAndErrors) {
  std::vector<MetricVector> one(1);
  EXPECT_DOUBLE_EQ(score(one, profile({{Metric::Shots, 1}}))[0], 0.5);
  try {
    score(one, WeightProfile{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllZeroWeights);
  }
  auto bad = profile({{Metric::Shots, 1.5}});
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Profile, JsonRoundTrip) {
  const auto w = WeightProfile::from_json(
      read_file(std::filesystem::path(TPORTAL_SOURCE_DIR) / "config" / "winger_profile.json"));
  EXPECT_EQ(w.name, "winger");
  EXPECT_DOUBLE_EQ(w.weights[index_of(Metric::TakeOns)], 1.0);
  EXPECT_DOUBLE_EQ(w.weights[index_of(Metric::Xa)], 1.0);
  EXPECT_DOUBLE_EQ(w.weights[index_of(Metric::Xg)], 0.7);
  EXPECT_DOUBLE_EQ(w.weights[index_of(Metric::Crosses)], 0.2);
  EXPECT_DOUBLE_EQ(w.weights[index_of(Metric::PenAreaEntries)], 0.2);
  EXPECT_DOUBLE_EQ(w.total(), 3.1);
  const auto back = WeightProfile::from_json(w.to_json());
  EXPECT_EQ(back.weights, w.weights);
  EXPECT_EQ(back.name, w.name);
  EXPECT_THROW(WeightProfile::from_json(R"({"weights":{"dribbles":1}})"), Error);
}

TEST(Metadata, CsvRoundTrip) {
  MetadataProvider m({{"P1", "Ann, \"A\"", Date::parse("1999-02-03"), 1.5e6, Position::W},
                      {"P2", "Bo", Date::parse("2001-12-31"), 0, Position::GK}});
  std::ostringstream out;
  m.write_csv(out);
  std::istringstream in(out.str());
  const auto back = MetadataProvider::read_csv(in);
  ASSERT_EQ(back.players().size(), 2u);
  EXPECT_EQ(back.find("P1")->name, "Ann, \"A\"");
  EXPECT_EQ(back.find("P2")->birth_date, Date::parse("2001-12-31"));
  EXPECT_EQ(back.find("P3"), nullptr);
  EXPECT_NEAR(age_years(Date::parse("2000-01-01"), Date::parse("2020-01-01")), 20, 0.01);
}

TEST(Percentile, Midrank) {
  const std::vector<double> others{1, 2, 3};
  EXPECT_DOUBLE_EQ(percentile_midrank(5, others), 100);
  EXPECT_DOUBLE_EQ(percentile_midrank(0, others), 0);
  EXPECT_DOUBLE_EQ(percentile_midrank(2, others), 50);
  EXPECT_DOUBLE_EQ(percentile_midrank(1, std::vector<double>{2}), 0);
  EXPECT_DOUBLE_EQ(percentile_midrank(1, {}), 50);
  // permutation invariance
  std::vector<double> a{3, 1, 4, 1, 5, 9, 2, 6};
  const double p = percentile_midrank(4, a);
  std::sort(a.begin(), a.end());
  EXPECT_DOUBLE_EQ(percentile_midrank(4, a), p);
}

TEST(Verdict, Rules) {
  EXPECT_EQ(classify(100, 1.0), Verdict::Hot);
  EXPECT_EQ(classify(70, 0.85), Verdict::Hot);
  EXPECT_EQ(classify(30, 1.0), Verdict::Not);
  EXPECT_EQ(classify(90, 0.59), Verdict::Not);
  EXPECT_EQ(classify(60, 0.8), Verdict::Tepid);
  EXPECT_EQ(classify(40, 0.6), Verdict::Tepid);
  EXPECT_EQ(to_string(Verdict::Tepid), "Tepid");
}

TEST(Verdict, IdenticalTopPredictionIsHot) {
  predictor::Prediction p;
  p.values[Metric::Xg] = 0.5;
  p.percentiles[Metric::Xg] = 100;
  const auto r = verdict(p, p, profile({{Metric::Xg, 1}}));
  EXPECT_EQ(r.verdict, Verdict::Hot);
  EXPECT_DOUBLE_EQ(r.retention, 1.0);
  EXPECT_DOUBLE_EQ(r.percentile, 100);
}

TEST(Verdict, RetentionCappedAndZeroOrigin) {
  predictor::Prediction d, o;
  d.values[Metric::Xg] = 3;
  o.values[Metric::Xg] = 1;
  d.values[Metric::Xa] = 0.2;  // origin 0 counts as retained
  d.percentiles[Metric::Xg] = d.percentiles[Metric::Xa] = 50;
  const auto r = verdict(d, o, profile({{Metric::Xg, 1}, {Metric::Xa, 1}}));
  EXPECT_DOUBLE_EQ(r.retention, 1.5);
  EXPECT_EQ(r.verdict, Verdict::Tepid);
}

// Shortlists over the trained synthetic world.

const pipeline::PipelineState& state() { return *testing::trained_world().state; }

ShortlistRequest request() {
  ShortlistRequest r;
  r.destination_team = state().store.teams.begin()->first;
  r.position = Position::W;
  r.weights = profile({{Metric::TakeOns, 1}, {Metric::Xa, 1}, {Metric::Xg, 0.7}});
  r.k = 10;
  r.date = state().as_of;
  return r;
}

TEST(Shortlist, SortedBoundedAndExcludesDestination) {
  const auto req = request();
  const auto list = build_shortlist(req, state().sources());
  ASSERT_EQ(list.size(), 10u);
  for (std::size_t i = 0; i < list.size(); ++i) {
    EXPECT_GE(list[i].score, 0.0);
    EXPECT_LE(list[i].score, 1.0);
    EXPECT_NE(list[i].team, req.destination_team);
    EXPECT_EQ(list[i].prediction.scenario.destination_team, req.destination_team);
    if (i) EXPECT_GE(list[i - 1].score, list[i].score);
  }
  std::ostringstream csv;
  write_shortlist_csv(csv, list);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')),
            "rank,score,player_id,player,team,competition,age,value");
}

TEST(Shortlist, FiltersAreSound) {
  auto req = request();
  req.k = 1000;
  req.filters.max_age = 27;
  req.filters.max_value = 5e6;
  req.filters.min_position_minutes = 600;
  const auto& leagues = state().topology.leagues();
  req.filters.allowed_leagues = {leagues.begin()->first, std::next(leagues.begin())->first};
  req.filters.max_team_rating = 70;
  const auto list = build_shortlist(req, state().sources());
  const auto& snap = state().history.before(req.date);
  for (const auto& e : list) {
    EXPECT_LT(*e.age, 27);
    EXPECT_LE(*e.value, 5e6);
    EXPECT_GE(recent_minutes(*state().store.player(e.player_id, req.position), req.date), 600);
    EXPECT_TRUE(e.league == req.filters.allowed_leagues[0] || e.league == req.filters.allowed_leagues[1]);
    EXPECT_LE(snap.score_of(e.team), 70);
  }
}

TEST(Shortlist, RawRatingCeiling) {
  auto req = request();
  req.k = 1000;
  const auto& snap = state().history.before(req.date);
  std::vector<double> raws;
  for (const auto& [t, r] : snap.raw) raws.push_back(r);
  std::sort(raws.begin(), raws.end());
  req.filters.max_team_raw_rating = raws[raws.size() / 2];
  const auto list = build_shortlist(req, state().sources());
  ASSERT_FALSE(list.empty());
  for (const auto& e : list) EXPECT_LE(snap.raw_of(e.team), *req.filters.max_team_raw_rating);
  req.filters = {};
  EXPECT_LT(list.size(), build_shortlist(req, state().sources()).size());
}

TEST(Shortlist, Errors) {
  auto req = request();
  req.filters.max_age = 5;
  try {
    build_shortlist(req, state().sources());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyAfterFilters);
  }
  req = request();
  req.weights = {};
  try {
    build_shortlist(req, state().sources());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllZeroWeights);
  }
}

TEST(Shortlist, PlayersWithoutMetadataStayEligible) {
  const MetadataProvider none;
  const Sources src{state().store, state().history, state().model, none, 500};
  auto req = request();
  const auto list = build_shortlist(req, src);
  ASSERT_FALSE(list.empty());
  EXPECT_FALSE(list[0].age.has_value());
  EXPECT_EQ(list[0].name, list[0].player_id);
  req.filters.max_age = 40;
  EXPECT_THROW(build_shortlist(req, src), Error);
}

TEST(Swarm, SubjectFirstAndPercentileConsistent) {
  const auto& st = state();
  const auto& [id, tl] = *std::find_if(st.store.players.begin(), st.store.players.end(), [&](auto& kv) {
    return kv.first.second == Position::W && kv.second.before(st.as_of) &&
           st.as_of - kv.second.before(st.as_of).sample->date < 60;
  });
  const auto ctx = tl.before(st.as_of).epoch->context;
  const predictor::TransferScenario s{id.first, id.second, ctx.team, ctx.league,
                                      ctx.team, ctx.league, st.as_of};
  const auto d = swarm(ctx.league, Position::W, Metric::TakeOns, s, st.sources());
  ASSERT_GE(d.points.size(), 2u);
  EXPECT_EQ(d.points[0].player_id, id.first);
  EXPECT_EQ(d.points[0].highlight, Highlight::Subject);
  std::vector<double> others;
  for (std::size_t i = 1; i < d.points.size(); ++i) {
    EXPECT_NE(d.points[i].player_id, id.first);
    others.push_back(d.points[i].value);
    if (d.points[i].team == ctx.team) EXPECT_EQ(d.points[i].highlight, Highlight::Teammate);
  }
  EXPECT_DOUBLE_EQ(d.subject_percentile, percentile_midrank(d.points[0].value, others));
  const auto j = nlohmann::json::parse(to_json(d));
  EXPECT_EQ(j["points"].size(), d.points.size());
  try {
    swarm("NOWHERE", Position::W, Metric::TakeOns, s, st.sources());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCohort);
  }
}

}  // namespace
}  // namespace tportal
