#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "oracle.hpp"
#include "support.hpp"
#include "tportal/error.hpp"
#include "tportal/kernels.hpp"
#include "tportal/predictor.hpp"

namespace tportal {
namespace {

using namespace predictor;

const std::vector<TrainingExample>& world_examples() {
  static const auto ex = [] {
    const auto& w = testing::trained_world();
    return build_examples(w.state->store, w.state->history, w.config.examples);
  }();
  return ex;
}

TEST(Groups, PartitionTheMetrics) {
  std::set<Metric> seen;
  std::size_t total = 0;
  for (auto g : kGroups) {
    for (Metric m : targets_of(g)) {
      EXPECT_EQ(group_of(m), g);
      seen.insert(m);
      ++total;
    }
    EXPECT_EQ(group_from_name(to_string(g)), g);
  }
  EXPECT_EQ(total, kMetricCount);
  EXPECT_EQ(seen.size(), kMetricCount);
}

TEST(Groups, InputSubsets) {
  for (auto g : kGroups) {
    const auto idx = input_indices(g);
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), idx.size());
    EXPECT_EQ(idx.back(), kInputSize - 1);
    EXPECT_EQ((idx.size() - (kInputSize - input::kMetricBlocks)) % 5, 0u);
  }
  EXPECT_EQ(input_indices(TargetGroup::Defending).size(), 3 * 5 + 14u);
}

TEST(Examples, BothKindsPresent) {
  const auto& ex = world_examples();
  const auto transfers = std::count_if(ex.begin(), ex.end(), [](auto& e) { return e.is_transfer; });
  EXPECT_GT(transfers, 50);
  EXPECT_GT(static_cast<long>(ex.size()) - transfers, 50);
  for (const auto& e : ex) EXPECT_EQ(e.is_transfer, e.scenario.is_transfer());
}

TEST(Input, NonTransferIsSymmetric) {
  const auto& ex = world_examples();
  const auto it = std::find_if(ex.begin(), ex.end(), [](auto& e) { return !e.is_transfer; });
  ASSERT_NE(it, ex.end());
  const auto& x = it->input;
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    EXPECT_EQ(x[input::kTeamOrigin + j], x[input::kTeamDestination + j]);
    EXPECT_EQ(x[input::kTeamPositionOrigin + j], x[input::kTeamPositionDestination + j]);
  }
  EXPECT_EQ(x[input::kRelativeChange], 0.0);
  double onehot = 0;
  for (std::size_t p = 0; p < kPositionCount; ++p) onehot += x[input::kPosition + p];
  EXPECT_EQ(onehot, 1.0);
}

TEST(Input, RelativeAbilityChangeArithmetic) {
  const auto& st = *testing::trained_world().state;
  const auto& ex = world_examples();
  std::size_t checked = 0;
  for (const auto& e : ex) {
    if (!e.is_transfer) continue;
    const auto& s = e.scenario;
    const auto& snap = st.history.before(s.date);
    const double expected = (snap.score_of(s.destination_team) - snap.league_mean(s.destination_league)) -
                            (snap.score_of(s.origin_team) - snap.league_mean(s.origin_league));
    EXPECT_NEAR(e.input[input::kRelativeChange], expected, 1e-9);
    if (++checked == 25) break;
  }
  EXPECT_EQ(checked, 25u);
}

TEST(Input, UnknownPlayerOrTeam) {
  const auto& st = *testing::trained_world().state;
  TransferScenario s = world_examples().front().scenario;
  s.player = "nobody";
  for (int i = 0; i < 2; ++i) {
    try {
      assemble_input(s, st.store, st.history);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MissingEntity);
    }
    s = world_examples().front().scenario;
    s.destination_team = "T999";
  }
}

TEST(Baseline, IsLatestBlendedValue) {
  const auto& st = *testing::trained_world().state;
  for (std::size_t i = 0; i < world_examples().size(); i += 97) {
    const auto& e = world_examples()[i];
    const auto* tl = st.store.player(e.scenario.player, e.scenario.position);
    ASSERT_NE(tl, nullptr);
    const auto ref = tl->before(e.scenario.date);
    ASSERT_TRUE(ref);
    EXPECT_EQ(baseline_predict(e.scenario, st.store), ref.sample->blended);
    EXPECT_EQ(e.baseline, ref.sample->blended);
    EXPECT_EQ(e.input[input::kWeight], ref.sample->weight);
  }
}

TEST(Preprocessor, RoundTrip) {
  for (auto t : {Transform::Log, Transform::Identity}) {
    const auto pre = Preprocessor::fit(world_examples(), t);
    for (std::size_t i = 0; i < world_examples().size(); i += 31) {
      const auto& y = world_examples()[i].target;
      const auto z = pre.target(y);
      const auto back = pre.invert(z);
      for (std::size_t j = 0; j < kMetricCount; ++j) EXPECT_NEAR(back[j], y[j], 1e-10 * (1 + y[j]));
    }
  }
}

TEST(Preprocessor, StandardizesTrainingTargets) {
  const auto pre = Preprocessor::fit(world_examples(), Transform::Log);
  std::array<double, kMetricCount> sum{}, sq{};
  for (const auto& e : world_examples()) {
    const auto z = pre.target(e.target);
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      sum[j] += z[j];
      sq[j] += z[j] * z[j];
    }
  }
  const double n = static_cast<double>(world_examples().size());
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    EXPECT_NEAR(sum[j] / n, 0.0, 1e-9);
    EXPECT_NEAR(sq[j] / n, 1.0, 1e-6);
  }
}

struct Linear {
  linalg::Matrix x, y, xv, yv, xt, yt;
};

Linear linear_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const std::size_t d = 5;
  std::vector<double> a{0.8, -0.5, 0.3, 0.0, 1.2};
  auto fill = [&](linalg::Matrix& x, linalg::Matrix& y, std::size_t rows) {
    x = linalg::Matrix(rows, d);
    y = linalg::Matrix(rows, 1);
    for (std::size_t r = 0; r < rows; ++r) {
      double v = 0;
      for (std::size_t c = 0; c < d; ++c) {
        x(r, c) = g(rng);
        v += a[c] * x(r, c);
      }
      y(r, 0) = v + 0.3 * g(rng);
    }
  };
  Linear l;
  fill(l.x, l.y, n);
  fill(l.xv, l.yv, n / 4);
  fill(l.xt, l.yt, n / 2);
  return l;
}

TEST(Training, LinearTargetsApproachOlsOracle) {
  const auto l = linear_data(2000, 1);
  HyperParams hp;
  hp.learning_rate = 0.005;
  hp.trunk = 16;
  hp.head = 8;
  const auto r = train_network(l.x, l.y, l.xv, l.yv, hp, {}, 3);
  EXPECT_LT(r.final_train_loss, r.initial_train_loss);

  Eigen::MatrixXd x(l.x.rows(), l.x.cols() + 1);
  Eigen::VectorXd y(l.x.rows());
  for (std::size_t i = 0; i < l.x.rows(); ++i) {
    x(i, 0) = 1;
    for (std::size_t c = 0; c < l.x.cols(); ++c) x(i, c + 1) = l.x(i, c);
    y(i) = l.y(i, 0);
  }
  const auto o = testing::oracle_ols(x, y);
  double ols_mse = 0;
  for (std::size_t i = 0; i < l.xt.rows(); ++i) {
    double p = o.beta(0);
    for (std::size_t c = 0; c < l.xt.cols(); ++c) p += o.beta(c + 1) * l.xt(i, c);
    ols_mse += (p - l.yt(i, 0)) * (p - l.yt(i, 0));
  }
  ols_mse /= static_cast<double>(l.xt.rows());
  EXPECT_LT(kernels::mse(r.network, l.xt, l.yt), 1.2 * ols_mse);
}

TEST(Training, ConstantTargets) {
  auto l = linear_data(500, 2);
  for (std::size_t i = 0; i < l.y.rows(); ++i) l.y(i, 0) = 0.7;
  for (std::size_t i = 0; i < l.yv.rows(); ++i) l.yv(i, 0) = 0.7;
  const auto r = train_network(l.x, l.y, l.xv, l.yv, {}, {}, 4);
  EXPECT_LT(kernels::mse(r.network, l.x, l.y), 1e-3);
}

TEST(Training, DeterministicForSeed) {
  const auto l = linear_data(400, 3);
  HyperParams hp;
  hp.dropout = 0.2;
  TrainConfig cfg;
  cfg.max_epochs = 20;
  const auto a = train_network(l.x, l.y, l.xv, l.yv, hp, cfg, 9);
  const auto b = train_network(l.x, l.y, l.xv, l.yv, hp, cfg, 9);
  EXPECT_TRUE(a.network == b.network);
  cfg.parallel_kernel = false;
  const auto c = train_network(l.x, l.y, l.xv, l.yv, hp, cfg, 9);
  double worst = 0;
  for (std::size_t i = 0; i < a.network.parameters().size(); ++i) {
    worst = std::max(worst, std::abs(a.network.parameters()[i] - c.network.parameters()[i]));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Training, Errors) {
  const linalg::Matrix empty(0, 3), y(0, 1);
  try {
    train_network(empty, y, empty, y, {}, {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
  }
  auto l = linear_data(200, 5);
  HyperParams hp;
  hp.learning_rate = 1e200;
  TrainConfig cfg;
  cfg.clip_norm = 0.0;  // unclipped
  try {
    train_network(l.x, l.y, l.xv, l.yv, hp, cfg, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivergedLoss);
  }
}

TEST(Search, BudgetOneCallsObjectiveOnce) {
  int calls = 0;
  HyperParams seen;
  const auto best = hyperparam_search({}, 1, 5, [&](const HyperParams& hp) {
    ++calls;
    seen = hp;
    return 1.0;
  });
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(best, seen);
}

TEST(Search, FixedDimensionRespected) {
  SearchSpace space;
  space.trunk = Dimension::fixed(24);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto best = hyperparam_search(space, 6, seed, [](const HyperParams& hp) {
      return hp.learning_rate;
    });
    EXPECT_EQ(best.trunk, 24u);
  }
}

TEST(Search, PlantedOptimumFoundExhaustively) {
  SearchSpace space;
  space.learning_rate = {{0.001, 0.01, 0.03}};
  space.dropout = {{0.0, 0.1}};
  ASSERT_EQ(space.size(), 3u * 3 * 2 * 3 * 3);
  const HyperParams planted{0.03, 128, 0.1, 16, 32};
  const auto best = hyperparam_search(space, 1000, 1, [&](const HyperParams& hp) {
    return hp == planted ? 0.5 : 1.0;
  });
  EXPECT_EQ(best, planted);
}

TEST(Search, NonFiniteNeverWins) {
  SearchSpace space;
  space.learning_rate = {{0.001, 0.01}};
  space.batch_size = Dimension::fixed(64);
  space.dropout = Dimension::fixed(0);
  space.trunk = Dimension::fixed(16);
  space.head = Dimension::fixed(8);
  const auto best = hyperparam_search(space, 10, 1, [](const HyperParams& hp) {
    return hp.learning_rate < 0.005 ? std::numeric_limits<double>::infinity() : 3.0;
  });
  EXPECT_EQ(best.learning_rate, 0.01);
}

TEST(Evaluate, IdentityCases) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 2);
  std::vector<MetricVector> truth(20), base(20);
  std::unique_ptr<bool[]> flags(new bool[20]);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      truth[i][j] = u(rng);
      base[i][j] = u(rng);
    }
    flags[i] = i % 3 == 0;
  }
  const std::span<const bool> f(flags.get(), 20);
  auto e = evaluate(base, base, truth, f);
  for (auto s : kSplits) {
    for (const auto& m : e.at(s)) EXPECT_DOUBLE_EQ(m.improvement, 0.0);
  }
  e = evaluate(truth, base, truth, f);
  for (auto s : kSplits) {
    for (const auto& m : e.at(s)) EXPECT_DOUBLE_EQ(m.improvement, 1.0);
  }
  EXPECT_EQ(e.count(Split::Transfer), 7u);
  EXPECT_EQ(e.count(Split::NonTransfer), 13u);
  EXPECT_DOUBLE_EQ(e.mean_improvement(Split::All), 1.0);
  try {
    evaluate(std::span<const MetricVector>{}, {}, {}, {});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::EmptyDataset);
  }
}

TEST(Evaluate, CsvLayout) {
  const auto& st = *testing::trained_world().state;
  const auto e = evaluate(st.model, world_examples());
  std::ostringstream out;
  write_evaluation_csv(out, e);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "split,target,n,mse_model,mse_baseline,improvement_pct");
  std::map<std::string, int> rows;
  while (std::getline(in, line)) ++rows[line.substr(0, line.find(','))];
  EXPECT_EQ(rows["transfer"], 13);
  EXPECT_EQ(rows["non_transfer"], 13);
}

TEST(Model, JsonRoundTripPreservesPredictions) {
  const auto& model = testing::trained_world().state->model;
  const auto back = transfer_model_from_json(to_json(model));
  for (std::size_t i = 0; i < world_examples().size(); i += 53) {
    const auto& x = world_examples()[i].input;
    EXPECT_EQ(predict_metrics(model, x), predict_metrics(back, x));
  }
  EXPECT_EQ(to_json(back), to_json(model));
}

TEST(Model, UnfittedThrows) {
  try {
    predict_metrics(TransferModel{}, ModelInput{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnfittedModel);
  }
}

TEST(Percentile, StrictBelow) {
  const std::vector<double> others{1, 2, 3};
  EXPECT_DOUBLE_EQ(percentile_strict(4, others), 100);
  EXPECT_DOUBLE_EQ(percentile_strict(0, others), 0);
  EXPECT_DOUBLE_EQ(percentile_strict(2.5, others), 200.0 / 3);
  EXPECT_DOUBLE_EQ(percentile_strict(2, {}), 50);
}

TransferModel zero_model() {
  TransferModel m;
  m.preprocessor.transform = Transform::Identity;
  m.preprocessor.input_std.fill(1);
  m.preprocessor.target_std.fill(1);
  for (auto g : kGroups) {
    GroupModel gm;
    gm.group = g;
    gm.inputs = input_indices(g);
    gm.network = nn::Network({gm.inputs.size(), 4, 2, targets_of(g).size()});
    m.groups.push_back(gm);
  }
  return m;
}

TEST(Predict, ZeroNetworksPredictZero) {
  const auto& st = *testing::trained_world().state;
  const auto model = zero_model();
  const auto& s = world_examples().back().scenario;
  const auto p = predict(s, model, st.store, st.history);
  EXPECT_EQ(p.values, MetricVector{});
  for (std::size_t j = 0; j < kMetricCount; ++j) EXPECT_EQ(p.percentiles[j], 0.0);
  EXPECT_GT(p.cohort_size, 0u);
}

TEST(Predict, ShortHistoryIsRed) {
  const auto& st = *testing::trained_world().state;
  // find a player-position with fewer than 500 minutes
  for (const auto& [id, tl] : st.store.players) {
    const auto last = tl.latest();
    if (!last || last.sample->cum_minutes >= 500 || tl.epochs().size() != 1) continue;
    const auto& ctx = last.epoch->context;
    const TransferScenario s{id.first, id.second, ctx.team, ctx.league, ctx.team, ctx.league,
                             last.sample->date + 1};
    const auto p = predict(s, st.model, st.store, st.history);
    EXPECT_EQ(p.rag, features::RagStatus::Red);
    EXPECT_LT(p.minutes, 500);
    return;
  }
  GTEST_SKIP() << "no short-history player in the world";
}

TEST(Predict, ParallelBatchMatchesSingle) {
  const auto& st = *testing::trained_world().state;
  std::vector<TransferScenario> scenarios;
  for (std::size_t i = 0; i < world_examples().size(); i += 41) {
    scenarios.push_back(world_examples()[i].scenario);
  }
  const auto many = predict_many(scenarios, st.model, st.store, st.history);
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    EXPECT_EQ(many[i],
              predict_metrics(st.model, assemble_input(scenarios[i], st.store, st.history)));
  }
}

}  // namespace
}  // namespace tportal
