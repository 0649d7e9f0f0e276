#include "tportal/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "tportal/adjustments.hpp"
#include "tportal/error.hpp"
#include "tportal/kernels.hpp"
#include "tportal/text.hpp"

namespace tportal::predictor {

using features::FeatureStore;
using features::FeatureTimeline;

namespace {

constexpr int kSchemaVersion = 1;

constexpr std::array<Metric, 2> kShooting{Metric::Shots, Metric::Xg};
constexpr std::array<Metric, 7> kPassing{Metric::Xa,
                                         Metric::Crosses,
                                         Metric::TotalPasses,
                                         Metric::ShortPasses,
                                         Metric::LongPasses,
                                         Metric::AttThirdPasses,
                                         Metric::PenAreaEntries};
constexpr std::array<Metric, 1> kDribbling{Metric::TakeOns};
constexpr std::array<Metric, 3> kDefending{Metric::DefOwnThird, Metric::DefMidThird,
                                           Metric::DefAttThird};

// Feature blocks each group reads.
constexpr std::array<Metric, 7> kAttackingInputs{
    Metric::Shots,          Metric::Xg,      Metric::Xa,           Metric::Crosses,
    Metric::PenAreaEntries, Metric::TakeOns, Metric::AttThirdPasses};
constexpr std::array<Metric, 7> kPassingInputs{Metric::Xa,
                                               Metric::Crosses,
                                               Metric::TotalPasses,
                                               Metric::ShortPasses,
                                               Metric::LongPasses,
                                               Metric::AttThirdPasses,
                                               Metric::PenAreaEntries};
constexpr std::array<Metric, 3> kDefensiveInputs = kDefending;

std::span<const Metric> input_metrics(TargetGroup g) {
  switch (g) {
    case TargetGroup::Shooting:
    case TargetGroup::Dribbling: return kAttackingInputs;
    case TargetGroup::Passing: return kPassingInputs;
    case TargetGroup::Defending: return kDefensiveInputs;
  }
  return {};
}

std::uint64_t group_seed(std::uint64_t seed, std::size_t g) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(g)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

MetricVector team_value(const FeatureStore& store, const std::string& team,
                        const std::string& league, Date date) {
  const FeatureTimeline* tl = store.team(team);
  if (!tl) throw Error(ErrorCode::MissingEntity, "unknown team '" + team + "'");
  if (auto v = adjust::context_value(*tl, league, date)) return *v;
  if (auto s = tl->before(date)) return s.sample->blended;
  return tl->epochs().empty() ? MetricVector{} : tl->epochs().front().prior;
}

MetricVector team_position_value(const FeatureStore& store, const std::string& team, Position pos,
                                 const std::string& league, Date date) {
  if (const FeatureTimeline* tl = store.team_position(team, pos)) {
    if (auto v = adjust::context_value(*tl, league, date)) return *v;
    if (auto s = tl->before(date)) return s.sample->blended;
  }
  try {
    return adjust::naive_league_expectation(store, league, adjust::Level::TeamPosition, pos, date);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyLeague) throw;
    return {};
  }
}

double league_mean_or_own(const ratings::PowerRankingSnapshot& snap, const std::string& team,
                          const std::string& league) {
  try {
    return snap.league_mean(league);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyLeague) throw;
    return snap.league_mean(snap.league.at(team));
  }
}

struct PlayerState {
  MetricVector value;
  double weight = 0.0;
  double minutes = 0.0;
};

PlayerState player_state(const TransferScenario& s, const FeatureStore& store) {
  const FeatureTimeline* tl = store.player(s.player, s.position);
  if (!tl || tl->empty()) {
    throw Error(ErrorCode::MissingEntity, "unknown player '" + s.player + "' at " +
                                              std::string(name_of(s.position)));
  }
  if (auto ref = tl->before(s.date)) {
    return {ref.sample->blended, ref.sample->weight, ref.sample->cum_minutes};
  }
  return {tl->epochs().front().prior, 0.0, 0.0};
}

nlohmann::json dims(const std::array<double, kInputSize>& a) {
  return std::vector<double>(a.begin(), a.end());
}
nlohmann::json dims(const std::array<double, kMetricCount>& a) {
  return std::vector<double>(a.begin(), a.end());
}
template <std::size_t N>
void read_dims(const nlohmann::json& j, std::array<double, N>& out) {
  if (!j.is_array() || j.size() != N) {
    throw Error(ErrorCode::InvalidArgument, "expected " + std::to_string(N) + " numbers");
  }
  for (std::size_t i = 0; i < N; ++i) out[i] = j[i].get<double>();
}

}  // namespace

std::string_view to_string(TargetGroup g) {
  switch (g) {
    case TargetGroup::Shooting: return "shooting";
    case TargetGroup::Passing: return "passing";
    case TargetGroup::Dribbling: return "dribbling";
    case TargetGroup::Defending: return "defending";
  }
  return "";
}

TargetGroup group_from_name(std::string_view name) {
  for (TargetGroup g : kGroups) {
    if (to_string(g) == name) return g;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown target group '" + std::string(name) + "'");
}

std::span<const Metric> targets_of(TargetGroup g) {
  switch (g) {
    case TargetGroup::Shooting: return kShooting;
    case TargetGroup::Passing: return kPassing;
    case TargetGroup::Dribbling: return kDribbling;
    case TargetGroup::Defending: return kDefending;
  }
  return {};
}

TargetGroup group_of(Metric m) {
  for (TargetGroup g : kGroups) {
    const auto t = targets_of(g);
    if (std::find(t.begin(), t.end(), m) != t.end()) return g;
  }
  throw Error(ErrorCode::InvalidArgument, "metric outside every group");
}

std::string TransferScenario::id() const {
  return player + "|" + std::string(name_of(position)) + "|" + origin_team + "|" +
         destination_team + "|" + date.to_string();
}

ModelInput assemble_input(const TransferScenario& s, const FeatureStore& store,
                          const ratings::RatingHistory& history) {
  using namespace input;
  ModelInput in;
  auto put = [&](std::size_t offset, const MetricVector& v) {
    std::copy(v.values.begin(), v.values.end(), in.values.begin() + static_cast<long>(offset));
  };
  const PlayerState p = player_state(s, store);
  put(kPlayer, p.value);
  put(kTeamOrigin, team_value(store, s.origin_team, s.origin_league, s.date));
  put(kTeamDestination, team_value(store, s.destination_team, s.destination_league, s.date));
  put(kTeamPositionOrigin,
      team_position_value(store, s.origin_team, s.position, s.origin_league, s.date));
  put(kTeamPositionDestination,
      team_position_value(store, s.destination_team, s.position, s.destination_league, s.date));

  if (history.empty()) throw Error(ErrorCode::NoData, "no rating history");
  const auto& snap = history.before(s.date);
  try {
    in.values[kRankOrigin] = snap.score_of(s.origin_team);
    in.values[kRankDestination] = snap.score_of(s.destination_team);
    in.values[kLeagueMeanOrigin] = league_mean_or_own(snap, s.origin_team, s.origin_league);
    in.values[kLeagueMeanDestination] =
        league_mean_or_own(snap, s.destination_team, s.destination_league);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnknownTeam) throw;
    throw Error(ErrorCode::MissingEntity, e.what());
  }
  in.values[kRelativeOrigin] = in.values[kRankOrigin] - in.values[kLeagueMeanOrigin];
  in.values[kRelativeDestination] =
      in.values[kRankDestination] - in.values[kLeagueMeanDestination];
  in.values[kRelativeChange] = in.values[kRelativeDestination] - in.values[kRelativeOrigin];
  in.values[kPosition + static_cast<std::size_t>(s.position)] = 1.0;
  in.values[kWeight] = p.weight;
  return in;
}

MetricVector baseline_predict(const TransferScenario& s, const FeatureStore& store) {
  return player_state(s, store).value;
}

std::vector<std::size_t> input_indices(TargetGroup g) {
  using namespace input;
  std::vector<std::size_t> out;
  for (std::size_t block : {kPlayer, kTeamOrigin, kTeamDestination, kTeamPositionOrigin,
                            kTeamPositionDestination}) {
    for (Metric m : input_metrics(g)) out.push_back(block + static_cast<std::size_t>(m));
  }
  for (std::size_t i = kRankOrigin; i < kInputSize; ++i) out.push_back(i);
  return out;
}

std::optional<MetricVector> forward_per90(std::span<const features::Stint> stints,
                                          std::size_t first, double horizon) {
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
  MetricVector sum;
  double need = horizon;
  for (std::size_t k = first; k < stints.size() && need > 0.0; ++k) {
    const auto& st = stints[k];
    if (st.minutes <= need) {
      sum += st.metrics;
      need -= st.minutes;
    } else {
      sum += st.metrics * (need / st.minutes);
      need = 0.0;
    }
  }
  if (need > 1e-9) return std::nullopt;
  return sum * (90.0 / horizon);
}

std::vector<TrainingExample> build_examples(const FeatureStore& store,
                                            const ratings::RatingHistory& history,
                                            const ExampleConfig& cfg) {
  const double H = cfg.horizon_minutes;
  if (!(H > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
  std::vector<TrainingExample> out;
  auto emit = [&](const TransferScenario& s, const MetricVector& target) {
    try {
      TrainingExample ex;
      ex.scenario = s;
      ex.input = assemble_input(s, store, history);
      ex.target = target;
      ex.baseline = baseline_predict(s, store);
      ex.is_transfer = s.is_transfer();
      out.push_back(std::move(ex));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MissingEntity) throw;
    }
  };
  for (const auto& [id, tl] : store.players) {
    const auto& epochs = tl.epochs();
    for (std::size_t e = 0; e < epochs.size(); ++e) {
      const auto& cur = epochs[e];
      if (e > 0 && !epochs[e - 1].samples.empty() &&
          epochs[e - 1].context.team != cur.context.team) {
        if (auto target = forward_per90(cur.stints, 0, H)) {
          const auto& prev = epochs[e - 1].context;
          emit({id.first, id.second, prev.team, prev.league, cur.context.team, cur.context.league,
                cur.opened},
               *target);
        }
      }
      if (!cfg.include_non_transfers) continue;
      double cum = 0.0;
      double next = H;
      for (std::size_t k = 0; k < cur.stints.size(); ++k) {
        if (k > 0 && cum >= next - 1e-9 && cur.stints[k].date > cur.stints[k - 1].date) {
          const auto target = forward_per90(cur.stints, k, H);
          if (!target) break;
          emit({id.first, id.second, cur.context.team, cur.context.league, cur.context.team,
                cur.context.league, cur.stints[k].date},
               *target);
          next = cum + H;
        }
        cum += cur.stints[k].minutes;
      }
    }
  }
  return out;
}

DataSplit split_examples(std::vector<TrainingExample> examples, std::uint64_t seed) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = examples.size() * 70 / 100;
  const std::size_t n_val = examples.size() * 15 / 100;
  DataSplit out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& ex = examples[order[i]];
    if (i < n_train) {
      out.train.push_back(std::move(ex));
    } else if (i < n_train + n_val) {
      out.validation.push_back(std::move(ex));
    } else {
      out.test.push_back(std::move(ex));
    }
  }
  return out;
}

template <std::size_t N>
void standardize_stats(const std::vector<std::array<double, N>>& rows, std::array<double, N>& mean,
                       std::array<double, N>& sd) {
  const double n = static_cast<double>(rows.size());
  for (std::size_t i = 0; i < N; ++i) {
    double m = 0.0;
    for (const auto& r : rows) m += r[i];
    m /= n;
    double v = 0.0;
    for (const auto& r : rows) v += (r[i] - m) * (r[i] - m);
    const double s = std::sqrt(v / n);
    mean[i] = m;
    sd[i] = s > 1e-12 ? s : 1.0;
  }
}

Preprocessor Preprocessor::fit(std::span<const TrainingExample> train, Transform t) {
  if (train.empty()) throw Error(ErrorCode::EmptyDataset, "no training examples");
  Preprocessor p;
  p.transform = t;
  if (t == Transform::Log) {
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      double mean = 0.0;
      for (const auto& ex : train) mean += ex.input[input::kPlayer + j];
      p.shift[j] = std::max(1e-3, 0.05 * mean / static_cast<double>(train.size()));
    }
  }
  // Statistics of the transformed values: run the transform with identity scaling first.
  p.input_mean.fill(0.0);
  p.input_std.fill(1.0);
  p.target_mean.fill(0.0);
  p.target_std.fill(1.0);
  std::vector<std::array<double, kInputSize>> xs;
  std::vector<std::array<double, kMetricCount>> ys;
  xs.reserve(train.size());
  ys.reserve(train.size());
  for (const auto& ex : train) {
    xs.push_back(p.input(ex.input));
    ys.push_back(p.target(ex.target));
  }
  standardize_stats(xs, p.input_mean, p.input_std);
  standardize_stats(ys, p.target_mean, p.target_std);
  return p;
}

std::array<double, kInputSize> Preprocessor::input(const ModelInput& x) const {
  std::array<double, kInputSize> out{};
  for (std::size_t i = 0; i < kInputSize; ++i) {
    double v = x[i];
    if (transform == Transform::Log && i < input::kMetricBlocks) {
      v = std::log(std::max(v, 0.0) + shift[i % kMetricCount]);
    }
    out[i] = (v - input_mean[i]) / input_std[i];
  }
  return out;
}

std::array<double, kMetricCount> Preprocessor::target(const MetricVector& y) const {
  std::array<double, kMetricCount> out{};
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    double v = y[j];
    if (transform == Transform::Log) v = std::log(std::max(v, 0.0) + shift[j]);
    out[j] = (v - target_mean[j]) / target_std[j];
  }
  return out;
}

MetricVector Preprocessor::invert(std::span<const double> z) const {
  if (z.size() != kMetricCount) throw Error(ErrorCode::ShapeMismatch, "expected 13 outputs");
  MetricVector out;
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    double v = z[j] * target_std[j] + target_mean[j];
    if (transform == Transform::Log) {
      // Guard against overflow from wild extrapolation.
      v = std::exp(std::min(v, 700.0)) - shift[j];
    }
    out[j] = std::max(0.0, v);
  }
  return out;
}

void HyperParams::validate() const {
  if (!(learning_rate > 0.0) || batch_size == 0 || trunk == 0 || head == 0 ||
      !(dropout >= 0.0 && dropout < 1.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "hyperparameters must be positive with dropout in [0, 1)");
  }
}

TrainResult train_network(const linalg::Matrix& x_train, const linalg::Matrix& y_train,
                          const linalg::Matrix& x_val, const linalg::Matrix& y_val,
                          const HyperParams& hp, const TrainConfig& cfg, std::uint64_t seed) {
  hp.validate();
  if (x_train.rows() == 0) throw Error(ErrorCode::EmptyDataset, "no training rows");
  if (y_train.rows() != x_train.rows() || x_val.rows() != y_val.rows() ||
      (x_val.rows() > 0 && (x_val.cols() != x_train.cols() || y_val.cols() != y_train.cols()))) {
    throw Error(ErrorCode::ShapeMismatch, "training and validation shapes disagree");
  }
  const bool has_val = x_val.rows() > 0;
  const linalg::Matrix& xv = has_val ? x_val : x_train;
  const linalg::Matrix& yv = has_val ? y_val : y_train;

  std::mt19937_64 rng(seed);
  TrainResult result;
  result.network = nn::Network({x_train.cols(), hp.trunk, hp.head, y_train.cols()});
  nn::Network& net = result.network;
  net.init_he(rng);

  auto check_finite = [](double loss, const char* what) {
    if (!std::isfinite(loss)) throw Error(ErrorCode::DivergedLoss, std::string(what) + " is not finite");
  };
  result.initial_train_loss = kernels::mse(net, x_train, y_train);
  check_finite(result.initial_train_loss, "initial loss");

  const std::size_t p = net.parameters().size();
  std::vector<double> grad(p), velocity(p, 0.0);
  std::vector<double> best(net.parameters().begin(), net.parameters().end());
  double best_val = kernels::mse(net, xv, yv);
  std::size_t stale = 0;

  std::vector<std::size_t> order(x_train.rows());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::min(hp.batch_size, order.size());
  linalg::Matrix masks(batch, hp.trunk);
  std::bernoulli_distribution keep(1.0 - hp.dropout);
  const double keep_scale = 1.0 / (1.0 - hp.dropout);

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      const std::span<const std::size_t> rows(order.data() + start, len);
      const linalg::Matrix* m = nullptr;
      if (hp.dropout > 0.0) {
        for (std::size_t i = 0; i < len; ++i) {
          for (std::size_t t = 0; t < hp.trunk; ++t) masks(i, t) = keep(rng) ? keep_scale : 0.0;
        }
        m = &masks;
      }
      const double loss = cfg.parallel_kernel
                              ? kernels::batch_gradient_parallel(net, x_train, y_train, rows, m, grad)
                              : kernels::batch_gradient_serial(net, x_train, y_train, rows, m, grad);
      check_finite(loss, "batch loss");
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      norm = std::sqrt(norm);
      const double clip = cfg.clip_norm > 0.0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      auto params = net.parameters();
      for (std::size_t k = 0; k < p; ++k) {
        velocity[k] = cfg.momentum * velocity[k] - hp.learning_rate * clip * grad[k];
        params[k] += velocity[k];
      }
    }
    result.epochs = epoch + 1;
    const double val = kernels::mse(net, xv, yv);
    check_finite(val, "validation loss");
    if (val < best_val) {
      best_val = val;
      std::copy(net.parameters().begin(), net.parameters().end(), best.begin());
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  std::copy(best.begin(), best.end(), net.parameters().begin());
  result.best_validation_loss = best_val;
  result.final_train_loss = kernels::mse(net, x_train, y_train);
  return result;
}

GroupData group_data(const Preprocessor& pre, TargetGroup g,
                     std::span<const TrainingExample> examples) {
  const auto cols = input_indices(g);
  const auto targets = targets_of(g);
  GroupData d{linalg::Matrix(examples.size(), cols.size()),
              linalg::Matrix(examples.size(), targets.size())};
  for (std::size_t r = 0; r < examples.size(); ++r) {
    const auto x = pre.input(examples[r].input);
    const auto y = pre.target(examples[r].target);
    for (std::size_t c = 0; c < cols.size(); ++c) d.x(r, c) = x[cols[c]];
    for (std::size_t c = 0; c < targets.size(); ++c) {
      d.y(r, c) = y[static_cast<std::size_t>(targets[c])];
    }
  }
  return d;
}

TrainResult train_group(const Preprocessor& pre, TargetGroup g,
                        std::span<const TrainingExample> train,
                        std::span<const TrainingExample> validation, const HyperParams& hp,
                        const TrainConfig& cfg, std::uint64_t seed) {
  if (train.empty()) throw Error(ErrorCode::EmptyDataset, "no training examples");
  const auto tr = group_data(pre, g, train);
  const auto va = group_data(pre, g, validation);
  return train_network(tr.x, tr.y, va.x, va.y, hp, cfg, seed);
}

TransferModel train_model(std::span<const TrainingExample> train,
                          std::span<const TrainingExample> validation,
                          const std::array<HyperParams, 4>& hp, const TrainConfig& cfg,
                          std::uint64_t seed, Transform transform) {
  TransferModel model;
  model.preprocessor = Preprocessor::fit(train, transform);
  model.groups.resize(kGroups.size());
  std::exception_ptr failure;
  std::mutex mu;
  const long n = static_cast<long>(kGroups.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    const auto gi = static_cast<std::size_t>(i);
    try {
      auto r = train_group(model.preprocessor, kGroups[gi], train, validation, hp[gi], cfg,
                           group_seed(seed, gi));
      model.groups[gi] = {kGroups[gi], input_indices(kGroups[gi]), hp[gi], std::move(r.network)};
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return model;
}

MetricVector predict_metrics(const TransferModel& model, const ModelInput& x) {
  if (!model.fitted()) throw Error(ErrorCode::UnfittedModel, "transfer model is not trained");
  const auto z = model.preprocessor.input(x);
  std::array<double, kMetricCount> out{};
  std::vector<double> sub, y;
  nn::Workspace ws;
  for (const GroupModel& g : model.groups) {
    sub.resize(g.inputs.size());
    for (std::size_t c = 0; c < g.inputs.size(); ++c) sub[c] = z[g.inputs[c]];
    const auto targets = targets_of(g.group);
    y.resize(targets.size());
    g.network.forward(sub, y, ws);
    for (std::size_t c = 0; c < targets.size(); ++c) out[static_cast<std::size_t>(targets[c])] = y[c];
  }
  return model.preprocessor.invert(out);
}

double Dimension::sample(std::mt19937_64& rng) const {
  if (discrete()) {
    std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
    return choices[pick(rng)];
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double t = u(rng);
  if (log_scale) return std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  return lo + t * (hi - lo);
}

std::optional<std::size_t> SearchSpace::size() const {
  std::size_t n = 1;
  for (const Dimension* d : {&learning_rate, &batch_size, &dropout, &trunk, &head}) {
    if (!d->discrete()) return std::nullopt;
    n *= d->choices.size();
  }
  return n;
}

HyperParams hyperparam_search(const SearchSpace& space, std::size_t budget, std::uint64_t seed,
                              const Objective& objective) {
  if (budget == 0) throw Error(ErrorCode::InvalidArgument, "search budget must be at least 1");
  auto make = [](double lr, double bs, double dr, double tr, double hd) {
    HyperParams hp;
    hp.learning_rate = lr;
    hp.batch_size = static_cast<std::size_t>(std::llround(bs));
    hp.dropout = dr;
    hp.trunk = static_cast<std::size_t>(std::llround(tr));
    hp.head = static_cast<std::size_t>(std::llround(hd));
    return hp;
  };
  std::vector<HyperParams> candidates;
  const auto size = space.size();
  if (size && *size <= budget) {
    for (double lr : space.learning_rate.choices)
      for (double bs : space.batch_size.choices)
        for (double dr : space.dropout.choices)
          for (double tr : space.trunk.choices)
            for (double hd : space.head.choices) candidates.push_back(make(lr, bs, dr, tr, hd));
  } else {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < budget; ++i) {
      const double lr = space.learning_rate.sample(rng);
      const double bs = space.batch_size.sample(rng);
      const double dr = space.dropout.sample(rng);
      const double tr = space.trunk.sample(rng);
      const double hd = space.head.sample(rng);
      candidates.push_back(make(lr, bs, dr, tr, hd));
    }
  }
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double v = std::numeric_limits<double>::infinity();
    try {
      v = objective(candidates[i]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DivergedLoss) throw;
    }
    if (std::isfinite(v) && v < best_value) {
      best_value = v;
      best = i;
    }
  }
  return candidates[best];
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Transfer: return "transfer";
    case Split::NonTransfer: return "non_transfer";
    case Split::All: return "all";
  }
  return "";
}

double Evaluation::mean_improvement(Split s) const {
  double sum = 0.0;
  for (const auto& m : at(s)) sum += m.improvement;
  return sum / static_cast<double>(kMetricCount);
}

Evaluation evaluate(std::span<const MetricVector> model, std::span<const MetricVector> baseline,
                    std::span<const MetricVector> truth, std::span<const bool> is_transfer) {
  if (truth.empty()) throw Error(ErrorCode::EmptyDataset, "nothing to evaluate");
  if (model.size() != truth.size() || baseline.size() != truth.size() ||
      is_transfer.size() != truth.size()) {
    throw Error(ErrorCode::ShapeMismatch, "evaluation inputs differ in length");
  }
  Evaluation e;
  std::array<std::array<double, kMetricCount>, 3> sm{}, sb{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::size_t split = is_transfer[i] ? 0 : 1;
    for (std::size_t s : {split, std::size_t{2}}) {
      ++e.counts[s];
      for (std::size_t j = 0; j < kMetricCount; ++j) {
        const double dm = model[i][j] - truth[i][j];
        const double db = baseline[i][j] - truth[i][j];
        sm[s][j] += dm * dm;
        sb[s][j] += db * db;
      }
    }
  }
  for (std::size_t s = 0; s < 3; ++s) {
    if (e.counts[s] == 0) continue;
    const double n = static_cast<double>(e.counts[s]);
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      auto& m = e.scores[s][j];
      m.mse_model = sm[s][j] / n;
      m.mse_baseline = sb[s][j] / n;
      if (m.mse_baseline > 0.0) {
        m.improvement = 1.0 - m.mse_model / m.mse_baseline;
      } else {
        m.improvement = m.mse_model == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
      }
    }
  }
  return e;
}

Evaluation evaluate(const TransferModel& model, std::span<const TrainingExample> examples) {
  std::vector<MetricVector> pred(examples.size()), base, truth;
  const long n = static_cast<long>(examples.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    pred[static_cast<std::size_t>(i)] = predict_metrics(model, examples[static_cast<std::size_t>(i)].input);
  }
  std::unique_ptr<bool[]> tr(new bool[examples.size()]);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    base.push_back(examples[i].baseline);
    truth.push_back(examples[i].target);
    tr[i] = examples[i].is_transfer;
  }
  return evaluate(pred, base, truth, std::span<const bool>(tr.get(), examples.size()));
}

void write_evaluation_csv(std::ostream& out, const Evaluation& e) {
  out << "split,target,n,mse_model,mse_baseline,improvement_pct\n";
  for (Split s : kSplits) {
    if (e.count(s) == 0) continue;
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      const auto& m = e.at(s)[j];
      out << to_string(s) << ',' << kMetricNames[j] << ',' << e.count(s) << ','
          << format_double(m.mse_model) << ',' << format_double(m.mse_baseline) << ','
          << format_double(100.0 * m.improvement) << '\n';
    }
  }
}

std::string to_json(const TransferModel& model) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  const auto& p = model.preprocessor;
  j["transform"] = p.transform == Transform::Log ? "log" : "identity";
  j["shift"] = dims(p.shift);
  j["input_mean"] = dims(p.input_mean);
  j["input_std"] = dims(p.input_std);
  j["target_mean"] = dims(p.target_mean);
  j["target_std"] = dims(p.target_std);
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& g : model.groups) {
    nlohmann::ordered_json gj;
    const auto& a = g.network.architecture();
    gj["group"] = std::string(to_string(g.group));
    gj["inputs"] = g.inputs;
    gj["hyperparams"] = {{"learning_rate", g.hyperparams.learning_rate},
                         {"batch_size", g.hyperparams.batch_size},
                         {"dropout", g.hyperparams.dropout},
                         {"trunk", g.hyperparams.trunk},
                         {"head", g.hyperparams.head}};
    gj["architecture"] = {
        {"inputs", a.inputs}, {"trunk", a.trunk}, {"head", a.head}, {"outputs", a.outputs}};
    gj["parameters"] =
        std::vector<double>(g.network.parameters().begin(), g.network.parameters().end());
    groups.push_back(std::move(gj));
  }
  j["groups"] = std::move(groups);
  return j.dump();
}

TransferModel transfer_model_from_json(std::string_view text) {
  TransferModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw Error(ErrorCode::InvalidArgument, "unsupported model schema version");
    }
    auto& p = m.preprocessor;
    const auto t = j.at("transform").get<std::string>();
    if (t != "log" && t != "identity") throw Error(ErrorCode::InvalidArgument, "unknown transform");
    p.transform = t == "log" ? Transform::Log : Transform::Identity;
    read_dims(j.at("shift"), p.shift);
    read_dims(j.at("input_mean"), p.input_mean);
    read_dims(j.at("input_std"), p.input_std);
    read_dims(j.at("target_mean"), p.target_mean);
    read_dims(j.at("target_std"), p.target_std);
    for (const auto& gj : j.at("groups")) {
      GroupModel g;
      g.group = group_from_name(gj.at("group").get<std::string>());
      g.inputs = gj.at("inputs").get<std::vector<std::size_t>>();
      const auto& h = gj.at("hyperparams");
      g.hyperparams = {h.at("learning_rate").get<double>(), h.at("batch_size").get<std::size_t>(),
                       h.at("dropout").get<double>(), h.at("trunk").get<std::size_t>(),
                       h.at("head").get<std::size_t>()};
      const auto& a = gj.at("architecture");
      nn::Architecture arch{a.at("inputs").get<std::size_t>(), a.at("trunk").get<std::size_t>(),
                            a.at("head").get<std::size_t>(), a.at("outputs").get<std::size_t>()};
      if (arch.inputs != g.inputs.size() || arch.outputs != targets_of(g.group).size()) {
        throw Error(ErrorCode::ShapeMismatch, "group architecture does not match its inputs");
      }
      for (std::size_t idx : g.inputs) {
        if (idx >= kInputSize) throw Error(ErrorCode::ShapeMismatch, "input index out of range");
      }
      g.network = nn::Network(arch);
      const auto params = gj.at("parameters").get<std::vector<double>>();
      if (params.size() != arch.parameter_count()) {
        throw Error(ErrorCode::ShapeMismatch, "parameter count does not match architecture");
      }
      std::copy(params.begin(), params.end(), g.network.parameters().begin());
      m.groups.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("model file: ") + e.what());
  }
  if (m.groups.size() != kGroups.size()) {
    throw Error(ErrorCode::InvalidArgument, "model file must hold all four groups");
  }
  return m;
}

std::vector<TransferScenario> league_cohort(const FeatureStore& store, const std::string& league,
                                            Position position, Date date) {
  std::vector<TransferScenario> out;
  for (const auto& [id, tl] : store.players) {
    if (id.second != position) continue;
    const auto ref = tl.before(date);
    if (!ref || ref.epoch->context.league != league) continue;
    if (date - ref.sample->date > 365) continue;
    const auto& ctx = ref.epoch->context;
    out.push_back({id.first, position, ctx.team, ctx.league, ctx.team, ctx.league, date});
  }
  return out;
}

double percentile_strict(double value, std::span<const double> others) {
  if (others.empty()) return 50.0;
  const auto below = std::count_if(others.begin(), others.end(), [&](double v) { return v < value; });
  return 100.0 * static_cast<double>(below) / static_cast<double>(others.size());
}

std::vector<MetricVector> predict_many(std::span<const TransferScenario> scenarios,
                                       const TransferModel& model, const FeatureStore& store,
                                       const ratings::RatingHistory& history) {
  std::vector<MetricVector> out(scenarios.size());
  std::exception_ptr failure;
  std::mutex mu;
  const long n = static_cast<long>(scenarios.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = predict_metrics(model, assemble_input(scenarios[k], store, history));
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Prediction make_prediction(const TransferScenario& s, const MetricVector& values,
                           std::span<const MetricVector> cohort, const FeatureStore& store,
                           double red_minutes) {
  Prediction p;
  p.scenario = s;
  p.values = values;
  const PlayerState state = player_state(s, store);
  p.minutes = state.minutes;
  p.weight = state.weight;
  p.rag = features::rag_for(state.minutes, state.weight, red_minutes);
  p.cohort_size = cohort.size() + 1;
  std::vector<double> col(cohort.size());
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    for (std::size_t i = 0; i < cohort.size(); ++i) col[i] = cohort[i][j];
    p.percentiles[j] = percentile_strict(values[j], col);
  }
  return p;
}

Prediction predict(const TransferScenario& s, const TransferModel& model, const FeatureStore& store,
                   const ratings::RatingHistory& history, double red_minutes) {
  const MetricVector values = predict_metrics(model, assemble_input(s, store, history));
  auto cohort = league_cohort(store, s.destination_league, s.position, s.date);
  std::erase_if(cohort, [&](const TransferScenario& c) { return c.player == s.player; });
  const auto others = predict_many(cohort, model, store, history);
  return make_prediction(s, values, others, store, red_minutes);
}

}  // namespace tportal::predictor
