#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tportal/features.hpp"
#include "tportal/linalg.hpp"
#include "tportal/metrics.hpp"
#include "tportal/network.hpp"
#include "tportal/ratings.hpp"

namespace tportal::predictor {

enum class TargetGroup { Shooting, Passing, Dribbling, Defending };
inline constexpr std::array<TargetGroup, 4> kGroups{TargetGroup::Shooting, TargetGroup::Passing,
                                                    TargetGroup::Dribbling, TargetGroup::Defending};

std::string_view to_string(TargetGroup g);
TargetGroup group_from_name(std::string_view name);
/// Metrics predicted by a group, in MetricVector order.
std::span<const Metric> targets_of(TargetGroup g);
TargetGroup group_of(Metric m);

/// A player at a position, moved (or not) from origin to destination on `date`.
struct TransferScenario {
  std::string player;
  Position position = Position::GK;
  std::string origin_team;
  std::string origin_league;
  std::string destination_team;
  std::string destination_league;
  Date date;

  bool is_transfer() const { return origin_team != destination_team; }
  std::string id() const;
  bool operator==(const TransferScenario&) const = default;
};

inline constexpr std::size_t kInputSize = 79;

/// Fixed layout of the model input vector.
namespace input {
inline constexpr std::size_t kPlayer = 0;
inline constexpr std::size_t kTeamOrigin = 13;
inline constexpr std::size_t kTeamDestination = 26;
inline constexpr std::size_t kTeamPositionOrigin = 39;
inline constexpr std::size_t kTeamPositionDestination = 52;
inline constexpr std::size_t kRankOrigin = 65;
inline constexpr std::size_t kRankDestination = 66;
inline constexpr std::size_t kLeagueMeanOrigin = 67;
inline constexpr std::size_t kLeagueMeanDestination = 68;
inline constexpr std::size_t kRelativeOrigin = 69;
inline constexpr std::size_t kRelativeDestination = 70;
inline constexpr std::size_t kRelativeChange = 71;
inline constexpr std::size_t kPosition = 72;
inline constexpr std::size_t kWeight = 78;
/// The first 65 entries are metric values; entry i holds metric i % 13.
inline constexpr std::size_t kMetricBlocks = 65;
}  // namespace input

struct ModelInput {
  std::array<double, kInputSize> values{};
  double operator[](std::size_t i) const { return values[i]; }
};

/// Builds the model input from state strictly before the scenario date.
/// Throws MissingEntity for an unknown player-position or team.
ModelInput assemble_input(const TransferScenario& s, const features::FeatureStore& store,
                          const ratings::RatingHistory& history);

/// Latest blended value of the player's timeline before the scenario date
/// (the first prior when the player has not played yet). Throws MissingEntity.
MetricVector baseline_predict(const TransferScenario& s, const features::FeatureStore& store);

/// Indices of `ModelInput` consumed by one group: five blocks per chosen
/// metric, plus the ability features, position one-hot and blend weight.
std::vector<std::size_t> input_indices(TargetGroup g);

struct ExampleConfig {
  /// Minutes of future play that define the target; an example needs at least this much.
  double horizon_minutes = 1000.0;
  bool include_non_transfers = true;
};

struct TrainingExample {
  TransferScenario scenario;
  ModelInput input;
  MetricVector target;
  MetricVector baseline;
  bool is_transfer = false;
};

/// Per-90 over the first `horizon` minutes of `stints` starting at `first`
/// (the last game contributes pro-rata); nullopt when fewer minutes exist.
std::optional<MetricVector> forward_per90(std::span<const features::Stint> stints,
                                          std::size_t first, double horizon);

/// Transfer examples at every change of team (target: first `horizon`
/// minutes at the new club) and stay-put examples after every `horizon`
/// minutes inside an epoch (target: the next `horizon` minutes).
std::vector<TrainingExample> build_examples(const features::FeatureStore& store,
                                            const ratings::RatingHistory& history,
                                            const ExampleConfig& cfg = {});

struct DataSplit {
  std::vector<TrainingExample> train, validation, test;
};
/// Seeded shuffle into 70/15/15.
DataSplit split_examples(std::vector<TrainingExample> examples, std::uint64_t seed);

enum class Transform { Identity, Log };

/// Input/target preprocessing. With the log transform every metric value v
/// becomes log(v + shift_j); everything is then standardized with training
/// statistics.
struct Preprocessor {
  Transform transform = Transform::Log;
  std::array<double, kMetricCount> shift{};
  std::array<double, kInputSize> input_mean{};
  std::array<double, kInputSize> input_std{};
  std::array<double, kMetricCount> target_mean{};
  std::array<double, kMetricCount> target_std{};

  static Preprocessor fit(std::span<const TrainingExample> train, Transform t = Transform::Log);

  std::array<double, kInputSize> input(const ModelInput& x) const;
  std::array<double, kMetricCount> target(const MetricVector& y) const;
  MetricVector invert(std::span<const double> z) const;
};

struct HyperParams {
  double learning_rate = 0.01;
  std::size_t batch_size = 64;
  double dropout = 0.0;
  std::size_t trunk = 32;
  std::size_t head = 16;

  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

struct TrainConfig {
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double momentum = 0.9;
  double clip_norm = 5.0;
  bool parallel_kernel = true;
};

struct TrainResult {
  nn::Network network;
  double initial_train_loss = 0.0;
  double final_train_loss = 0.0;
  double best_validation_loss = 0.0;
  std::size_t epochs = 0;
};

/// Mini-batch SGD with momentum and early stopping on validation MSE (the
/// training set stands in when `x_val` is empty). Deterministic given `seed`.
/// Throws EmptyDataset or DivergedLoss.
TrainResult train_network(const linalg::Matrix& x_train, const linalg::Matrix& y_train,
                          const linalg::Matrix& x_val, const linalg::Matrix& y_val,
                          const HyperParams& hp, const TrainConfig& cfg, std::uint64_t seed);

struct GroupModel {
  TargetGroup group = TargetGroup::Shooting;
  std::vector<std::size_t> inputs;
  HyperParams hyperparams;
  nn::Network network;
};

/// The four group networks plus preprocessing.
struct TransferModel {
  Preprocessor preprocessor;
  std::vector<GroupModel> groups;

  bool fitted() const { return groups.size() == kGroups.size(); }
};

/// Standardized design and target matrices of one group.
struct GroupData {
  linalg::Matrix x;
  linalg::Matrix y;
};
GroupData group_data(const Preprocessor& pre, TargetGroup g,
                     std::span<const TrainingExample> examples);

TrainResult train_group(const Preprocessor& pre, TargetGroup g,
                        std::span<const TrainingExample> train,
                        std::span<const TrainingExample> validation, const HyperParams& hp,
                        const TrainConfig& cfg, std::uint64_t seed);

/// Trains all four groups (in parallel), one hyperparameter set per group.
TransferModel train_model(std::span<const TrainingExample> train,
                          std::span<const TrainingExample> validation,
                          const std::array<HyperParams, 4>& hp, const TrainConfig& cfg,
                          std::uint64_t seed, Transform transform = Transform::Log);

/// Predicted per-90 values, clamped at zero. Throws UnfittedModel.
MetricVector predict_metrics(const TransferModel& model, const ModelInput& x);

/// One search dimension: a list of choices, or a [lo, hi] range sampled
/// uniformly (log-uniformly when `log_scale`).
struct Dimension {
  std::vector<double> choices;
  double lo = 0.0;
  double hi = 0.0;
  bool log_scale = false;

  static Dimension fixed(double v) { return {{v}, 0, 0, false}; }
  bool discrete() const { return !choices.empty(); }
  double sample(std::mt19937_64& rng) const;
};

struct SearchSpace {
  Dimension learning_rate{{}, 1e-3, 5e-2, true};
  Dimension batch_size{{32, 64, 128}};
  Dimension dropout{{}, 0.0, 0.3, false};
  Dimension trunk{{16, 32, 64}};
  Dimension head{{8, 16, 32}};

  /// Number of distinct configurations when every dimension is discrete.
  std::optional<std::size_t> size() const;
};

using Objective = std::function<double(const HyperParams&)>;

/// Lowest-objective configuration among `budget` candidates. Exhaustive when
/// the space is discrete and no larger than the budget, seeded random sampling
/// otherwise. Non-finite objectives never win; ties keep the earlier candidate.
HyperParams hyperparam_search(const SearchSpace& space, std::size_t budget, std::uint64_t seed,
                              const Objective& objective);

enum class Split { Transfer, NonTransfer, All };
inline constexpr std::array<Split, 3> kSplits{Split::Transfer, Split::NonTransfer, Split::All};
std::string_view to_string(Split s);

struct MetricScore {
  double mse_model = 0.0;
  double mse_baseline = 0.0;
  /// 1 - mse_model / mse_baseline.
  double improvement = 0.0;
};

struct Evaluation {
  std::array<std::array<MetricScore, kMetricCount>, 3> scores{};
  std::array<std::size_t, 3> counts{};

  const std::array<MetricScore, kMetricCount>& at(Split s) const {
    return scores[static_cast<std::size_t>(s)];
  }
  std::size_t count(Split s) const { return counts[static_cast<std::size_t>(s)]; }
  /// Mean over the 13 metrics of the per-metric improvement.
  double mean_improvement(Split s) const;
};

/// Scores model and baseline against `truth`. Throws EmptyDataset or ShapeMismatch.
Evaluation evaluate(std::span<const MetricVector> model, std::span<const MetricVector> baseline,
                    std::span<const MetricVector> truth, std::span<const bool> is_transfer);
/// Against the realized targets of `examples`.
Evaluation evaluate(const TransferModel& model, std::span<const TrainingExample> examples);

/// CSV: split,target,n,mse_model,mse_baseline,improvement_pct
void write_evaluation_csv(std::ostream& out, const Evaluation& e);

std::string to_json(const TransferModel& model);
TransferModel transfer_model_from_json(std::string_view text);

struct Prediction {
  TransferScenario scenario;
  MetricVector values;
  /// League percentile of each value among the destination cohort, 0-100.
  MetricVector percentiles;
  features::RagStatus rag = features::RagStatus::Red;
  double minutes = 0.0;
  double weight = 0.0;
  std::size_t cohort_size = 0;
};

/// Non-transfer scenarios for every player whose latest `position` sample
/// before `date` (and within the past 365 days) is in `league`.
std::vector<TransferScenario> league_cohort(const features::FeatureStore& store,
                                            const std::string& league, Position position,
                                            Date date);

/// Share of `others` strictly below `value`, as 0-100 over n - 1 where n
/// counts the subject too; 50 when the subject is alone.
double percentile_strict(double value, std::span<const double> others);

/// Raw predictions for many scenarios, computed in parallel.
std::vector<MetricVector> predict_many(std::span<const TransferScenario> scenarios,
                                       const TransferModel& model,
                                       const features::FeatureStore& store,
                                       const ratings::RatingHistory& history);

/// Wraps already computed values: percentiles against `cohort` (which must
/// not contain the subject) and the player's RAG before the scenario date.
Prediction make_prediction(const TransferScenario& s, const MetricVector& values,
                           std::span<const MetricVector> cohort,
                           const features::FeatureStore& store, double red_minutes = 500.0);

/// Prediction with destination-league percentiles and the player's RAG.
Prediction predict(const TransferScenario& s, const TransferModel& model,
                   const features::FeatureStore& store, const ratings::RatingHistory& history,
                   double red_minutes = 500.0);

}  // namespace tportal::predictor
