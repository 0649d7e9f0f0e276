#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tportal/adjustments.hpp"
#include "tportal/config.hpp"
#include "tportal/features.hpp"
#include "tportal/ingest.hpp"
#include "tportal/predictor.hpp"
#include "tportal/ratings.hpp"
#include "tportal/recruitment.hpp"
#include "tportal/synthworld.hpp"

namespace tportal::pipeline {

/// File names inside a work directory.
namespace files {
inline constexpr const char* kCorpus = "corpus.ndjson";
inline constexpr const char* kTopology = "topology.json";
inline constexpr const char* kTruth = "truth.json";
inline constexpr const char* kPlayers = "players.csv";
inline constexpr const char* kRatings = "ratings.csv";
inline constexpr const char* kFeatures = "features.ndjson";
inline constexpr const char* kAdjust = "adjust.json";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kTrainLog = "train.json";
inline constexpr const char* kEvaluation = "evaluation.csv";
inline constexpr const char* kOracleEvaluation = "evaluation_oracle.csv";
}  // namespace files

/// Falls back to one country and continent per league when no topology is given.
ratings::Topology default_topology(std::span<const ingest::MatchRecord> corpus);

/// Timelines with naive priors, the models fitted on them, and the
/// timelines rebuilt with those models.
struct FeatureStages {
  features::FeatureStore store;
  adjust::AdjustmentModels models;
};

/// Two-pass feature build. When `models` is given the fit is skipped.
FeatureStages build_feature_stages(std::span<const ingest::MatchRecord> corpus,
                                   const ratings::RatingHistory& history, const Config& cfg,
                                   std::optional<adjust::AdjustmentModels> models = std::nullopt);

struct TrainReport {
  std::array<predictor::HyperParams, 4> hyperparams;
  std::size_t train = 0, validation = 0, test = 0;
  std::size_t transfers = 0;
  std::uint64_t seed = 0;
  std::string to_json() const;
};

struct TrainOutcome {
  predictor::TransferModel model;
  predictor::DataSplit split;
  TrainReport report;
};

/// Hyperparameter search per group (when the budget allows), then the final fit.
TrainOutcome train(std::vector<predictor::TrainingExample> examples, const Config& cfg,
                   std::uint64_t seed);

/// Everything the service and the query commands read. Immutable once built.
struct PipelineState {
  std::string version;
  Config config;
  std::vector<ingest::MatchRecord> corpus;
  ratings::Topology topology;
  ratings::RatingHistory history;
  features::FeatureStore store;
  adjust::AdjustmentModels adjust;
  predictor::TransferModel model;
  recruit::MetadataProvider metadata;
  /// The day after the last match: the default date of every query.
  Date as_of;

  recruit::Sources sources() const;
};

std::vector<ingest::MatchRecord> load_corpus(const std::filesystem::path& workdir);
ratings::Topology load_topology(const std::filesystem::path& workdir,
                                std::span<const ingest::MatchRecord> corpus);

/// Loads a work directory that has been through `train`.
std::shared_ptr<const PipelineState> load_state(const std::filesystem::path& workdir,
                                                const Config& cfg);

/// FNV-1a 64-bit hash, hex encoded.
std::string fingerprint(std::initializer_list<std::string_view> parts);

}  // namespace tportal::pipeline
