#include "tportal/pipeline.hpp"

#include <exception>
#include <fstream>
#include <mutex>

#include "json.hpp"
#include "tportal/error.hpp"

namespace tportal::pipeline {

namespace fs = std::filesystem;

ratings::Topology default_topology(std::span<const ingest::MatchRecord> corpus) {
  ratings::Topology t;
  for (const auto& m : corpus) {
    for (const auto* l : {&m.home_league_id, &m.away_league_id}) {
      if (!t.find(*l)) t.add({*l, *l, *l});
    }
  }
  return t;
}

FeatureStages build_feature_stages(std::span<const ingest::MatchRecord> corpus,
                                   const ratings::RatingHistory& history, const Config& cfg,
                                   std::optional<adjust::AdjustmentModels> models) {
  FeatureStages out;
  if (!models) {
    const adjust::AdjustmentPriors naive(history, {});
    const auto first = features::build_features(corpus, cfg.window, naive);
    models = adjust::fit_adjustments(first, history);
  }
  out.models = *models;
  const adjust::AdjustmentPriors fitted(history, out.models);
  out.store = features::build_features(corpus, cfg.window, fitted);
  return out;
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["examples"] = {{"train", train}, {"validation", validation}, {"test", test},
                   {"transfers", transfers}};
  nlohmann::ordered_json hp = nlohmann::ordered_json::object();
  for (std::size_t g = 0; g < predictor::kGroups.size(); ++g) {
    const auto& h = hyperparams[g];
    hp[std::string(predictor::to_string(predictor::kGroups[g]))] = {
        {"learning_rate", h.learning_rate}, {"batch_size", h.batch_size}, {"dropout", h.dropout},
        {"trunk", h.trunk}, {"head", h.head}};
  }
  j["hyperparams"] = hp;
  return j.dump(2);
}

TrainOutcome train(std::vector<predictor::TrainingExample> examples, const Config& cfg,
                   std::uint64_t seed) {
  TrainOutcome out;
  for (const auto& ex : examples) out.report.transfers += ex.is_transfer ? 1 : 0;
  out.split = predictor::split_examples(std::move(examples), seed);
  const auto& sp = out.split;
  if (sp.train.empty()) throw Error(ErrorCode::EmptyDataset, "no training examples");

  std::array<predictor::HyperParams, 4> hp;
  hp.fill(cfg.hyperparams);
  if (cfg.search_budget > 0) {
    const auto pre = predictor::Preprocessor::fit(sp.train, cfg.transform);
    std::exception_ptr failure;
    std::mutex mu;
    const long n = static_cast<long>(predictor::kGroups.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) {
      const auto g = static_cast<std::size_t>(i);
      try {
        const auto group = predictor::kGroups[g];
        const std::uint64_t gseed = seed * 31 + g;
        hp[g] = predictor::hyperparam_search(
            cfg.search, cfg.search_budget, gseed, [&](const predictor::HyperParams& h) {
              return predictor::train_group(pre, group, sp.train, sp.validation, h, cfg.train,
                                            gseed)
                  .best_validation_loss;
            });
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  out.model = predictor::train_model(sp.train, sp.validation, hp, cfg.train, seed, cfg.transform);
  out.report.hyperparams = hp;
  out.report.train = sp.train.size();
  out.report.validation = sp.validation.size();
  out.report.test = sp.test.size();
  out.report.seed = seed;
  return out;
}

recruit::Sources PipelineState::sources() const {
  return {store, history, model, metadata, config.window.red_minutes};
}

std::vector<ingest::MatchRecord> load_corpus(const fs::path& workdir) {
  const fs::path nd = workdir / files::kCorpus;
  if (fs::exists(nd)) {
    std::ifstream in(nd, std::ios::binary);
    return ingest::parse_corpus(in, ingest::CorpusFormat::Ndjson);
  }
  const fs::path csv = workdir / "corpus.csv";
  if (fs::exists(csv)) {
    std::ifstream in(csv, std::ios::binary);
    return ingest::parse_corpus(in, ingest::CorpusFormat::Csv);
  }
  throw Error(ErrorCode::Io, "no corpus.ndjson or corpus.csv in " + workdir.string());
}

ratings::Topology load_topology(const fs::path& workdir,
                                std::span<const ingest::MatchRecord> corpus) {
  const fs::path p = workdir / files::kTopology;
  if (fs::exists(p)) return ratings::Topology::from_json(read_file(p));
  return default_topology(corpus);
}

std::string fingerprint(std::initializer_list<std::string_view> parts) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::string_view part : parts) {
    for (unsigned char c : part) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::shared_ptr<const PipelineState> load_state(const fs::path& workdir, const Config& cfg) {
  auto s = std::make_shared<PipelineState>();
  s->config = cfg;
  const std::string corpus_text = read_file(workdir / files::kCorpus);
  s->corpus = ingest::parse_corpus(corpus_text, ingest::CorpusFormat::Ndjson);
  if (s->corpus.empty()) throw Error(ErrorCode::NoData, "empty corpus");
  s->topology = load_topology(workdir, s->corpus);
  s->history = ratings::replay(s->corpus, s->topology, cfg.elo).history;

  std::string adjust_text;
  std::optional<adjust::AdjustmentModels> models;
  if (fs::exists(workdir / files::kAdjust)) {
    adjust_text = read_file(workdir / files::kAdjust);
    models = adjust::adjustment_models_from_json(adjust_text);
  }
  auto stages = build_feature_stages(s->corpus, s->history, cfg, models);
  s->store = std::move(stages.store);
  s->adjust = std::move(stages.models);

  if (!fs::exists(workdir / files::kModel)) {
    throw Error(ErrorCode::UnfittedModel, "no model.json in " + workdir.string() + "; run train first");
  }
  const std::string model_text = read_file(workdir / files::kModel);
  s->model = predictor::transfer_model_from_json(model_text);

  if (fs::exists(workdir / files::kPlayers)) {
    std::ifstream in(workdir / files::kPlayers, std::ios::binary);
    s->metadata = recruit::MetadataProvider::read_csv(in);
  }
  s->as_of = s->corpus.back().date + 1;
  s->version = fingerprint({corpus_text, s->topology.to_json(), adjust_text, model_text,
                            cfg.to_json()});
  return s;
}

}  // namespace tportal::pipeline
