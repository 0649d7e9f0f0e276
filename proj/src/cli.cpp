#include "tportal/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tportal/config.hpp"
#include "tportal/error.hpp"
#include "tportal/pipeline.hpp"
#include "tportal/service.hpp"

namespace tportal::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
namespace files = pipeline::files;

struct Common {
  std::string workdir = ".";
  std::string config;
  std::optional<std::uint64_t> seed;

  Config load() const {
    Config cfg = config.empty() ? Config{} : Config::load(config);
    if (seed) cfg.seed = *seed;
    return cfg;
  }
  fs::path dir() const { return fs::path(workdir); }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--workdir", c.workdir, "Work directory holding the pipeline artifacts");
  cmd->add_option("--config", c.config, "JSON configuration file");
  cmd->add_option("--seed", c.seed, "Overrides the configured seed");
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  return out;
}

ratings::RatingHistory replay_history(const std::vector<ingest::MatchRecord>& corpus,
                                      const fs::path& dir, const Config& cfg) {
  const auto topology = pipeline::load_topology(dir, corpus);
  return ratings::replay(corpus, topology, cfg.elo).history;
}

void write_features(const fs::path& dir, const features::FeatureStore& store, const Config& cfg,
                    bool full, const std::string& filter) {
  auto out = open_out(dir / files::kFeatures);
  features::write_snapshot(out, store, cfg.window, full, filter);
}

std::vector<predictor::TrainingExample> examples_for(const fs::path& dir, const Config& cfg) {
  const auto corpus = pipeline::load_corpus(dir);
  const auto history = replay_history(corpus, dir, cfg);
  std::optional<adjust::AdjustmentModels> models;
  if (fs::exists(dir / files::kAdjust)) {
    models = adjust::adjustment_models_from_json(read_file(dir / files::kAdjust));
  }
  const auto stages = pipeline::build_feature_stages(corpus, history, cfg, models);
  return predictor::build_examples(stages.store, history, cfg.examples);
}

/// Routes one request through the gateway so the CLI and the API agree.
int through_service(const Common& c, gateway::Request req, std::ostream& out, std::ostream& err) {
  const Config cfg = c.load();
  gateway::Service service(pipeline::load_state(c.dir(), cfg));
  const auto res = service.handle(req);
  if (res.status != 200) {
    err << res.body << '\n';
    return 1;
  }
  out << res.body << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transfer performance forecasting"};
  app.require_subcommand(1);

  // ingest
  Common ingest_c;
  std::string input, format = "ndjson", topology_in;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a corpus and store it canonically");
  add_common(ingest_cmd, ingest_c);
  ingest_cmd->add_option("--input", input, "Corpus file")->required();
  ingest_cmd->add_option("--format", format, "csv or ndjson")
      ->check(CLI::IsMember({"csv", "ndjson"}));
  ingest_cmd->add_option("--topology", topology_in, "League topology JSON to copy alongside");

  // synth
  Common synth_c;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic world with known truth");
  add_common(synth_cmd, synth_c);

  // rate
  Common rate_c;
  auto* rate_cmd = app.add_subcommand("rate", "Replay ratings and write daily power rankings");
  add_common(rate_cmd, rate_c);

  // features
  Common feat_c;
  bool full_history = false;
  std::string filter;
  auto* feat_cmd = app.add_subcommand("features", "Build rolling features with fallback priors");
  add_common(feat_cmd, feat_c);
  feat_cmd->add_flag("--full-history", full_history, "Emit every sample, not just epoch ends");
  feat_cmd->add_option("--filter", filter, "Keep entities whose key contains this text");

  // fit-adjust
  Common adj_c;
  bool adj_full = false;
  auto* adj_cmd = app.add_subcommand("fit-adjust", "Fit the adjustment models and rebuild features");
  add_common(adj_cmd, adj_c);
  adj_cmd->add_flag("--full-history", adj_full, "Emit every sample, not just epoch ends");

  // train
  Common train_c;
  auto* train_cmd = app.add_subcommand("train", "Train the transfer model");
  add_common(train_cmd, train_c);

  // evaluate
  Common eval_c;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score the model on the held-out test split");
  add_common(eval_cmd, eval_c);

  // predict
  Common pred_c;
  std::string player, position, destination, date;
  auto* pred_cmd = app.add_subcommand("predict", "Forecast one player at a destination team");
  add_common(pred_cmd, pred_c);
  pred_cmd->add_option("--player", player)->required();
  pred_cmd->add_option("--position", position)->required();
  pred_cmd->add_option("--destination", destination)->required();
  pred_cmd->add_option("--date", date, "Scenario date (defaults to the day after the last match)");

  // shortlist
  Common sl_c;
  std::string profile, sl_dest, sl_pos, sl_out, sl_date;
  std::size_t k = 10;
  std::optional<double> max_age, max_value, min_minutes, max_rating, max_raw_rating;
  std::vector<std::string> leagues;
  auto* sl_cmd = app.add_subcommand("shortlist", "Rank candidates for a destination and role");
  add_common(sl_cmd, sl_c);
  sl_cmd->add_option("--profile", profile, "Weight profile JSON")->required();
  sl_cmd->add_option("--destination", sl_dest)->required();
  sl_cmd->add_option("--position", sl_pos)->required();
  sl_cmd->add_option("-k,--top", k, "Entries to return");
  sl_cmd->add_option("--max-age", max_age);
  sl_cmd->add_option("--max-value", max_value);
  sl_cmd->add_option("--min-minutes", min_minutes);
  sl_cmd->add_option("--max-team-rating", max_rating, "Ceiling on the 0-100 Power Ranking");
  sl_cmd->add_option("--max-team-raw-rating", max_raw_rating, "Ceiling on the raw rating sum");
  sl_cmd->add_option("--league", leagues, "Allowed origin leagues");
  sl_cmd->add_option("--date", sl_date);
  sl_cmd->add_option("--out", sl_out, "CSV output path (default: stdout)");

  // swarm
  Common sw_c;
  std::string sw_league, sw_pos, sw_metric, sw_player, sw_dest;
  auto* sw_cmd = app.add_subcommand("swarm", "Percentile swarm of one metric in a league");
  add_common(sw_cmd, sw_c);
  sw_cmd->add_option("--league", sw_league)->required();
  sw_cmd->add_option("--position", sw_pos)->required();
  sw_cmd->add_option("--metric", sw_metric)->required();
  sw_cmd->add_option("--player", sw_player)->required();
  sw_cmd->add_option("--destination", sw_dest);

  // serve
  Common srv_c;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* srv_cmd = app.add_subcommand("serve", "Serve the JSON API");
  add_common(srv_cmd, srv_c);
  srv_cmd->add_option("--host", host);
  srv_cmd->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*ingest_cmd) {
      const auto& c = ingest_c;
      std::ifstream in(input, std::ios::binary);
      if (!in) throw Error(ErrorCode::Io, "cannot read " + input);
      const auto corpus = ingest::parse_corpus(
          in, format == "csv" ? ingest::CorpusFormat::Csv : ingest::CorpusFormat::Ndjson);
      fs::create_directories(c.dir());
      auto o = open_out(c.dir() / files::kCorpus);
      ingest::write_ndjson(o, corpus);
      if (!topology_in.empty()) {
        const auto topo = ratings::Topology::from_json(read_file(topology_in));
        write_file(c.dir() / files::kTopology, topo.to_json());
      }
      out << ordered_json{{"matches", corpus.size()}}.dump() << '\n';
    } else if (*synth_cmd) {
      Config cfg = synth_c.load();
      if (synth_c.seed) cfg.world.seed = *synth_c.seed;
      const auto world = synth::generate(cfg.world);
      synth::write_world(world, synth_c.dir());
      out << ordered_json{{"matches", world.corpus.size()},
                          {"players", world.players.size()},
                          {"transfers", world.transfers}}
                 .dump()
          << '\n';
    } else if (*rate_cmd) {
      const Config cfg = rate_c.load();
      const auto corpus = pipeline::load_corpus(rate_c.dir());
      const auto history = replay_history(corpus, rate_c.dir(), cfg);
      auto o = open_out(rate_c.dir() / files::kRatings);
      history.write_csv(o);
      out << ordered_json{{"snapshots", history.snapshots().size()}}.dump() << '\n';
    } else if (*feat_cmd) {
      const Config cfg = feat_c.load();
      const auto corpus = pipeline::load_corpus(feat_c.dir());
      const auto history = replay_history(corpus, feat_c.dir(), cfg);
      const adjust::AdjustmentPriors naive(history, {});
      const auto store = features::build_features(corpus, cfg.window, naive);
      write_features(feat_c.dir(), store, cfg, full_history, filter);
      out << ordered_json{{"teams", store.teams.size()},
                          {"team_positions", store.team_positions.size()},
                          {"players", store.players.size()}}
                 .dump()
          << '\n';
    } else if (*adj_cmd) {
      const Config cfg = adj_c.load();
      const auto corpus = pipeline::load_corpus(adj_c.dir());
      const auto history = replay_history(corpus, adj_c.dir(), cfg);
      const auto stages = pipeline::build_feature_stages(corpus, history, cfg);
      write_file(adj_c.dir() / files::kAdjust, adjust::to_json(stages.models));
      write_features(adj_c.dir(), stages.store, cfg, adj_full, {});
      out << ordered_json{{"team_rows", stages.models.team_rows},
                          {"player_rows", stages.models.player_rows},
                          {"team_fitted", stages.models.team.fitted},
                          {"player_fitted", stages.models.player.fitted}}
                 .dump()
          << '\n';
    } else if (*train_cmd) {
      const Config cfg = train_c.load();
      auto examples = examples_for(train_c.dir(), cfg);
      const auto outcome = pipeline::train(std::move(examples), cfg, cfg.seed);
      write_file(train_c.dir() / files::kModel, predictor::to_json(outcome.model));
      write_file(train_c.dir() / files::kTrainLog, outcome.report.to_json());
      out << outcome.report.to_json() << '\n';
    } else if (*eval_cmd) {
      const fs::path dir = eval_c.dir();
      Config cfg = eval_c.load();
      const auto log = json::parse(read_file(dir / files::kTrainLog));
      const auto seed = eval_c.seed ? *eval_c.seed : log.at("seed").get<std::uint64_t>();
      const auto model = predictor::transfer_model_from_json(read_file(dir / files::kModel));
      auto split = predictor::split_examples(examples_for(dir, cfg), seed);
      const auto& test = split.test;
      const auto e = predictor::evaluate(model, test);
      {
        auto o = open_out(dir / files::kEvaluation);
        predictor::write_evaluation_csv(o, e);
      }
      ordered_json summary;
      summary["test"] = test.size();
      summary["transfer_improvement"] = e.mean_improvement(predictor::Split::Transfer);
      summary["non_transfer_improvement"] = e.mean_improvement(predictor::Split::NonTransfer);
      if (fs::exists(dir / files::kTruth)) {
        const auto truth = synth::Truth::from_json(read_file(dir / files::kTruth));
        std::vector<predictor::TransferScenario> scenarios;
        std::vector<MetricVector> pred, base;
        std::vector<char> flags;
        for (const auto& ex : test) {
          scenarios.push_back(ex.scenario);
          pred.push_back(predictor::predict_metrics(model, ex.input));
          base.push_back(ex.baseline);
          flags.push_back(ex.is_transfer);
        }
        const auto mu = synth::oracle_targets(truth, scenarios);
        std::unique_ptr<bool[]> is_transfer(new bool[flags.size()]);
        for (std::size_t i = 0; i < flags.size(); ++i) is_transfer[i] = flags[i] != 0;
        const auto oe = predictor::evaluate(pred, base, mu,
                                            std::span<const bool>(is_transfer.get(), flags.size()));
        auto o = open_out(dir / files::kOracleEvaluation);
        predictor::write_evaluation_csv(o, oe);
        summary["oracle_transfer_improvement"] = oe.mean_improvement(predictor::Split::Transfer);
      }
      out << summary.dump() << '\n';
    } else if (*pred_cmd) {
      json body{{"player", player}, {"position", position}, {"destination_team", destination}};
      if (!date.empty()) body["date"] = date;
      return through_service(pred_c, {"POST", "/predict", {}, body.dump()}, out, err);
    } else if (*sl_cmd) {
      const Config cfg = sl_c.load();
      const auto state = pipeline::load_state(sl_c.dir(), cfg);
      recruit::ShortlistRequest req;
      req.destination_team = sl_dest;
      const auto pos = position_from_name(sl_pos);
      if (!pos) throw Error(ErrorCode::UnknownPosition, "unknown position '" + sl_pos + "'");
      req.position = *pos;
      req.weights = recruit::WeightProfile::from_json(read_file(profile));
      req.filters.max_age = max_age;
      req.filters.max_value = max_value;
      req.filters.min_position_minutes = min_minutes;
      req.filters.max_team_rating = max_rating;
      req.filters.max_team_raw_rating = max_raw_rating;
      req.filters.allowed_leagues = leagues;
      req.k = k;
      req.date = sl_date.empty() ? state->as_of : Date::parse(sl_date);
      const auto entries = recruit::build_shortlist(req, state->sources());
      if (sl_out.empty()) {
        recruit::write_shortlist_csv(out, entries);
      } else {
        auto o = open_out(sl_out);
        recruit::write_shortlist_csv(o, entries);
      }
    } else if (*sw_cmd) {
      gateway::Request req{"GET", "/swarm", {}, {}};
      req.query = {{"league", sw_league}, {"position", sw_pos}, {"metric", sw_metric},
                   {"player", sw_player}};
      if (!sw_dest.empty()) req.query["destination_team"] = sw_dest;
      return through_service(sw_c, req, out, err);
    } else if (*srv_cmd) {
      const Config cfg = srv_c.load();
      const fs::path dir = srv_c.dir();
      gateway::Service service(pipeline::load_state(dir, cfg), [dir, cfg] {
        return pipeline::load_state(dir, cfg);
      });
      gateway::HttpServer server(service);
      err << "listening on " << host << ':' << port << '\n';
      if (!server.listen(host, port)) throw Error(ErrorCode::Io, "cannot listen on port");
    }
  } catch (const Error& e) {
    err << ordered_json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump()
        << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << ordered_json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace tportal::cli
