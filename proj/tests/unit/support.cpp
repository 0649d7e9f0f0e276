#include "support.hpp"

#include <fstream>

#include "tportal/config.hpp"

namespace tportal::testing {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tportal_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const TrainedWorld& trained_world() {
  static const TrainedWorld w = [] {
    TrainedWorld out;
    out.dir = temp_dir("trained_world");
    out.config = Config::load(fs::path(TPORTAL_SOURCE_DIR) / "config" / "small_world.json");
    const auto world = synth::generate(out.config.world);
    synth::write_world(world, out.dir);
    const auto history = ratings::replay(world.corpus, world.topology, out.config.elo).history;
    const auto stages = pipeline::build_feature_stages(world.corpus, history, out.config);
    write_file(out.dir / pipeline::files::kAdjust, adjust::to_json(stages.models));
    auto examples = predictor::build_examples(stages.store, history, out.config.examples);
    const auto trained = pipeline::train(std::move(examples), out.config, out.config.seed);
    write_file(out.dir / pipeline::files::kModel, predictor::to_json(trained.model));
    out.state = pipeline::load_state(out.dir, out.config);
    return out;
  }();
  return w;
}

ingest::Appearance appearance(const std::string& player, const std::string& team, Position pos,
                              double minutes, Metric metric, double value) {
  ingest::Appearance a{player, team, pos, minutes, {}};
  a.metrics[metric] = value;
  return a;
}

ingest::MatchRecord match(const std::string& id, const std::string& date, const std::string& league,
                          const std::string& home, const std::string& away, int hg, int ag) {
  ingest::MatchRecord m;
  m.match_id = id;
  m.date = Date::parse(date);
  m.league_id = league;
  m.home_team_id = home;
  m.away_team_id = away;
  m.home_league_id = league;
  m.away_league_id = league;
  m.home_goals = hg;
  m.away_goals = ag;
  return m;
}

}  // namespace tportal::testing
