#include "tportal/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tportal/error.hpp"

namespace tportal {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

template <typename T>
void get(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

predictor::Dimension read_dimension(const json& j) {
  predictor::Dimension d;
  if (j.is_number()) return predictor::Dimension::fixed(j.get<double>());
  if (j.contains("choices")) {
    d.choices = j.at("choices").get<std::vector<double>>();
    if (d.choices.empty()) throw Error(ErrorCode::InvalidArgument, "empty choices");
    return d;
  }
  d.lo = j.at("lo").get<double>();
  d.hi = j.at("hi").get<double>();
  d.log_scale = j.value("log", false);
  if (!(d.hi >= d.lo) || (d.log_scale && !(d.lo > 0.0))) {
    throw Error(ErrorCode::InvalidArgument, "invalid search range");
  }
  return d;
}

ordered_json write_dimension(const predictor::Dimension& d) {
  if (d.discrete()) return {{"choices", d.choices}};
  return {{"lo", d.lo}, {"hi", d.hi}, {"log", d.log_scale}};
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

Config Config::from_json(std::string_view text) {
  Config c;
  try {
    const auto j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    get(j, "seed", c.seed);
    if (j.contains("elo")) {
      const auto& e = j.at("elo");
      get(e, "base_team_elo", c.elo.base_team_elo);
      get(e, "base_group_elo", c.elo.base_group_elo);
      get(e, "k_team", c.elo.k_team);
      get(e, "k_group", c.elo.k_group);
      get(e, "home_advantage", c.elo.home_advantage);
      get(e, "draw_score", c.elo.draw_score);
    }
    if (j.contains("window")) {
      const auto& w = j.at("window");
      get(w, "player_window_minutes", c.window.player_window_minutes);
      get(w, "team_position_window_minutes", c.window.team_position_window_minutes);
      get(w, "team_window_minutes", c.window.team_window_minutes);
      get(w, "prior_constant", c.window.prior_constant);
      get(w, "red_minutes", c.window.red_minutes);
    }
    if (j.contains("examples")) {
      get(j.at("examples"), "horizon_minutes", c.examples.horizon_minutes);
      get(j.at("examples"), "include_non_transfers", c.examples.include_non_transfers);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      get(t, "max_epochs", c.train.max_epochs);
      get(t, "patience", c.train.patience);
      get(t, "momentum", c.train.momentum);
      get(t, "clip_norm", c.train.clip_norm);
      get(t, "parallel_kernel", c.train.parallel_kernel);
      std::string transform = "log";
      get(t, "transform", transform);
      if (transform != "log" && transform != "identity") {
        throw Error(ErrorCode::InvalidArgument, "transform must be 'log' or 'identity'");
      }
      c.transform = transform == "log" ? predictor::Transform::Log : predictor::Transform::Identity;
    }
    if (j.contains("hyperparams")) {
      const auto& h = j.at("hyperparams");
      get(h, "learning_rate", c.hyperparams.learning_rate);
      get(h, "batch_size", c.hyperparams.batch_size);
      get(h, "dropout", c.hyperparams.dropout);
      get(h, "trunk", c.hyperparams.trunk);
      get(h, "head", c.hyperparams.head);
    }
    if (j.contains("search")) {
      const auto& s = j.at("search");
      get(s, "budget", c.search_budget);
      if (s.contains("learning_rate")) c.search.learning_rate = read_dimension(s.at("learning_rate"));
      if (s.contains("batch_size")) c.search.batch_size = read_dimension(s.at("batch_size"));
      if (s.contains("dropout")) c.search.dropout = read_dimension(s.at("dropout"));
      if (s.contains("trunk")) c.search.trunk = read_dimension(s.at("trunk"));
      if (s.contains("head")) c.search.head = read_dimension(s.at("head"));
    }
    if (j.contains("verdict")) {
      const auto& v = j.at("verdict");
      get(v, "hot_percentile", c.verdict.hot_percentile);
      get(v, "not_percentile", c.verdict.not_percentile);
      get(v, "hot_retention", c.verdict.hot_retention);
      get(v, "not_retention", c.verdict.not_retention);
    }
    if (j.contains("world")) c.world = synth::WorldConfig::from_json(j.at("world").dump());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  c.window.validate();
  c.hyperparams.validate();
  c.world.validate();
  return c;
}

Config Config::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

std::string Config::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["elo"] = {{"base_team_elo", elo.base_team_elo},   {"base_group_elo", elo.base_group_elo},
              {"k_team", elo.k_team},                 {"k_group", elo.k_group},
              {"home_advantage", elo.home_advantage}, {"draw_score", elo.draw_score}};
  j["window"] = {{"player_window_minutes", window.player_window_minutes},
                 {"team_position_window_minutes", window.team_position_window_minutes},
                 {"team_window_minutes", window.team_window_minutes},
                 {"prior_constant", window.prior_constant},
                 {"red_minutes", window.red_minutes}};
  j["examples"] = {{"horizon_minutes", examples.horizon_minutes},
                   {"include_non_transfers", examples.include_non_transfers}};
  j["train"] = {{"max_epochs", train.max_epochs},
                {"patience", train.patience},
                {"momentum", train.momentum},
                {"clip_norm", train.clip_norm},
                {"parallel_kernel", train.parallel_kernel},
                {"transform", transform == predictor::Transform::Log ? "log" : "identity"}};
  j["hyperparams"] = {{"learning_rate", hyperparams.learning_rate},
                      {"batch_size", hyperparams.batch_size},
                      {"dropout", hyperparams.dropout},
                      {"trunk", hyperparams.trunk},
                      {"head", hyperparams.head}};
  j["search"] = {{"budget", search_budget},
                 {"learning_rate", write_dimension(search.learning_rate)},
                 {"batch_size", write_dimension(search.batch_size)},
                 {"dropout", write_dimension(search.dropout)},
                 {"trunk", write_dimension(search.trunk)},
                 {"head", write_dimension(search.head)}};
  j["verdict"] = {{"hot_percentile", verdict.hot_percentile},
                  {"not_percentile", verdict.not_percentile},
                  {"hot_retention", verdict.hot_retention},
                  {"not_retention", verdict.not_retention}};
  j["world"] = ordered_json::parse(world.to_json());
  return j.dump(2);
}

}  // namespace tportal
