#include "tportal/service.hpp"

#include <regex>

#include "httplib.h"
#include "json.hpp"
#include "tportal/error.hpp"
#include "tportal/text.hpp"

namespace tportal::gateway {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using pipeline::PipelineState;

ordered_json metrics_json(const MetricVector& v) {
  ordered_json j = ordered_json::object();
  for (std::size_t i = 0; i < kMetricCount; ++i) j[std::string(kMetricNames[i])] = v[i];
  return j;
}

ordered_json scenario_json(const predictor::TransferScenario& s) {
  return {{"player_id", s.player},
          {"position", std::string(name_of(s.position))},
          {"origin_team", s.origin_team},
          {"origin_league", s.origin_league},
          {"destination_team", s.destination_team},
          {"destination_league", s.destination_league},
          {"date", s.date.to_string()},
          {"is_transfer", s.is_transfer()}};
}

ordered_json prediction_json(const predictor::Prediction& p) {
  return {{"scenario", scenario_json(p.scenario)},
          {"metrics", metrics_json(p.values)},
          {"percentiles", metrics_json(p.percentiles)},
          {"rag", std::string(features::to_string(p.rag))},
          {"minutes", p.minutes},
          {"weight", p.weight},
          {"cohort_size", p.cohort_size}};
}

Response ok(ordered_json body, const std::string& version) {
  ordered_json out;
  out["version"] = version;
  for (auto& [k, v] : body.items()) out[k] = std::move(v);
  return {200, out.dump(), version};
}

Response fail(int status, std::string_view code, const std::string& message,
              const std::string& version) {
  ordered_json out;
  out["version"] = version;
  out["error"] = std::string(code);
  out["message"] = message;
  return {status, out.dump(), version};
}

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); }

const json& need(const json& body, const char* key, json::value_t type) {
  if (!body.contains(key)) bad(std::string("missing field '") + key + "'");
  const auto& v = body.at(key);
  const bool number = type == json::value_t::number_float && v.is_number();
  if (!number && v.type() != type) bad(std::string("field '") + key + "' has the wrong type");
  return v;
}

void only(const json& body, std::initializer_list<std::string_view> allowed) {
  if (!body.is_object()) bad("request body must be a JSON object");
  for (const auto& [k, _] : body.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      bad("unknown field '" + k + "'");
    }
  }
}

json parse_body(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("malformed JSON: ") + e.what());
  }
}

Position position_arg(const std::string& s) {
  const auto p = position_from_name(s);
  if (!p) throw Error(ErrorCode::InvalidArgument, "unknown position '" + s + "'");
  return *p;
}

Date date_arg(const PipelineState& st, const json& body) {
  if (!body.contains("date")) return st.as_of;
  return Date::parse(need(body, "date", json::value_t::string).get<std::string>());
}

std::string league_of(const PipelineState& st, const std::string& team, Date date) {
  const auto& snap = st.history.before(date);
  auto it = snap.league.find(team);
  if (it == snap.league.end()) throw Error(ErrorCode::MissingEntity, "unknown team '" + team + "'");
  return it->second;
}

/// The player's current context at a position.
features::Context current_context(const PipelineState& st, const std::string& player, Position pos,
                                  Date date) {
  const auto* tl = st.store.player(player, pos);
  if (!tl) {
    throw Error(ErrorCode::MissingEntity,
                "unknown player '" + player + "' at " + std::string(name_of(pos)));
  }
  if (auto ref = tl->before(date)) return ref.epoch->context;
  return tl->epochs().front().context;
}

predictor::TransferScenario make_scenario(const PipelineState& st, const std::string& player,
                                          Position pos, const std::string& destination, Date date) {
  const auto ctx = current_context(st, player, pos, date);
  const std::string dest = destination.empty() ? ctx.team : destination;
  return {player, pos, ctx.team, ctx.league, dest, league_of(st, dest, date), date};
}

std::string query(const Request& r, const char* key, bool required = true) {
  auto it = r.query.find(key);
  if (it == r.query.end() || it->second.empty()) {
    if (required) bad(std::string("missing query parameter '") + key + "'");
    return {};
  }
  return it->second;
}

Response players(const PipelineState& st, const Request& r) {
  const std::string league = query(r, "league", false);
  const std::string team = query(r, "team", false);
  const std::string pos_s = query(r, "position", false);
  std::optional<Position> pos;
  if (!pos_s.empty()) pos = position_arg(pos_s);
  long long limit = 1000;
  if (const std::string l = query(r, "limit", false); !l.empty()) {
    if (!parse_integer(l, limit) || limit <= 0) bad("limit must be a positive integer");
  }
  const Date date = st.as_of;
  ordered_json list = ordered_json::array();
  for (const auto& [id, tl] : st.store.players) {
    if (pos && id.second != *pos) continue;
    const auto ref = tl.before(date);
    if (!ref || date - ref.sample->date > 365) continue;
    const auto& ctx = ref.epoch->context;
    if (!league.empty() && ctx.league != league) continue;
    if (!team.empty() && ctx.team != team) continue;
    ordered_json p;
    p["player_id"] = id.first;
    p["position"] = std::string(name_of(id.second));
    p["team"] = ctx.team;
    p["league"] = ctx.league;
    p["minutes_365"] = recruit::recent_minutes(tl, date);
    p["rag"] = std::string(features::to_string(
        features::rag_for(ref.sample->cum_minutes, ref.sample->weight, st.config.window.red_minutes)));
    if (const auto* meta = st.metadata.find(id.first)) {
      p["name"] = meta->name;
      p["age"] = recruit::age_years(meta->birth_date, date);
      p["value"] = meta->value;
    }
    list.push_back(std::move(p));
    if (static_cast<long long>(list.size()) >= limit) break;
  }
  return ok({{"as_of", date.to_string()}, {"players", std::move(list)}}, st.version);
}

Response predict(const PipelineState& st, const Request& r) {
  const json body = parse_body(r.body);
  only(body, {"player", "position", "destination_team", "date"});
  const auto player = need(body, "player", json::value_t::string).get<std::string>();
  const Position pos = position_arg(need(body, "position", json::value_t::string).get<std::string>());
  const auto dest = need(body, "destination_team", json::value_t::string).get<std::string>();
  const Date date = date_arg(st, body);
  const auto s = make_scenario(st, player, pos, dest, date);
  const auto p = predictor::predict(s, st.model, st.store, st.history, st.config.window.red_minutes);
  return ok({{"prediction", prediction_json(p)}}, st.version);
}

recruit::FilterSet read_filters(const json& f) {
  only(f, {"max_age", "max_value", "min_position_minutes", "allowed_positions", "allowed_leagues",
           "max_team_rating", "max_team_raw_rating"});
  recruit::FilterSet out;
  auto num = [&](const char* key, std::optional<double>& field) {
    if (f.contains(key)) field = need(f, key, json::value_t::number_float).get<double>();
  };
  num("max_age", out.max_age);
  num("max_value", out.max_value);
  num("min_position_minutes", out.min_position_minutes);
  num("max_team_rating", out.max_team_rating);
  num("max_team_raw_rating", out.max_team_raw_rating);
  if (f.contains("allowed_positions")) {
    for (const auto& p : need(f, "allowed_positions", json::value_t::array)) {
      if (!p.is_string()) bad("allowed_positions must hold strings");
      out.allowed_positions.push_back(position_arg(p.get<std::string>()));
    }
  }
  if (f.contains("allowed_leagues")) {
    for (const auto& l : need(f, "allowed_leagues", json::value_t::array)) {
      if (!l.is_string()) bad("allowed_leagues must hold strings");
      out.allowed_leagues.push_back(l.get<std::string>());
    }
  }
  return out;
}

Response shortlist(const PipelineState& st, const Request& r) {
  const json body = parse_body(r.body);
  only(body, {"destination", "position", "weights", "filters", "k", "date"});
  recruit::ShortlistRequest req;
  req.destination_team = need(body, "destination", json::value_t::string).get<std::string>();
  req.position = position_arg(need(body, "position", json::value_t::string).get<std::string>());
  const auto& w = need(body, "weights", json::value_t::object);
  req.weights = recruit::WeightProfile::from_json(json{{"weights", w}}.dump());
  if (body.contains("filters")) req.filters = read_filters(need(body, "filters", json::value_t::object));
  if (body.contains("k")) {
    const auto& k = body.at("k");
    if (!k.is_number_integer() || k.get<long long>() < 1) bad("k must be a positive integer");
    req.k = k.get<std::size_t>();
  }
  req.date = date_arg(st, body);
  const auto entries = recruit::build_shortlist(req, st.sources());
  ordered_json list = ordered_json::array();
  for (const auto& e : entries) {
    list.push_back({{"player_id", e.player_id},
                    {"name", e.name},
                    {"score", e.score},
                    {"team", e.team},
                    {"league", e.league},
                    {"age", e.age ? ordered_json(*e.age) : ordered_json(nullptr)},
                    {"value", e.value ? ordered_json(*e.value) : ordered_json(nullptr)},
                    {"prediction", prediction_json(e.prediction)}});
  }
  return ok({{"entries", std::move(list)}}, st.version);
}

Response swarm(const PipelineState& st, const Request& r) {
  const std::string league = query(r, "league");
  const Position pos = position_arg(query(r, "position"));
  const std::string metric_s = query(r, "metric");
  const auto metric = metric_from_name(metric_s);
  if (!metric) bad("unknown metric '" + metric_s + "'");
  const std::string player = query(r, "player");
  const std::string dest = query(r, "destination_team", false);
  Date date = st.as_of;
  if (const std::string d = query(r, "date", false); !d.empty()) date = Date::parse(d);
  const auto s = make_scenario(st, player, pos, dest, date);
  const auto d = recruit::swarm(league, pos, *metric, s, st.sources());
  return ok({{"swarm", ordered_json::parse(recruit::to_json(d))}}, st.version);
}

Response rating_history(const PipelineState& st, const std::string& team) {
  ordered_json list = ordered_json::array();
  for (const auto& snap : st.history.snapshots()) {
    auto it = snap.scores.find(team);
    if (it == snap.scores.end()) continue;
    list.push_back({{"date", snap.date.to_string()},
                    {"league", snap.league.at(team)},
                    {"raw", snap.raw.at(team)},
                    {"scaled", it->second}});
  }
  if (list.empty()) throw Error(ErrorCode::MissingEntity, "unknown team '" + team + "'");
  return ok({{"team", team}, {"history", std::move(list)}}, st.version);
}

}  // namespace

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::MalformedRow:
    case ErrorCode::UnknownPosition:
    case ErrorCode::AllZeroWeights:
    case ErrorCode::ShapeMismatch:
      return 400;
    case ErrorCode::MissingEntity:
    case ErrorCode::UnknownTeam:
      return 404;
    case ErrorCode::EmptyAfterFilters:
    case ErrorCode::EmptyCohort:
      return 422;
    default:
      return 500;
  }
}

Service::Service(std::shared_ptr<const PipelineState> state, Loader loader)
    : state_(std::move(state)), loader_(std::move(loader)) {
  if (!state_) throw Error(ErrorCode::InvalidArgument, "service needs a pipeline state");
}

std::shared_ptr<const PipelineState> Service::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

void Service::replace(std::shared_ptr<const PipelineState> next) {
  if (!next) throw Error(ErrorCode::InvalidArgument, "null pipeline state");
  std::lock_guard lock(mu_);
  state_ = std::move(next);
}

Response Service::handle(const Request& req) {
  const auto st = state();
  static const std::regex kRatings("^/ratings/([^/]+)/history$");
  try {
    std::smatch m;
    if (req.method == "GET" && req.path == "/health") {
      return ok({{"status", "ok"}, {"as_of", st->as_of.to_string()}}, st->version);
    }
    if (req.method == "GET" && req.path == "/players") return players(*st, req);
    if (req.method == "POST" && req.path == "/predict") return predict(*st, req);
    if (req.method == "POST" && req.path == "/shortlist") return shortlist(*st, req);
    if (req.method == "GET" && req.path == "/swarm") return swarm(*st, req);
    if (req.method == "GET" && std::regex_match(req.path, m, kRatings)) {
      return rating_history(*st, m[1].str());
    }
    if (req.method == "POST" && req.path == "/admin/reload") {
      if (!loader_) return fail(404, "NotFound", "reload is not configured", st->version);
      auto next = loader_();
      replace(next);
      return ok({{"reloaded", true}}, next->version);
    }
    return fail(404, "NotFound", "no route for " + req.method + " " + req.path, st->version);
  } catch (const Error& e) {
    return fail(status_for(e.code()), to_string(e.code()), e.what(), st->version);
  } catch (const std::exception& e) {
    return fail(500, "Internal", e.what(), st->version);
  }
}

HttpServer::HttpServer(Service& service) : server_(std::make_unique<httplib::Server>()) {
  auto route = [&service](const httplib::Request& hr, httplib::Response& res) {
    Request r;
    r.method = hr.method;
    r.path = hr.path;
    for (const auto& [k, v] : hr.params) r.query.emplace(k, v);
    r.body = hr.body;
    const Response out = service.handle(r);
    res.status = out.status;
    res.set_header("X-State-Version", out.version);
    res.set_content(out.body, "application/json");
  };
  server_->Get(".*", route);
  server_->Post(".*", route);
}

HttpServer::~HttpServer() = default;

bool HttpServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

int HttpServer::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpServer::serve() { return server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace tportal::gateway
