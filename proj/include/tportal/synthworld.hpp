#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tportal/date.hpp"
#include "tportal/ingest.hpp"
#include "tportal/metrics.hpp"
#include "tportal/predictor.hpp"
#include "tportal/ratings.hpp"
#include "tportal/recruitment.hpp"

namespace tportal::synth {

/// Knobs of the synthetic world. Leagues are laid out as
/// continents x countries x tiers; promotion and relegation swap the bottom
/// and top `promotion_slots` teams of adjacent tiers within a country.
struct WorldConfig {
  std::uint64_t seed = 7;
  std::size_t continents = 2;
  std::size_t countries_per_continent = 2;
  std::size_t tiers = 2;
  std::size_t teams_per_league = 12;
  std::size_t seasons = 8;
  int first_season = 2016;
  std::size_t promotion_slots = 2;
  /// Cross-league cup rounds per season.
  std::size_t cup_rounds = 2;

  // League quality: continent and country offsets, minus `tier_gap` per tier.
  double continent_sd = 0.3;
  double country_sd = 0.3;
  double tier_gap = 0.8;
  /// Spread of team ability around its league's quality.
  double ability_sd = 0.5;

  /// Team style multipliers are log-uniform on [min, max], per metric.
  double multiplier_min = 0.5;
  double multiplier_max = 2.0;
  /// Player style factors are mean-one lognormal with this log-sd.
  double style_sd = 0.3;
  /// Ability link strength: attacking metrics scale by exp(kappa * delta),
  /// defensive ones by exp(-kappa * delta).
  double kappa = 0.35;
  /// Per-game multiplicative noise (mean-one lognormal log-sd).
  double noise_sigma = 0.5;

  /// Share of all players moved in each transfer window.
  double transfer_fraction = 0.15;
  /// Chance that a player spends part of a match at a secondary position.
  double second_position_rate = 0.05;

  void validate() const;
  std::string to_json() const;
  static WorldConfig from_json(std::string_view text);
};

struct TeamLatent {
  double ability = 0.0;
  MetricVector multiplier;
};

struct PlayerLatent {
  Position primary = Position::CM;
  /// Mean-one per-metric factors applied to the position profile.
  MetricVector factor;
};

/// League membership in force from `start` until the next season.
struct Season {
  Date start;
  std::map<std::string, std::vector<std::string>> leagues;
};

/// Base per-90 profile of each position.
const std::array<MetricVector, kPositionCount>& position_profiles();

/// Latent parameters and the generative law.
struct Truth {
  double kappa = 0.0;
  std::map<std::string, TeamLatent> teams;
  std::map<std::string, PlayerLatent> players;
  std::vector<Season> seasons;

  /// Player style at a position (position profile x player factor, with
  /// total passes = short + long).
  MetricVector style(const std::string& player, Position pos) const;
  const std::string& league_of(const std::string& team, Date date) const;
  double league_mean_ability(const std::string& league, Date date) const;
  /// exp(+-kappa * delta) per metric.
  MetricVector link(double delta) const;
  /// mu(player, team): style x team multiplier x link(ability - league mean).
  /// Throws MissingEntity.
  MetricVector expected(const std::string& player, Position pos, const std::string& team,
                        Date date) const;

  std::string to_json() const;
  static Truth from_json(std::string_view text);
};

struct World {
  std::vector<ingest::MatchRecord> corpus;
  ratings::Topology topology;
  Truth truth;
  std::vector<recruit::PlayerMeta> players;
  std::size_t transfers = 0;
};

/// Deterministic for a given config (including the seed).
World generate(const WorldConfig& cfg);

/// Writes corpus.ndjson, topology.json, truth.json and players.csv into `dir`.
void write_world(const World& world, const std::filesystem::path& dir);

/// mu at the destination of each scenario.
std::vector<MetricVector> oracle_targets(const Truth& truth,
                                         std::span<const predictor::TransferScenario> scenarios);

/// Per-metric MSE of `predictions` against mu. Throws ScenarioMismatch when
/// the lengths differ or a scenario names an unknown player or team.
MetricVector oracle_eval(const Truth& truth, std::span<const predictor::TransferScenario> scenarios,
                         std::span<const MetricVector> predictions);

}  // namespace tportal::synth
