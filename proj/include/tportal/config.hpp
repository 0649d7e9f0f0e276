#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "tportal/features.hpp"
#include "tportal/predictor.hpp"
#include "tportal/ratings.hpp"
#include "tportal/recruitment.hpp"
#include "tportal/synthworld.hpp"

namespace tportal {

/// Everything tunable, loaded from one JSON file. Every section and key is
/// optional; missing values keep their defaults.
struct Config {
  std::uint64_t seed = 42;
  ratings::EloConfig elo;
  features::WindowConfig window;
  predictor::ExampleConfig examples;
  predictor::TrainConfig train;
  predictor::HyperParams hyperparams;
  predictor::SearchSpace search;
  /// Candidates tried per group; 0 trains `hyperparams` directly.
  std::size_t search_budget = 0;
  predictor::Transform transform = predictor::Transform::Log;
  recruit::VerdictThresholds verdict;
  synth::WorldConfig world;

  static Config from_json(std::string_view text);
  static Config load(const std::filesystem::path& path);
  std::string to_json() const;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace tportal
