#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "tportal/ingest.hpp"
#include "tportal/pipeline.hpp"

namespace tportal::testing {

/// A small synthetic world taken through every pipeline stage once per
/// test binary, written to a temporary work directory.
struct TrainedWorld {
  std::filesystem::path dir;
  Config config;
  std::shared_ptr<const pipeline::PipelineState> state;
};
const TrainedWorld& trained_world();

/// One appearance with a single non-zero metric.
ingest::Appearance appearance(const std::string& player, const std::string& team, Position pos,
                              double minutes, Metric metric = Metric::Shots, double value = 0.0);

ingest::MatchRecord match(const std::string& id, const std::string& date, const std::string& league,
                          const std::string& home, const std::string& away, int hg, int ag);

std::filesystem::path temp_dir(const std::string& name);

}  // namespace tportal::testing
