#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tportal/date.hpp"
#include "tportal/ingest.hpp"
#include "tportal/metrics.hpp"
#include "tportal/ratings.hpp"

namespace tportal::features {

struct WindowConfig {
  double player_window_minutes = 1000.0;
  double team_position_window_minutes = 3000.0;
  double team_window_minutes = 3000.0;
  double prior_constant = 1000.0;
  /// Below this many context minutes a feature is flagged Red.
  double red_minutes = 500.0;

  void validate() const;
};

enum class RagStatus { Red, Amber, Green };
std::string_view to_string(RagStatus s);

/// Raw counts of one entity in one game.
struct Stint {
  Date date;
  double minutes = 0.0;
  MetricVector metrics;
};

struct Per90Window {
  MetricVector per90;
  double cum_minutes = 0.0;  // all minutes supplied, not just those inside the window
};

/// Per-90 rate over the most recent `window_minutes` of play. The oldest game
/// that straddles the window edge contributes pro-rata. Throws NoData on empty input.
Per90Window rolling_per90(std::span<const Stint> lines, double window_minutes);
Per90Window rolling_per90(std::span<const ingest::GameLine> lines, double window_minutes);

struct Blend {
  MetricVector blended;
  double weight = 0.0;
};

/// w = min(1, m / c);  X = (1 - w) P + w R.
Blend blend(const MetricVector& prior, const MetricVector& raw, double cum_minutes, double c);

/// Green when the prior is fully discarded, Red below `red_minutes`, Amber otherwise.
RagStatus rag_for(double cum_minutes, double weight, double red_minutes = 500.0);

enum class EntityLevel { Team, TeamPosition, PlayerPosition };

/// The (team, league) an entity is currently accumulating minutes in.
struct Context {
  std::string team;
  std::string league;
  bool operator==(const Context&) const = default;
};

struct Sample {
  Date date;
  double cum_minutes = 0.0;
  MetricVector raw;
  MetricVector prior;
  double weight = 0.0;
  MetricVector blended;
};

struct Epoch {
  int index = 0;
  Context context;
  Date opened;
  MetricVector prior;
  std::vector<Stint> stints;
  std::vector<Sample> samples;
};

struct SampleRef {
  const Epoch* epoch = nullptr;
  const Sample* sample = nullptr;
  explicit operator bool() const { return sample != nullptr; }
};

class FeatureTimeline;

/// Supplies the prior for a freshly opened epoch. The timeline passed in
/// still holds only the earlier epochs.
using PriorProvider =
    std::function<MetricVector(const FeatureTimeline& tl, const Context& ctx, Date date)>;

/// Ordered rolling features of one team, team-position or player-position.
/// A new epoch opens whenever the (team, league) context changes.
class FeatureTimeline {
 public:
  FeatureTimeline() = default;
  FeatureTimeline(EntityLevel level, std::string id, std::optional<Position> position,
                  double window_minutes, double prior_constant);

  EntityLevel level() const { return level_; }
  const std::string& id() const { return id_; }
  std::optional<Position> position() const { return position_; }
  double window_minutes() const { return window_; }
  double prior_constant() const { return c_; }
  const std::vector<Epoch>& epochs() const { return epochs_; }
  bool empty() const { return epochs_.empty(); }

  /// Appends one game. Opens a new epoch (asking `prior` for its prior value)
  /// when `ctx` differs from the current one. Throws OutOfOrderDate.
  void advance(const Stint& line, const Context& ctx, const PriorProvider& prior);

  SampleRef latest() const;
  /// Latest sample dated on or before `date`.
  SampleRef as_of(Date date) const;
  /// Latest sample dated strictly before `date`.
  SampleRef before(Date date) const;

 private:
  EntityLevel level_ = EntityLevel::Team;
  std::string id_;
  std::optional<Position> position_;
  double window_ = 1000.0;
  double c_ = 1000.0;
  std::vector<Epoch> epochs_;
};

/// RAG of the sample in force on `date`; Red when nothing has been observed.
RagStatus rag(const FeatureTimeline& tl, Date date, double red_minutes = 500.0);

using PositionedId = std::pair<std::string, Position>;

/// All timelines built from one corpus.
struct FeatureStore {
  std::map<std::string, FeatureTimeline> teams;
  std::map<PositionedId, FeatureTimeline> team_positions;
  std::map<PositionedId, FeatureTimeline> players;

  const FeatureTimeline* team(const std::string& id) const;
  const FeatureTimeline* team_position(const std::string& team, Position p) const;
  const FeatureTimeline* player(const std::string& id, Position p) const;

  bool operator==(const FeatureStore& other) const;
};

/// Chooses priors for newly opened epochs at each level. Phase rules: team and
/// team-position priors may read ratings and team-level state strictly before
/// `date`; player priors may read ratings and the finished team-level store.
class PriorSource {
 public:
  virtual ~PriorSource() = default;
  virtual MetricVector team_prior(const FeatureStore& store, const FeatureTimeline& tl,
                                  const Context& ctx, Date date) const = 0;
  virtual MetricVector team_position_prior(const FeatureStore& store, const FeatureTimeline& tl,
                                           const Context& ctx, Date date) const = 0;
  virtual MetricVector player_prior(const FeatureStore& store, const FeatureTimeline& tl,
                                    const Context& ctx, Date date) const = 0;
};

/// Every prior is the zero vector.
class ZeroPriors final : public PriorSource {
 public:
  MetricVector team_prior(const FeatureStore&, const FeatureTimeline&, const Context&,
                          Date) const override {
    return {};
  }
  MetricVector team_position_prior(const FeatureStore&, const FeatureTimeline&, const Context&,
                                   Date) const override {
    return {};
  }
  MetricVector player_prior(const FeatureStore&, const FeatureTimeline&, const Context&,
                            Date) const override {
    return {};
  }
};

enum class PhaseKind { Ratings, TeamAndTeamPosition, PlayerPosition };
std::string_view to_string(PhaseKind k);

struct Phase {
  PhaseKind kind;
  std::vector<PhaseKind> reads;   // phases whose outputs this one consumes
  std::vector<std::string> work;  // entity ids handled in this phase
};

/// Three strict phases: ratings, then team & team-position timelines, then
/// player-position timelines. Each phase reads only earlier phases.
struct ComputationPlan {
  std::vector<Phase> phases;
};

ComputationPlan pipeline_order(std::span<const ingest::MatchRecord> corpus);

enum class Execution { Serial, Parallel };

/// Executes phases 2 and 3 of the plan. Team-level timelines are advanced in
/// match order; player-position timelines are independent and run in
/// parallel when requested. Both modes produce identical stores.
FeatureStore build_features(std::span<const ingest::MatchRecord> corpus,
                            const WindowConfig& cfg, const PriorSource& priors,
                            Execution exec = Execution::Parallel);

/// Feature snapshot export, one JSON object per line with entity_key, date,
/// epoch, m, w, P, R, X and rag. `full_history` emits every sample; otherwise
/// only the last sample of each epoch. `filter`, if set, keeps entities whose
/// key contains it.
void write_snapshot(std::ostream& out, const FeatureStore& store, const WindowConfig& cfg,
                    bool full_history, const std::string& filter = {});

}  // namespace tportal::features
