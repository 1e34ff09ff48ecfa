#pragma once

#include "conetrack/eval/eval.hpp"
#include "conetrack/global_map/graph.hpp"
#include "conetrack/global_map/solver.hpp"
#include "conetrack/local_map/local_map.hpp"
#include "conetrack/pipeline/config.hpp"
#include "conetrack/planner/planner.hpp"
#include "conetrack/sim/track.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace conetrack::pipeline {

/// Track from the configured file, or generated from the spec and track seed.
sim::TrackDefinition load_track(const RunConfig& config);

/// True when the pipeline is delivering messages at time t. The fusion
/// pipeline needs both the camera and the LiDAR.
bool pipeline_alive(const std::vector<ModeWindow>& schedule, SensorSource source, double t);

using StageTimes = std::map<std::string, std::vector<double>>;

/// Consumers of the local-map snapshot stream: planner and global map. Shared
/// by live runs and replays so both produce the same artifacts.
class Backend {
 public:
  Backend(const RunConfig& config, const Pose2d& world_origin);

  const planner::PlanRecord& consume(const local_map::LocalMapSnapshot& snapshot,
                                     const std::optional<Pose2d>& true_pose = std::nullopt);
  void finish();

  const std::vector<planner::PlanRecord>& plans() const { return plans_; }
  const planner::PlanResult& last_plan() const { return last_plan_; }
  const global_map::Graph& graph() const { return builder_.graph(); }
  /// Valid after finish().
  const global_map::OptimizeResult& final_solve() const { return final_solve_; }
  const std::vector<global_map::MapCone>& map() const { return map_; }
  const std::vector<global_map::MapCone>& dead_reckoning_map() const { return dead_reckoning_map_; }
  const StageTimes& times() const { return times_; }

 private:
  const RunConfig& config_;
  global_map::GraphBuilder builder_;
  std::vector<planner::PlanRecord> plans_;
  planner::PlanResult last_plan_;
  global_map::OptimizeResult final_solve_;
  std::vector<global_map::MapCone> map_;
  std::vector<global_map::MapCone> dead_reckoning_map_;
  StageTimes times_;
};

struct RunOutputs {
  RunConfig config;
  sim::TrackDefinition track;
  Pose2d world_origin;
  std::vector<local_map::LocalMapSnapshot> snapshots;
  std::vector<Pose2d> true_poses;
  std::vector<planner::PlanRecord> plans;
  global_map::Graph graph;  // final optimized graph
  global_map::OptimizeResult final_solve;
  std::vector<global_map::MapCone> map;
  std::vector<global_map::MapCone> dead_reckoning_map;
  StageTimes times;
  bool completed{false};
  std::string status;
  double driven_distance{0.0};
  double simulated_time{0.0};
};

/// Simulator, local map, planner and global map over one run.
/// Throws ConfigError on invalid configurations.
RunOutputs run_pipeline(const RunConfig& config);

/// Map metrics against the truth cones; nullopt for an empty map.
std::optional<eval::MapMetrics> evaluate_map(const std::vector<global_map::MapCone>& map,
                                             const sim::TrackDefinition& truth,
                                             const eval::IcpConfig& icp = {});

eval::Report make_report(const RunOutputs& outputs);

/// Writes config.json, track.json, snapshots.ndjson, planner.ndjson,
/// graph.json, map.json, report.json, histograms.csv and timing.csv.
void write_outputs(const RunOutputs& outputs, const std::string& dir);

}  // namespace conetrack::pipeline
