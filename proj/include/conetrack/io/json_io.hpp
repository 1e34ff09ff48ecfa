#pragma once

#include "conetrack/eval/eval.hpp"
#include "conetrack/global_map/graph.hpp"
#include "conetrack/global_map/solver.hpp"
#include "conetrack/local_map/local_map.hpp"
#include "conetrack/pipeline/config.hpp"
#include "conetrack/planner/planner.hpp"
#include "conetrack/sim/sensor.hpp"
#include "conetrack/sim/track.hpp"

#include "json.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace conetrack::io {

using Json = nlohmann::json;

inline constexpr const char* kTrackSchema = "conetrack.track/1";
inline constexpr const char* kSnapshotSchema = "conetrack.snapshots/1";
inline constexpr const char* kPlannerSchema = "conetrack.planner/1";
inline constexpr const char* kGraphSchema = "conetrack.graph/1";
inline constexpr const char* kReportSchema = "conetrack.report/1";

/// Malformed documents and schema version mismatches.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
/// Pretty-printed with a trailing newline.
void write_json_file(const std::string& path, const Json& j);

Json to_json(const Pose2d& p);
Pose2d pose_from_json(const Json& j);

Json to_json(const sim::TrackDefinition& track);
sim::TrackDefinition track_from_json(const Json& j);

Json to_json(const sim::SensorProfile& profile);
sim::SensorProfile profile_from_json(const Json& j);

Json to_json(const local_map::LocalMapSnapshot& snapshot, const std::optional<Pose2d>& true_pose = {});
local_map::LocalMapSnapshot snapshot_from_json(const Json& j, std::optional<Pose2d>* true_pose = nullptr);

struct SnapshotLogHeader {
  Pose2d world_origin;
  double frame_rate_hz{10.0};
};

struct SnapshotLogEntry {
  local_map::LocalMapSnapshot snapshot;
  std::optional<Pose2d> true_pose;
};

struct SnapshotLog {
  SnapshotLogHeader header;
  std::vector<SnapshotLogEntry> entries;
  bool truncated{false};  // a line failed to parse; entries stop before it
  std::string error;
};

std::string snapshot_log_header(const SnapshotLogHeader& header);
/// One NDJSON line without the newline.
std::string snapshot_log_line(const local_map::LocalMapSnapshot& snapshot,
                              const std::optional<Pose2d>& true_pose);
/// Throws SchemaError when the header is missing or of another version.
SnapshotLog read_snapshot_log(const std::string& path);

Json to_json(const planner::PlanRecord& record);
planner::PlanRecord plan_record_from_json(const Json& j);
std::string planner_log(const std::vector<planner::PlanRecord>& records);
std::vector<planner::PlanRecord> read_planner_log(const std::string& path);

Json to_json(const global_map::Graph& graph);
global_map::Graph graph_from_json(const Json& j);
Json graph_dump(const global_map::Graph& graph, const global_map::OptimizeResult* solve);

Json to_json(const std::vector<global_map::MapCone>& map);
/// Accepts x/y or x_m/y_m fields.
std::vector<global_map::MapCone> map_from_json(const Json& j);

Json to_json(const eval::Report& report);
eval::Report report_from_json(const Json& j);

Json to_json(const pipeline::RunConfig& config);
/// Starts from the named scenario preset (or the defaults) and applies every
/// field present. Unknown keys are rejected with pipeline::ConfigError.
pipeline::RunConfig config_from_json(const Json& j);

}  // namespace conetrack::io
