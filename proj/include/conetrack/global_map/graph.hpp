#pragma once

#include "conetrack/core/types.hpp"
#include "conetrack/local_map/local_map.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <vector>

namespace conetrack::global_map {

struct PoseNode {
  int id{0};
  Pose2d pose;  // world frame
  double timestamp{0.0};
};

struct LandmarkNode {
  int id{0};
  Vector2d position{Vector2d::Zero()};
  std::set<std::int64_t> local_id_links;
  // most recent colour evidence of every linked local cone
  std::map<std::int64_t, Vector3d> local_evidence;

  ColorDistribution color() const;
};

struct OdometryEdge {
  int from{0};
  int to{0};
  Pose2d relative;
  Matrix3d information{Matrix3d::Identity()};
};

struct ObservationEdge {
  int pose{0};
  int landmark{0};
  Vector2d measurement{Vector2d::Zero()};  // body frame
  Matrix2d information{Matrix2d::Identity()};
};

/// Pose-landmark graph. Node ids equal their index in the node vectors.
struct Graph {
  std::vector<PoseNode> poses;
  std::vector<LandmarkNode> landmarks;
  std::vector<OdometryEdge> odometry;
  std::vector<ObservationEdge> observations;

  bool empty() const { return poses.empty(); }
  /// Dangling endpoints or non-consecutive odometry.
  bool well_formed() const;
};

/// Weighted squared error of every edge at the current estimate.
double total_cost(const Graph& graph);

struct GraphConfig {
  double add_radius{8.0};    // only cones this close to the car become measurements
  double assoc_radius{1.5};  // Euclidean re-association gate for unlinked cones
  Vector3d odometry_variance_rate{9e-5, 4e-5, 9e-7};  // per second, (x, y, theta)
  double min_observation_variance{1e-4};
  Pose2d world_origin;  // world pose of the local-map origin (gauge)
};

/// Incremental graph construction from local-map snapshots.
class GraphBuilder {
 public:
  explicit GraphBuilder(GraphConfig config = {});

  const Graph& graph() const { return graph_; }
  Graph& mutable_graph() { return graph_; }
  const GraphConfig& config() const { return config_; }

  /// Appends a pose node (plus odometry edge after the first) and observation
  /// edges for nearby cones matched in the snapshot's frame. odometry is the
  /// local-frame motion since the previous snapshot.
  void add_snapshot(const local_map::LocalMapSnapshot& snapshot, const Pose2d& odometry);
  /// Same, with odometry taken from the snapshots' ego poses.
  void add_snapshot(const local_map::LocalMapSnapshot& snapshot);

  std::size_t snapshot_count() const { return graph_.poses.size(); }

 private:
  GraphConfig config_;
  Graph graph_;
  std::map<std::int64_t, int> local_to_landmark_;
  std::optional<local_map::LocalMapSnapshot> previous_;
};

struct MapCone {
  int id{0};
  Vector2d position;
  ColorDistribution color;
};

std::vector<MapCone> export_map(const Graph& graph);

/// Poses re-chained from odometry alone and every landmark refit as the
/// information-weighted mean of its measurements from those poses.
Graph dead_reckoning_map(const Graph& graph);

/// Copies node estimates from an optimized copy of an older version of the
/// graph. Nodes added after the copy was taken are moved rigidly with the
/// correction of the newest pose the copy contained.
void merge_estimates(Graph& target, const Graph& optimized);

}  // namespace conetrack::global_map
