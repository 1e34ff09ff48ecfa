#include "conetrack/global_map/graph.hpp"

#include "conetrack/global_map/residuals.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace conetrack::global_map {

ColorDistribution LandmarkNode::color() const {
  Vector3d sum = Vector3d::Zero();
  for (const auto& [id, evidence] : local_evidence) sum += evidence;
  return ColorDistribution::from_evidence(sum);
}

bool Graph::well_formed() const {
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (poses[i].id != static_cast<int>(i)) return false;
  }
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    if (landmarks[i].id != static_cast<int>(i)) return false;
  }
  const int np = static_cast<int>(poses.size());
  const int nl = static_cast<int>(landmarks.size());
  for (const OdometryEdge& e : odometry) {
    if (e.from < 0 || e.to >= np || e.to != e.from + 1) return false;
  }
  for (const ObservationEdge& e : observations) {
    if (e.pose < 0 || e.pose >= np || e.landmark < 0 || e.landmark >= nl) return false;
  }
  return true;
}

double total_cost(const Graph& graph) {
  double cost = 0.0;
  for (const OdometryEdge& e : graph.odometry) {
    const Vector3d r = odometry_residual(graph.poses[e.from].pose, graph.poses[e.to].pose, e.relative);
    cost += r.dot(e.information * r);
  }
  for (const ObservationEdge& e : graph.observations) {
    const Vector2d r = observation_residual(graph.poses[e.pose].pose,
                                            graph.landmarks[e.landmark].position, e.measurement);
    cost += r.dot(e.information * r);
  }
  return cost;
}

GraphBuilder::GraphBuilder(GraphConfig config) : config_(std::move(config)) {}

void GraphBuilder::add_snapshot(const local_map::LocalMapSnapshot& snapshot) {
  const Pose2d odometry = previous_ ? between(previous_->ego, snapshot.ego) : Pose2d();
  add_snapshot(snapshot, odometry);
}

void GraphBuilder::add_snapshot(const local_map::LocalMapSnapshot& snapshot, const Pose2d& odometry) {
  if (previous_ && snapshot.timestamp < previous_->timestamp) {
    throw std::invalid_argument("add_snapshot: snapshot out of order");
  }

  PoseNode node;
  node.id = static_cast<int>(graph_.poses.size());
  node.timestamp = snapshot.timestamp;
  if (graph_.poses.empty()) {
    node.pose = compose(config_.world_origin, snapshot.ego);
  } else {
    const PoseNode& last = graph_.poses.back();
    node.pose = compose(last.pose, odometry);
    const double dt = std::max(snapshot.timestamp - last.timestamp, 1e-3);
    const Vector3d variance = config_.odometry_variance_rate * dt;
    const Matrix3d information = variance.cwiseInverse().asDiagonal();
    graph_.odometry.push_back({last.id, node.id, odometry, information});
  }
  graph_.poses.push_back(node);

  std::vector<const ConeEstimate*> linked;
  std::vector<const ConeEstimate*> unlinked;
  for (const ConeEstimate& cone : snapshot.cones) {
    if (!snapshot.observed_now(cone)) continue;
    if (to_body(snapshot.ego, cone.position.mean).norm() > config_.add_radius) continue;
    (local_to_landmark_.contains(cone.id) ? linked : unlinked).push_back(&cone);
  }

  std::set<int> seen;
  auto add_edge = [&](const ConeEstimate& cone, int landmark, const Vector2d& measurement) {
    const double variance =
        std::max(0.5 * cone.position.cov.trace(), config_.min_observation_variance);
    graph_.observations.push_back(
        {node.id, landmark, measurement, Matrix2d::Identity() / variance});
    LandmarkNode& l = graph_.landmarks[static_cast<std::size_t>(landmark)];
    l.local_id_links.insert(cone.id);
    l.local_evidence[cone.id] = cone.color_evidence;
    local_to_landmark_[cone.id] = landmark;
    seen.insert(landmark);
  };

  for (const ConeEstimate* cone : linked) {
    const int landmark = local_to_landmark_.at(cone->id);
    if (seen.contains(landmark)) continue;
    add_edge(*cone, landmark, to_body(snapshot.ego, cone->position.mean));
  }
  for (const ConeEstimate* cone : unlinked) {
    const Vector2d measurement = to_body(snapshot.ego, cone->position.mean);
    const Vector2d world = transform_point(node.pose, measurement);
    int best = -1;
    double best_dist = config_.assoc_radius;
    for (const LandmarkNode& l : graph_.landmarks) {
      if (seen.contains(l.id)) continue;
      const double d = (l.position - world).norm();
      if (d <= best_dist) {
        best_dist = d;
        best = l.id;
      }
    }
    if (best < 0) {
      LandmarkNode l;
      l.id = static_cast<int>(graph_.landmarks.size());
      l.position = world;
      graph_.landmarks.push_back(std::move(l));
      best = graph_.landmarks.back().id;
    }
    add_edge(*cone, best, measurement);
  }
  previous_ = snapshot;
}

std::vector<MapCone> export_map(const Graph& graph) {
  std::vector<MapCone> out;
  out.reserve(graph.landmarks.size());
  for (const LandmarkNode& l : graph.landmarks) {
    out.push_back({l.id, l.position, l.color()});
  }
  return out;
}

Graph dead_reckoning_map(const Graph& graph) {
  Graph out = graph;
  for (const OdometryEdge& e : out.odometry) {
    out.poses[static_cast<std::size_t>(e.to)].pose =
        compose(out.poses[static_cast<std::size_t>(e.from)].pose, e.relative);
  }
  std::vector<Matrix2d> info(out.landmarks.size(), Matrix2d::Zero());
  std::vector<Vector2d> weighted(out.landmarks.size(), Vector2d::Zero());
  for (const ObservationEdge& e : out.observations) {
    const Vector2d world = transform_point(out.poses[static_cast<std::size_t>(e.pose)].pose, e.measurement);
    const auto l = static_cast<std::size_t>(e.landmark);
    info[l] += e.information;
    weighted[l] += e.information * world;
  }
  for (std::size_t l = 0; l < out.landmarks.size(); ++l) {
    if (info[l].determinant() > 0.0) out.landmarks[l].position = info[l].inverse() * weighted[l];
  }
  return out;
}

void merge_estimates(Graph& target, const Graph& optimized) {
  if (optimized.poses.empty()) return;
  const std::size_t last = optimized.poses.size() - 1;
  if (last >= target.poses.size()) {
    throw std::invalid_argument("merge_estimates: optimized graph is newer than the target");
  }
  const Pose2d correction =
      compose(optimized.poses[last].pose, inverse(target.poses[last].pose));
  for (std::size_t i = 0; i < target.poses.size(); ++i) {
    target.poses[i].pose =
        i <= last ? optimized.poses[i].pose : compose(correction, target.poses[i].pose);
  }
  for (std::size_t i = 0; i < target.landmarks.size(); ++i) {
    target.landmarks[i].position = i < optimized.landmarks.size()
                                       ? optimized.landmarks[i].position
                                       : transform_point(correction, target.landmarks[i].position);
  }
}

}  // namespace conetrack::global_map
