#pragma once

#include "conetrack/core/types.hpp"
#include "conetrack/local_map/local_map.hpp"
#include "conetrack/planner/delaunay.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace conetrack::planner {

inline constexpr int kFeatureCount = 6;
using Features = std::array<double, kFeatureCount>;

/// Weight W, setpoint S and scaling N of one prior feature.
struct FeatureTerm {
  double weight{0.1};
  double setpoint{0.0};
  double scale{1.0};
};

struct PriorConfig {
  double w_prior{29.0};
  std::array<FeatureTerm, kFeatureCount> terms;

  /// Published weights (W1..5 = 0.1, W6 = 0.5, W_prior = 29) with setpoints
  /// and scalings derived from the search limits.
  static PriorConfig defaults(int desired_edges = 15, double max_length = 15.0);
  void validate() const;
};

struct SearchLimits {
  double max_length{15.0};     // m; a path stops growing once it reaches this
  int max_edges{20};           // crossed edges
  int beam_width{300};         // open paths kept per depth; 0 keeps all
  double max_edge_length{9.0};  // m; longer edges are never crossed
  double probe_distance{1.0};  // m ahead of the car used to pick the start triangle
  double max_initial_turn{1.5707963267948966};  // rad between car heading and first segment
};

struct PlannerConfig {
  SearchLimits limits;
  PriorConfig prior{PriorConfig::defaults()};
  int desired_edges{15};
  double likelihood_floor{1e-6};
  double input_radius{25.0};  // m around the car
  double min_existence{0.4};  // cones below this are left out of the planner input
};

/// A middle-path hypothesis. Cone indices refer to the planner's input cones.
struct CandidatePath {
  Vector2d origin{Vector2d::Zero()};
  double origin_heading{0.0};
  std::vector<Vector2d> waypoints;  // crossed-edge midpoints
  std::vector<std::pair<int, int>> crossed_edges;
  std::vector<int> triangles;  // visited, starting with the start triangle
  std::vector<int> left_cones;   // in order of first appearance
  std::vector<int> right_cones;
  bool maximal{false};
  Features features{};
  double log_prior{0.0};
  double log_likelihood{0.0};
  double log_posterior{0.0};
};

/// Cone positions and colours in the planner's input order.
struct PlannerInput {
  std::vector<Vector2d> positions;
  std::vector<ColorDistribution> colors;
  std::vector<std::int64_t> ids;
  Pose2d ego;
};

/// Cones of a snapshot within the input radius of the car.
PlannerInput make_input(const local_map::LocalMapSnapshot& snapshot, double input_radius,
                        double min_existence = 0.0);

int start_triangle(const Triangulation& tri, std::span<const Vector2d> points, const Pose2d& ego,
                   double probe_distance);

/// Scores a path in place and returns its rank key (higher is better).
using PathRanker = std::function<double(CandidatePath&)>;

/// Tree search through adjacent triangles. Every path the search keeps is
/// returned; maximal ones stopped on a limit or a dead end. With a beam width
/// the ranker decides which open paths survive each depth; without a ranker
/// paths keep their generation order.
std::vector<CandidatePath> enumerate_paths(const Triangulation& tri,
                                           std::span<const Vector2d> points, const Pose2d& ego,
                                           const SearchLimits& limits,
                                           const PathRanker& ranker = {});

/// F1 largest heading change, F2/F3 std of left/right cone gaps, F4 std of
/// crossed edge lengths, F5 crossed edges capped at the desired count, F6
/// polyline length from the origin.
Features compute_features(const CandidatePath& path, std::span<const Vector2d> points,
                          int desired_edges);

double log_prior(const Features& features, const PriorConfig& config);

double log_likelihood(const CandidatePath& path, std::span<const ColorDistribution> colors,
                      double floor);

/// Fills features and scores in place.
void score(CandidatePath& path, const PlannerInput& input, const PlannerConfig& config);

/// Index of the best candidate: highest posterior, then longer, then smoother.
std::optional<std::size_t> select_path(std::span<const CandidatePath> candidates);

struct PlanResult {
  PlannerInput input;
  std::vector<CandidatePath> candidates;
  std::optional<std::size_t> selected;
  double elapsed_seconds{0.0};

  const CandidatePath* best() const { return selected ? &candidates[*selected] : nullptr; }
};

PlanResult plan(const local_map::LocalMapSnapshot& snapshot, const PlannerConfig& config);
PlanResult plan(const PlannerInput& input, const PlannerConfig& config);

struct CandidateScore {
  double log_prior{0.0};
  double log_likelihood{0.0};
  double log_posterior{0.0};
  double length{0.0};
  int crossed_edges{0};
  bool maximal{false};
};

/// Serializable summary of one planning call. Positions are in the local-map
/// frame; true_pose is carried along for evaluation when the source knows it.
struct PlanRecord {
  double timestamp{0.0};
  Pose2d ego;
  std::optional<Pose2d> true_pose;
  bool has_path{false};
  std::vector<Vector2d> waypoints;
  std::vector<std::int64_t> left_ids;
  std::vector<std::int64_t> right_ids;
  double log_prior{0.0};
  double log_likelihood{0.0};
  double log_posterior{0.0};
  double length{0.0};
  int candidate_count{0};
  std::vector<CandidateScore> candidates;  // filled only when verbose
};

PlanRecord make_record(const PlanResult& result, double timestamp, bool verbose,
                       std::optional<Pose2d> true_pose = std::nullopt);

}  // namespace conetrack::planner
