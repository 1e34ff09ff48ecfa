#pragma once

#include "conetrack/core/geometry.hpp"
#include "conetrack/core/types.hpp"

#include <cstdint>
#include <vector>

namespace conetrack::sim {

/// Rule-like limits a generated track must respect.
struct TrackRules {
  double min_width{3.0};
  double max_width{5.0};
  double max_cone_spacing{5.0};
};

struct TrackSpec {
  enum class Kind { kCircle, kRandom };

  Kind kind{Kind::kRandom};
  double radius{30.0};          // centerline radius, circle only
  double target_length{250.0};  // random only
  double length_tolerance{0.1};  // relative
  double width{3.5};
  double cone_spacing{4.0};  // along the centerline
  double min_radius{7.5};    // centerline curvature bound
  int hairpins{1};
  bool orange_start{true};
  double centerline_step{0.25};
  TrackRules rules;
};

struct TrackCone {
  Vector2d position;
  ConeColor color{ConeColor::kBlue};
};

/// Closed counter-clockwise loop. Blue cones lie left of the driving
/// direction, yellow right. The centerline is closed implicitly
/// (last point connects back to the first).
struct TrackDefinition {
  std::vector<TrackCone> cones;
  std::vector<Vector2d> centerline;
  double total_length{0.0};
};

/// Throws std::invalid_argument on infeasible specs. Deterministic in seed.
TrackDefinition generate_track(const TrackSpec& spec, std::uint64_t seed);

void validate_spec(const TrackSpec& spec);

/// Arc-length parametrization of a closed centerline polyline.
class Centerline {
 public:
  explicit Centerline(std::vector<Vector2d> points);

  double length() const { return cumulative_.back(); }
  const std::vector<Vector2d>& points() const { return points_; }

  Vector2d position(double s) const;
  /// Heading interpolated between vertex headings, so it varies continuously.
  double heading(double s) const;
  Pose2d pose(double s) const;
  /// Signed curvature from heading differences over +/- half_window metres.
  double curvature(double s, double half_window = 0.5) const;
  /// Arc length of the closest point.
  double project(const Vector2d& p) const;
  double distance_to(const Vector2d& p) const;

 private:
  std::size_t segment_index(double s) const;
  double wrap(double s) const;

  std::vector<Vector2d> points_;
  std::vector<double> cumulative_;  // size n+1, closes the loop
  std::vector<double> vertex_heading_;
};

/// Boundary polylines ordered along the driving direction, both closed.
struct TrackBoundaries {
  std::vector<Vector2d> left;
  std::vector<Vector2d> right;
};

TrackBoundaries boundaries(const TrackDefinition& track);

Pose2d start_pose(const TrackDefinition& track);

}  // namespace conetrack::sim
