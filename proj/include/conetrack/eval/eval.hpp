#pragma once

#include "conetrack/core/geometry.hpp"
#include "conetrack/planner/planner.hpp"
#include "conetrack/sim/track.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace conetrack::eval {

struct IcpConfig {
  int max_iterations{50};
  double tolerance{1e-12};   // stop once the RMSE changes less than this
  double reject_radius{1.0};  // m
};

struct AlignmentResult {
  double rotation{0.0};  // applied to the estimated points
  Vector2d translation{Vector2d::Zero()};
  std::vector<std::pair<std::int64_t, int>> correspondences;  // (estimated id, truth index)
  std::vector<double> residuals;                               // per correspondence, m
  double rmse{0.0};
  int unmatched_estimated{0};
  int unmatched_truth{0};
  int iterations{0};
  std::vector<double> rmse_history;
  bool degenerate{false};

  Pose2d transform() const { return Pose2d(translation.x(), translation.y(), rotation); }
};

/// Closed-form rigid transform taking src onto dst (paired by index).
Pose2d fit_rigid(std::span<const Vector2d> src, std::span<const Vector2d> dst);

/// Point-to-point ICP. ids label the estimated points; empty means indices.
/// Throws std::invalid_argument if either set is empty.
AlignmentResult icp_align(std::span<const Vector2d> estimated, std::span<const Vector2d> truth,
                          const Pose2d& init = {}, const IcpConfig& config = {},
                          std::span<const std::int64_t> ids = {});

double map_rmse(const AlignmentResult& alignment);

inline constexpr int kHistogramBins = 16;  // 1 m bins from 0 m; the last also holds >= 15 m
using Histogram = std::array<double, kHistogramBins>;

int length_bin(double length);

struct PlanningStats {
  Histogram path_length_histogram{};
  Histogram out_of_track_histogram{};
  int paths{0};
  int out_of_track_paths{0};

  double max_bin_fraction() const { return path_length_histogram.back(); }
  /// Fraction of paths leaving the track closer than the given distance.
  double out_of_track_within(double distance) const;
};

/// Region between two closed boundary polylines.
class Corridor {
 public:
  Corridor(std::vector<Vector2d> left, std::vector<Vector2d> right);
  explicit Corridor(const sim::TrackBoundaries& b) : Corridor(b.left, b.right) {}

  bool contains(const Vector2d& p) const;
  /// Smallest t in [0, 1] at which segment a->b meets a boundary, or a negative value.
  double first_crossing(const Vector2d& a, const Vector2d& b) const;

 private:
  std::vector<Vector2d> left_;
  std::vector<Vector2d> right_;
};

int winding_number(std::span<const Vector2d> polygon, const Vector2d& p);

/// Arc length from the car at which the path first leaves the corridor, or a
/// negative value if it stays inside.
double out_of_track_distance(const Corridor& corridor, const Vector2d& origin,
                             std::span<const Vector2d> waypoints);

/// world_origin places the local-map frame in the world for records without
/// a true pose.
PlanningStats planning_stats(std::span<const planner::PlanRecord> records,
                             const sim::TrackDefinition& truth, const Pose2d& world_origin = {});

/// Nearest-rank percentile, p in (0, 100].
double percentile(std::vector<double> samples, double p);

struct TimingSummary {
  int count{0};
  double mean_s{0.0};
  double p50_s{0.0};
  double p90_s{0.0};
  double p99_s{0.0};
  double max_s{0.0};
};

TimingSummary summarize_timing(const std::vector<double>& samples);

struct MapMetrics {
  double rmse_m{0.0};
  int matched{0};
  int unmatched_estimated{0};
  int unmatched_truth{0};
  double rotation_rad{0.0};
  double translation_x_m{0.0};
  double translation_y_m{0.0};
  bool degenerate{false};
};

MapMetrics map_metrics(const AlignmentResult& a);

struct Report {
  std::string scenario;
  std::uint64_t seed{0};
  bool completed{false};
  std::string status;
  double driven_distance_m{0.0};
  double simulated_time_s{0.0};
  int frames{0};
  bool has_map{false};
  MapMetrics map;
  bool has_dead_reckoning{false};
  MapMetrics dead_reckoning;
  PlanningStats planning;
  std::map<std::string, TimingSummary> timing;
};

/// Path-length and out-of-track histograms as CSV.
std::string histogram_csv(const PlanningStats& stats);

}  // namespace conetrack::eval
