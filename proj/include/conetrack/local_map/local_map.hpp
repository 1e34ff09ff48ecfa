#pragma once

#include "conetrack/core/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace conetrack::local_map {

/// Operating mode, chosen from which perception pipelines are alive.
/// kDegraded means fusion is down but LiDAR and camera pipelines both run.
enum class Mode : int { kFusion = 0, kLidarOnly = 1, kCameraOnly = 2, kDegraded = 3 };

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);

/// Circular sector in the car frame.
struct Frustum {
  double max_range{15.0};
  double fov_half_angle{1.2};

  bool contains(const Vector2d& body_point) const;
};

/// How a source's observations are weighted in degraded mode.
struct SourceWeighting {
  double position_cov_scale{1.0};
  double color_weight{1.0};
  bool creates_cones{true};  // unmatched observations start new cones
};

struct LocalMapConfig {
  Matrix2d odometry_noise{Matrix2d::Identity() * 0.01};  // cone covariance growth, m^2 per s
  double gate{3.0};                                       // Bhattacharyya units
  double existence_initial{0.5};
  double existence_gain{0.5};    // hit: e += gain * (1 - e)
  double existence_decay{0.47};  // miss inside the frustum: e *= decay
  double existence_floor{0.05};  // deleted below this
  double max_unseen{10.0};       // s; cones not observed for longer are dropped
  double staleness{0.25};        // s without a message before a pipeline counts as failed
  // negative evidence is only collected inside these sectors
  std::array<Frustum, 3> negative_region{Frustum{15.0, 1.2}, Frustum{15.0, 1.2}, Frustum{12.0, 0.9}};
  SourceWeighting degraded_lidar{1.0, 0.2};
  SourceWeighting degraded_camera{1.0, 1.0, false};

  /// Decay such that a cone at existence 1 falls below the floor after
  /// floor(rejection_time * frame_rate) consecutive misses.
  static double decay_for(double existence_floor, double rejection_time, double frame_rate);
  /// Config whose decay rejects certain false positives within rejection_time.
  static LocalMapConfig for_frame_rate(double frame_rate, double rejection_time = 0.4);
};

struct LocalMapState {
  Pose2d ego;  // local frame, starts at the origin
  std::vector<ConeEstimate> cones;  // sorted by id
  double time{0.0};
  Mode mode{Mode::kFusion};
  std::int64_t next_id{0};

  const ConeEstimate* find(std::int64_t id) const;
};

struct AssociationResult {
  std::vector<std::pair<std::size_t, std::int64_t>> pairs;  // (observation index, cone id)
  std::vector<std::size_t> new_observations;
  std::vector<std::int64_t> unmatched_cones_in_fov;
};

/// Immutable copy of the map emitted after every ingested frame. Cone ids are
/// stable across snapshots for as long as a cone survives; a cone was matched
/// in this frame iff its last_seen equals timestamp.
struct LocalMapSnapshot {
  double timestamp{0.0};
  Pose2d ego;
  std::vector<ConeEstimate> cones;
  Mode mode{Mode::kFusion};

  bool observed_now(const ConeEstimate& c) const { return c.last_seen == timestamp; }
};

LocalMapState predict(LocalMapState state, const Velocity2d& vel, double dt,
                      const Matrix2d& odometry_noise);

/// Greedy one-to-one matching by ascending Bhattacharyya distance; ties go to
/// the lower cone id. Observations must already be in the local-map frame.
AssociationResult associate(const LocalMapState& state, std::span<const Gaussian2d> observations,
                            const Frustum& negative_region, double gate);

ConeEstimate update_position(ConeEstimate cone, const Gaussian2d& observation);
ConeEstimate update_color(ConeEstimate cone, const ColorDistribution& observed, double weight = 1.0);

/// Decays unmatched in-frustum cones, reinforces the matched ones and drops
/// cones whose existence fell below the floor.
LocalMapState apply_negative_observations(LocalMapState state, const AssociationResult& result,
                                          const LocalMapConfig& config);

struct ObservationBatch {
  SensorSource source{SensorSource::kFusion};
  std::vector<ConeObservation> observations;  // car frame
};

struct Frame {
  double timestamp{0.0};
  double dt{0.0};
  Velocity2d velocity;
  std::vector<ObservationBatch> batches;  // one per pipeline that delivered
};

/// Single-writer local map. Frames must arrive in timestamp order.
class LocalMap {
 public:
  explicit LocalMap(LocalMapConfig config = {});

  const LocalMapState& state() const { return state_; }
  const LocalMapConfig& config() const { return config_; }

  /// predict, associate, update, negative evidence, prune, snapshot.
  LocalMapSnapshot ingest_frame(const Frame& frame);

  /// Mode from pipeline staleness at time now; nullopt if nothing is alive.
  std::optional<Mode> select_mode(double now) const;

  /// Adds a cone directly (used to inject false positives in tests).
  std::int64_t insert_cone(ConeEstimate cone);

 private:
  bool uses(Mode mode, SensorSource source) const;
  SourceWeighting weighting(Mode mode, SensorSource source) const;

  LocalMapConfig config_;
  LocalMapState state_;
  std::array<std::optional<double>, 3> last_message_{};
};

}  // namespace conetrack::local_map
