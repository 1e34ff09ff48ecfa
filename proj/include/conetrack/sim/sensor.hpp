#pragma once

#include "conetrack/core/types.hpp"
#include "conetrack/sim/track.hpp"

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace conetrack::sim {

/// Piecewise-constant function of range. Each bin is (upper range bound, value);
/// ranges beyond the last bound use the last value.
struct RangeCurve {
  std::vector<std::pair<double, double>> bins;

  double at(double range) const;
  bool valid_probabilities() const;
};

struct SensorProfile {
  SensorSource mode{SensorSource::kFusion};
  double max_range{20.0};
  double fov_half_angle{1.3};
  // position noise standard deviation sigma_base + sigma_range_coeff * r^2,
  // radial component additionally multiplied by radial_scale
  double sigma_base{0.03};
  double sigma_range_coeff{0.0008};
  double radial_scale{1.0};
  RangeCurve color_accuracy;
  RangeCurve recall;
  double false_positive_rate{0.1};

  double position_sigma(double range) const { return sigma_base + sigma_range_coeff * range * range; }
  /// Car-frame observation covariance at the given body-frame point.
  Matrix2d observation_covariance(const Vector2d& body_point) const;
  void validate() const;
};

/// Profiles loosely matched to the colour accuracies measured for the
/// fused and LiDAR-only classifiers, with a 20 m detection horizon.
SensorProfile default_profile(SensorSource mode);
/// Same geometry, but no noise, full recall and perfect colour.
SensorProfile noise_free(SensorProfile profile);

struct VelocityNoise {
  double sigma_vx{0.03};
  double sigma_vy{0.02};
  double sigma_yaw_rate{0.003};
  double yaw_rate_bias_sigma{0.0005};  // drawn once per run

  static VelocityNoise none() { return {0.0, 0.0, 0.0, 0.0}; }
};

ColorClass true_class(ConeColor c);

/// Per-pipeline detections of the ground-truth cones from the given pose.
std::vector<ConeObservation> simulate_detections(const TrackDefinition& track, const Pose2d& true_pose,
                                                 const SensorProfile& profile, double timestamp,
                                                 std::mt19937_64& rng);

Velocity2d noisy_velocity(const Velocity2d& truth, const VelocityNoise& noise, double yaw_bias,
                          std::mt19937_64& rng);

struct FrameSample {
  std::vector<ConeObservation> observations;
  Velocity2d noisy_velocity;
};

FrameSample simulate_frame(const TrackDefinition& track, const Pose2d& true_pose,
                           const Velocity2d& true_velocity, const SensorProfile& profile,
                           const VelocityNoise& noise, double timestamp, std::mt19937_64& rng);

}  // namespace conetrack::sim
