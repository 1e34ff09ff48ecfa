#pragma once

#include "conetrack/sim/sensor.hpp"
#include "conetrack/sim/track.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace conetrack::sim {

/// Speed as a piecewise-linear function of arc length. Breakpoints are
/// (s, speed) pairs sorted by s; constant beyond either end.
class SpeedProfile {
 public:
  SpeedProfile() = default;
  explicit SpeedProfile(std::vector<std::pair<double, double>> breakpoints);

  static SpeedProfile constant(double speed);
  /// min(max_speed, sqrt(lateral_accel / |curvature|)) sampled every step metres.
  static SpeedProfile curvature_limited(const Centerline& centerline, double max_speed,
                                        double lateral_accel, double step = 1.0);

  double at(double s) const;
  bool empty() const { return breakpoints_.empty(); }
  const std::vector<std::pair<double, double>>& breakpoints() const { return breakpoints_; }

 private:
  std::vector<std::pair<double, double>> breakpoints_;
};

struct SimRun {
  TrackDefinition track;
  SpeedProfile speed_profile;
  double frame_rate{10.0};
  std::uint64_t seed{0};
  VelocityNoise velocity_noise;
  double laps{1.0};
  double extra_distance{0.0};  // driven past the lap end
  int substeps{8};             // arc-length integration steps per frame

  void validate() const;
};

/// Ground-truth state at one frame. velocity is the body-frame chord velocity
/// over the preceding frame interval, so an Euler step from the previous pose
/// reproduces the current one exactly.
struct TruthStep {
  int index{0};
  double timestamp{0.0};
  double dt{0.0};
  Pose2d pose;
  Velocity2d velocity;
  double progress{0.0};  // arc length driven
};

/// Steps the ground-truth vehicle along the centerline (or to externally
/// commanded poses) and samples sensors. Each pipeline and the velocity
/// reading draw from independent random streams derived from the seed.
class Simulator {
 public:
  explicit Simulator(SimRun run);

  const SimRun& run() const { return run_; }
  const Centerline& centerline() const { return centerline_; }
  double target_distance() const;
  bool finished() const;
  const TruthStep& current() const { return current_; }
  double yaw_rate_bias() const { return yaw_bias_; }

  /// Next frame following the centerline; speed optionally capped.
  /// Returns nullopt once the target distance is reached.
  std::optional<TruthStep> advance(double speed_cap = std::numeric_limits<double>::infinity());
  /// Next frame with the vehicle placed at the given pose (closed-loop driving).
  TruthStep advance_to(const Pose2d& pose);

  std::vector<ConeObservation> observe(const SensorProfile& profile);
  Velocity2d measure_velocity();

 private:
  TruthStep make_step(const Pose2d& pose, double progress) const;

  SimRun run_;
  Centerline centerline_;
  TruthStep current_;
  bool started_{false};
  double yaw_bias_{0.0};
  std::mt19937_64 velocity_rng_;
  std::array<std::mt19937_64, 3> sensor_rng_;
};

struct ScenarioFrame {
  double timestamp{0.0};
  double dt{0.0};
  std::vector<ConeObservation> observations;
  Velocity2d noisy_velocity;
  Pose2d true_pose;  // evaluation only
};

/// Drives one run with a single sensor pipeline.
std::vector<ScenarioFrame> run_scenario(const SimRun& run, const SensorProfile& profile);

}  // namespace conetrack::sim
