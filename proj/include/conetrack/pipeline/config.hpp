#pragma once

#include "conetrack/global_map/graph.hpp"
#include "conetrack/global_map/solver.hpp"
#include "conetrack/local_map/local_map.hpp"
#include "conetrack/planner/planner.hpp"
#include "conetrack/sim/scenario.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace conetrack::pipeline {

/// Thrown for invalid or inconsistent run configurations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A perception pipeline is down during [start, end). Killing the camera or
/// the LiDAR also kills the fusion pipeline that depends on it.
struct ModeWindow {
  SensorSource pipeline{SensorSource::kCameraOnly};
  double start_s{0.0};
  double end_s{std::numeric_limits<double>::infinity()};
};

/// Parses "camera@10", "lidar@0-20" or comma-separated lists of those.
std::vector<ModeWindow> parse_mode_schedule(const std::string& text);

struct SpeedSettings {
  double max_speed_mps{12.0};
  double lateral_accel_mps2{8.0};
  bool curvature_limited{true};
  double degraded_speed_mps{5.0};  // cap whenever fusion is unavailable
};

struct ClosedLoopSettings {
  bool enabled{false};
  double lookahead_m{4.0};
  double divergence_margin_m{2.0};  // beyond the half width
};

struct RunConfig {
  std::string scenario{"custom"};
  std::optional<std::string> track_file;
  sim::TrackSpec track_spec;
  std::uint64_t track_seed{1};
  std::array<sim::SensorProfile, 3> profiles;  // indexed by SensorSource
  bool noise_free{false};
  SpeedSettings speed;
  double frame_rate_hz{10.0};
  sim::VelocityNoise velocity_noise;
  std::uint64_t seed{1};
  double laps{1.0};
  double extra_distance_m{15.0};
  std::vector<ModeWindow> mode_schedule;
  local_map::LocalMapConfig local_map;
  global_map::GraphConfig graph;
  global_map::SolverConfig solver;
  int optimize_every{10};  // snapshots between global-map solves
  planner::PlannerConfig planner;
  bool verbose_candidates{false};
  ClosedLoopSettings closed_loop;
  std::string out_dir{"run"};

  /// Throws ConfigError.
  void validate() const;
};

RunConfig default_config();

/// Named presets: "fsg-like-12ms", "fsg-like-5ms", "circle-5ms".
/// Throws ConfigError for unknown names.
RunConfig scenario_preset(const std::string& name);
std::vector<std::string> scenario_names();

/// Profiles used by the run, noise removed if requested.
sim::SensorProfile effective_profile(const RunConfig& config, SensorSource source);

}  // namespace conetrack::pipeline
