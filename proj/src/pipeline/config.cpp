#include "conetrack/pipeline/config.hpp"

#include <cstdlib>
#include <sstream>

namespace conetrack::pipeline {

namespace {

double parse_number(const std::string& text, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw ConfigError("mode schedule: bad number '" + text + "' in '" + context + "'");
  }
  return v;
}

}  // namespace

std::vector<ModeWindow> parse_mode_schedule(const std::string& text) {
  std::vector<ModeWindow> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto at = item.find('@');
    if (at == std::string::npos) throw ConfigError("mode schedule: expected pipeline@start[-end], got '" + item + "'");
    ModeWindow w;
    try {
      w.pipeline = sensor_source_from_string(item.substr(0, at));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("mode schedule: ") + e.what());
    }
    const std::string range = item.substr(at + 1);
    const auto dash = range.find('-', 1);
    w.start_s = parse_number(range.substr(0, dash), item);
    if (dash != std::string::npos) w.end_s = parse_number(range.substr(dash + 1), item);
    if (w.start_s < 0.0 || !(w.end_s > w.start_s)) throw ConfigError("mode schedule: empty or negative window '" + item + "'");
    out.push_back(w);
  }
  return out;
}

void RunConfig::validate() const {
  try {
    if (!track_file) sim::validate_spec(track_spec);
    for (const sim::SensorProfile& p : profiles) p.validate();
    if (!(local_map.existence_floor > 0.0 && local_map.existence_floor < 1.0) ||
        !(local_map.existence_decay > 0.0 && local_map.existence_decay < 1.0) ||
        !(local_map.existence_gain > 0.0 && local_map.existence_gain <= 1.0) || !(local_map.gate > 0.0) ||
        !(local_map.max_unseen > 0.0)) {
      throw ConfigError("local map: existence parameters out of range");
    }
    planner.prior.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(frame_rate_hz > 0.0)) throw ConfigError("frame_rate_hz must be positive");
  if (!(laps > 0.0) || extra_distance_m < 0.0) throw ConfigError("laps must be positive, extra distance non-negative");
  if (!(speed.max_speed_mps > 0.0) || !(speed.degraded_speed_mps > 0.0) || !(speed.lateral_accel_mps2 > 0.0)) {
    throw ConfigError("speeds and lateral acceleration must be positive");
  }
  if (optimize_every < 1) throw ConfigError("optimize_every must be at least 1");
  if (planner.limits.max_edges < 1 || !(planner.limits.max_length > 0.0) || planner.limits.beam_width < 0) {
    throw ConfigError("planner limits out of range");
  }
  if (!(graph.add_radius > 0.0) || !(graph.assoc_radius > 0.0)) throw ConfigError("graph radii must be positive");
  for (const ModeWindow& w : mode_schedule) {
    if (!(w.end_s > w.start_s)) throw ConfigError("mode schedule window must have end > start");
  }
  if (closed_loop.enabled && !(closed_loop.lookahead_m > 0.0)) throw ConfigError("lookahead must be positive");
}

RunConfig default_config() {
  RunConfig c;
  c.profiles = {sim::default_profile(SensorSource::kFusion), sim::default_profile(SensorSource::kLidarOnly),
                sim::default_profile(SensorSource::kCameraOnly)};
  c.local_map = local_map::LocalMapConfig::for_frame_rate(c.frame_rate_hz);
  c.graph.world_origin = Pose2d();
  return c;
}

RunConfig scenario_preset(const std::string& name) {
  RunConfig c = default_config();
  c.scenario = name;
  if (name == "fsg-like-12ms" || name == "fsg-like-5ms") {
    c.track_spec.kind = sim::TrackSpec::Kind::kRandom;
    c.track_spec.target_length = 250.0;
    c.track_spec.hairpins = 1;
    c.track_seed = 7;
    if (name == "fsg-like-5ms") {
      c.speed.max_speed_mps = 5.0;
      c.speed.curvature_limited = false;
    }
  } else if (name == "circle-5ms") {
    c.track_spec.kind = sim::TrackSpec::Kind::kCircle;
    c.track_spec.radius = 30.0;
    c.speed.max_speed_mps = 5.0;
    c.speed.curvature_limited = false;
  } else if (name != "custom") {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  return c;
}

std::vector<std::string> scenario_names() { return {"fsg-like-12ms", "fsg-like-5ms", "circle-5ms"}; }

sim::SensorProfile effective_profile(const RunConfig& config, SensorSource source) {
  const sim::SensorProfile& p = config.profiles[static_cast<std::size_t>(source)];
  return config.noise_free ? sim::noise_free(p) : p;
}

}  // namespace conetrack::pipeline
