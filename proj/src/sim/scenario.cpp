#include "conetrack/sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace conetrack::sim {

SpeedProfile::SpeedProfile(std::vector<std::pair<double, double>> breakpoints)
    : breakpoints_(std::move(breakpoints)) {
  std::stable_sort(breakpoints_.begin(), breakpoints_.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [s, v] : breakpoints_) {
    if (!(v > 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument("speed profile: speeds must be positive");
    }
  }
}

SpeedProfile SpeedProfile::constant(double speed) { return SpeedProfile({{0.0, speed}}); }

SpeedProfile SpeedProfile::curvature_limited(const Centerline& centerline, double max_speed,
                                             double lateral_accel, double step) {
  std::vector<std::pair<double, double>> bp;
  for (double s = 0.0; s <= centerline.length(); s += step) {
    const double k = std::abs(centerline.curvature(s, 1.0));
    const double limit = k > 1e-9 ? std::sqrt(lateral_accel / k) : max_speed;
    bp.emplace_back(s, std::min(max_speed, limit));
  }
  return SpeedProfile(std::move(bp));
}

double SpeedProfile::at(double s) const {
  if (breakpoints_.empty()) throw std::logic_error("speed profile is empty");
  if (s <= breakpoints_.front().first) return breakpoints_.front().second;
  if (s >= breakpoints_.back().first) return breakpoints_.back().second;
  auto hi = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), s,
                             [](double v, const auto& bp) { return v < bp.first; });
  auto lo = hi - 1;
  const double f = (s - lo->first) / (hi->first - lo->first);
  return (1.0 - f) * lo->second + f * hi->second;
}

void SimRun::validate() const {
  if (speed_profile.empty()) throw std::invalid_argument("sim run: speed profile is empty");
  if (!(frame_rate > 0.0)) throw std::invalid_argument("sim run: frame rate must be positive");
  if (track.centerline.size() < 3) throw std::invalid_argument("sim run: track has no centerline");
  if (!(laps > 0.0) || extra_distance < 0.0 || substeps < 1) {
    throw std::invalid_argument("sim run: invalid lap settings");
  }
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
  return std::mt19937_64(seq);
}

}  // namespace

Simulator::Simulator(SimRun run)
    : run_((run.validate(), std::move(run))),
      centerline_(run_.track.centerline),
      velocity_rng_(stream(run_.seed, 100)),
      sensor_rng_{stream(run_.seed, 0), stream(run_.seed, 1), stream(run_.seed, 2)} {
  if (run_.velocity_noise.yaw_rate_bias_sigma > 0.0) {
    auto bias_rng = stream(run_.seed, 200);
    yaw_bias_ = std::normal_distribution<double>(0.0, run_.velocity_noise.yaw_rate_bias_sigma)(bias_rng);
  }
}

double Simulator::target_distance() const {
  return run_.laps * centerline_.length() + run_.extra_distance;
}

bool Simulator::finished() const { return started_ && current_.progress >= target_distance(); }

TruthStep Simulator::make_step(const Pose2d& pose, double progress) const {
  TruthStep step;
  if (!started_) {
    step.pose = pose;
    step.progress = progress;
    return step;
  }
  step.index = current_.index + 1;
  step.dt = 1.0 / run_.frame_rate;
  step.timestamp = static_cast<double>(step.index) / run_.frame_rate;
  step.pose = pose;
  step.progress = progress;
  const Vector2d chord = to_body(current_.pose, pose.translation());
  step.velocity = {chord.x() / step.dt, chord.y() / step.dt,
                   normalize_angle(pose.theta - current_.pose.theta) / step.dt};
  return step;
}

std::optional<TruthStep> Simulator::advance(double speed_cap) {
  if (!started_) {
    current_ = make_step(centerline_.pose(0.0), 0.0);
    started_ = true;
    return current_;
  }
  if (current_.progress >= target_distance()) return std::nullopt;
  const double dt = 1.0 / run_.frame_rate;
  double s = current_.progress;
  const double h = dt / run_.substeps;
  for (int i = 0; i < run_.substeps; ++i) {
    // midpoint rule on ds/dt = v(s)
    const double wrapped = std::fmod(s, centerline_.length());
    const double v1 = std::min(speed_cap, run_.speed_profile.at(wrapped));
    const double mid = std::fmod(s + 0.5 * h * v1, centerline_.length());
    s += h * std::min(speed_cap, run_.speed_profile.at(mid));
  }
  current_ = make_step(centerline_.pose(s), s);
  if (current_.progress >= target_distance()) return std::nullopt;
  return current_;
}

TruthStep Simulator::advance_to(const Pose2d& pose) {
  if (!started_) {
    current_ = make_step(pose, 0.0);
    started_ = true;
    return current_;
  }
  // progress accumulates the projected advance along the centerline
  const double len = centerline_.length();
  const double prev = std::fmod(current_.progress, len);
  double delta = centerline_.project(pose.translation()) - prev;
  if (delta < -0.5 * len) delta += len;
  if (delta > 0.5 * len) delta -= len;
  current_ = make_step(pose, current_.progress + delta);
  return current_;
}

std::vector<ConeObservation> Simulator::observe(const SensorProfile& profile) {
  auto& rng = sensor_rng_.at(static_cast<std::size_t>(profile.mode));
  return simulate_detections(run_.track, current_.pose, profile, current_.timestamp, rng);
}

Velocity2d Simulator::measure_velocity() {
  if (current_.index == 0) return {};
  return noisy_velocity(current_.velocity, run_.velocity_noise, yaw_bias_, velocity_rng_);
}

std::vector<ScenarioFrame> run_scenario(const SimRun& run, const SensorProfile& profile) {
  profile.validate();
  Simulator sim(run);
  std::vector<ScenarioFrame> frames;
  while (auto step = sim.advance()) {
    ScenarioFrame f;
    f.timestamp = step->timestamp;
    f.dt = step->dt;
    f.observations = sim.observe(profile);
    f.noisy_velocity = sim.measure_velocity();
    f.true_pose = step->pose;
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace conetrack::sim
