#include "conetrack/sim/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace conetrack::sim {

double RangeCurve::at(double range) const {
  if (bins.empty()) return 0.0;
  for (const auto& [upper, value] : bins) {
    if (range < upper) return value;
  }
  return bins.back().second;
}

bool RangeCurve::valid_probabilities() const {
  double prev = -1.0;
  for (const auto& [upper, value] : bins) {
    if (!(upper > prev) || value < 0.0 || value > 1.0) return false;
    prev = upper;
  }
  return !bins.empty();
}

Matrix2d SensorProfile::observation_covariance(const Vector2d& body_point) const {
  const double r = body_point.norm();
  const double sigma = position_sigma(r);
  const double bearing = std::atan2(body_point.y(), body_point.x());
  const Matrix2d rot = rotation(bearing);
  const Vector2d variances(radial_scale * radial_scale * sigma * sigma, sigma * sigma);
  return make_spd<double>(rot * variances.asDiagonal() * rot.transpose());
}

void SensorProfile::validate() const {
  if (!(max_range > 0.0) || !(fov_half_angle > 0.0)) {
    throw std::invalid_argument("sensor profile: range and fov must be positive");
  }
  if (!color_accuracy.valid_probabilities() || !recall.valid_probabilities()) {
    throw std::invalid_argument("sensor profile: curves must be ordered probabilities");
  }
  if (sigma_base < 0.0 || sigma_range_coeff < 0.0 || radial_scale < 0.0 ||
      false_positive_rate < 0.0) {
    throw std::invalid_argument("sensor profile: noise parameters must be non-negative");
  }
}

SensorProfile default_profile(SensorSource mode) {
  SensorProfile p;
  p.mode = mode;
  switch (mode) {
    case SensorSource::kFusion:
      p.color_accuracy.bins = {{5.0, 0.99}, {7.5, 0.99}, {10.0, 1.0}, {12.5, 1.0}, {15.0, 1.0}, {20.0, 0.97}};
      p.recall.bins = {{10.0, 0.98}, {15.0, 0.93}, {20.0, 0.6}};
      p.false_positive_rate = 0.1;
      break;
    case SensorSource::kLidarOnly:
      p.color_accuracy.bins = {{5.0, 0.88}, {7.5, 0.93}, {10.0, 0.89}, {12.5, 0.87}, {15.0, 0.80}, {20.0, 0.7}};
      p.recall.bins = {{10.0, 0.97}, {15.0, 0.9}, {20.0, 0.6}};
      p.false_positive_rate = 0.2;
      break;
    case SensorSource::kCameraOnly:
      p.max_range = 15.0;
      p.fov_half_angle = 1.0;
      p.sigma_base = 0.05;
      p.sigma_range_coeff = 0.0015;
      p.radial_scale = 4.0;
      p.color_accuracy.bins = {{10.0, 0.98}, {15.0, 0.95}};
      p.recall.bins = {{10.0, 0.95}, {15.0, 0.85}};
      p.false_positive_rate = 0.15;
      break;
  }
  return p;
}

SensorProfile noise_free(SensorProfile profile) {
  profile.sigma_base = 0.0;
  profile.sigma_range_coeff = 0.0;
  profile.false_positive_rate = 0.0;
  for (auto& bin : profile.color_accuracy.bins) bin.second = 1.0;
  for (auto& bin : profile.recall.bins) bin.second = 1.0;
  return profile;
}

ColorClass true_class(ConeColor c) {
  switch (c) {
    case ConeColor::kBlue:
      return ColorClass::kBlue;
    case ConeColor::kYellow:
      return ColorClass::kYellow;
    case ConeColor::kOrange:
      return ColorClass::kUnknown;
  }
  return ColorClass::kUnknown;
}

namespace {

ColorDistribution classify(ColorClass truth, double accuracy, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto predicted = truth;
  if (u(rng) >= accuracy) {
    const int offset = u(rng) < 0.5 ? 1 : 2;
    predicted = static_cast<ColorClass>((static_cast<int>(truth) + offset) % 3);
  }
  const double confidence = std::max(accuracy, 1.0 / 3.0);
  Vector3d p = Vector3d::Constant(0.5 * (1.0 - confidence));
  p[static_cast<int>(predicted)] = confidence;
  return ColorDistribution::from_evidence(p);
}

Vector2d sample_noise(const SensorProfile& profile, const Vector2d& body_point,
                      std::mt19937_64& rng) {
  const double sigma = profile.position_sigma(body_point.norm());
  if (sigma <= 0.0) return Vector2d::Zero();
  std::normal_distribution<double> n(0.0, 1.0);
  const double radial = profile.radial_scale * sigma * n(rng);
  const double tangential = sigma * n(rng);
  const double bearing = std::atan2(body_point.y(), body_point.x());
  return rotation(bearing) * Vector2d(radial, tangential);
}

}  // namespace

std::vector<ConeObservation> simulate_detections(const TrackDefinition& track, const Pose2d& true_pose,
                                                 const SensorProfile& profile, double timestamp,
                                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ConeObservation> out;
  for (const TrackCone& cone : track.cones) {
    const Vector2d body = to_body(true_pose, cone.position);
    const double range = body.norm();
    if (range > profile.max_range) continue;
    if (std::abs(std::atan2(body.y(), body.x())) > profile.fov_half_angle) continue;
    if (u(rng) >= profile.recall.at(range)) continue;
    const Vector2d measured = body + sample_noise(profile, body, rng);
    ConeObservation obs;
    obs.position = {measured, profile.observation_covariance(measured)};
    obs.color = classify(true_class(cone.color), profile.color_accuracy.at(range), rng);
    obs.timestamp = timestamp;
    obs.source = profile.mode;
    out.push_back(obs);
  }

  if (profile.false_positive_rate > 0.0) {
    const int count = std::poisson_distribution<int>(profile.false_positive_rate)(rng);
    for (int i = 0; i < count; ++i) {
      // uniform over the area of the circular sector
      const double r = profile.max_range * std::sqrt(u(rng));
      const double bearing = (2.0 * u(rng) - 1.0) * profile.fov_half_angle;
      const Vector2d body(r * std::cos(bearing), r * std::sin(bearing));
      const auto cls = static_cast<ColorClass>(std::uniform_int_distribution<int>(0, 2)(rng));
      ConeObservation obs;
      obs.position = {body, profile.observation_covariance(body)};
      obs.color = classify(cls, profile.color_accuracy.at(r), rng);
      obs.timestamp = timestamp;
      obs.source = profile.mode;
      out.push_back(obs);
    }
  }
  return out;
}

Velocity2d noisy_velocity(const Velocity2d& truth, const VelocityNoise& noise, double yaw_bias,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Velocity2d v = truth;
  v.vx += noise.sigma_vx * n(rng);
  v.vy += noise.sigma_vy * n(rng);
  v.yaw_rate += noise.sigma_yaw_rate * n(rng) + yaw_bias;
  return v;
}

FrameSample simulate_frame(const TrackDefinition& track, const Pose2d& true_pose,
                           const Velocity2d& true_velocity, const SensorProfile& profile,
                           const VelocityNoise& noise, double timestamp, std::mt19937_64& rng) {
  FrameSample frame;
  frame.observations = simulate_detections(track, true_pose, profile, timestamp, rng);
  frame.noisy_velocity = noisy_velocity(true_velocity, noise, 0.0, rng);
  return frame;
}

}  // namespace conetrack::sim
