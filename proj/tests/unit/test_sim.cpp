#include "conetrack/sim/scenario.hpp"
#include "conetrack/sim/sensor.hpp"
#include "conetrack/sim/track.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>

using namespace conetrack;
using namespace conetrack::sim;

namespace {

TrackSpec circle(double radius, double spacing) {
  TrackSpec spec;
  spec.kind = TrackSpec::Kind::kCircle;
  spec.radius = radius;
  spec.cone_spacing = spacing;
  return spec;
}

/// One cone straight ahead at the given range.
TrackDefinition single_cone(double range, ConeColor color = ConeColor::kBlue) {
  TrackDefinition t;
  t.cones.push_back({Vector2d(range, 0.0), color});
  t.centerline = {{0, 0}, {1, 0}, {1, 1}};
  return t;
}

bool same_track(const TrackDefinition& a, const TrackDefinition& b) {
  if (a.cones.size() != b.cones.size() || a.centerline.size() != b.centerline.size()) return false;
  for (std::size_t i = 0; i < a.cones.size(); ++i) {
    if (a.cones[i].position != b.cones[i].position || a.cones[i].color != b.cones[i].color) return false;
  }
  for (std::size_t i = 0; i < a.centerline.size(); ++i) {
    if (a.centerline[i] != b.centerline[i]) return false;
  }
  return a.total_length == b.total_length;
}

}  // namespace

TEST_CASE("circle track cone count and sides") {
  const TrackDefinition t = generate_track(circle(30.0, 5.0), 1);
  const auto per_side = static_cast<std::size_t>(std::floor(2.0 * std::numbers::pi * 30.0 / 5.0));
  REQUIRE(t.cones.size() == 2 * per_side);

  Vector2d centre = Vector2d::Zero();
  for (const Vector2d& c : t.centerline) centre += c;
  centre /= static_cast<double>(t.centerline.size());

  // cones alternate left/right; for a counter-clockwise circle left is inside
  for (std::size_t i = 0; i < t.cones.size(); ++i) {
    const double r = (t.cones[i].position - centre).norm();
    if (i % 2 == 0) {
      CHECK(r == doctest::Approx(30.0 - 0.5 * 3.5));
    } else {
      CHECK(r == doctest::Approx(30.0 + 0.5 * 3.5));
    }
    if (i >= 2) {
      CHECK(t.cones[i].color == (i % 2 == 0 ? ConeColor::kBlue : ConeColor::kYellow));
    }
  }
  CHECK(t.cones[0].color == ConeColor::kOrange);
  CHECK(t.cones[1].color == ConeColor::kOrange);
}

TEST_CASE("track generation is deterministic and within length bounds") {
  TrackSpec spec;
  spec.target_length = 250.0;
  spec.hairpins = 2;
  const TrackDefinition a = generate_track(spec, 42);
  const TrackDefinition b = generate_track(spec, 42);
  CHECK(same_track(a, b));
  CHECK(a.total_length >= 200.0);
  CHECK(a.total_length <= 300.0);
  CHECK_FALSE(same_track(a, generate_track(spec, 43)));
}

TEST_CASE("generated tracks respect rule limits") {
  TrackSpec spec;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TrackDefinition t = generate_track(spec, seed);
    const Centerline c(t.centerline);
    for (std::size_t side = 0; side < 2; ++side) {
      std::vector<Vector2d> pts;
      for (std::size_t i = side; i < t.cones.size(); i += 2) pts.push_back(t.cones[i].position);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK((pts[(i + 1) % pts.size()] - pts[i]).norm() <= spec.rules.max_cone_spacing + 1e-9);
      }
    }
    // blue on the left of the driving direction, yellow on the right
    for (const TrackCone& cone : t.cones) {
      if (cone.color == ConeColor::kOrange) continue;
      const Pose2d p = c.pose(c.project(cone.position));
      const double lateral = to_body(p, cone.position).y();
      CHECK((cone.color == ConeColor::kBlue ? lateral > 0.0 : lateral < 0.0));
      CHECK(std::abs(lateral) == doctest::Approx(0.5 * spec.width).epsilon(0.02));
    }
  }
}

TEST_CASE("infeasible specs are rejected") {
  TrackSpec spec;
  spec.width = 0.0;
  CHECK_THROWS_AS(generate_track(spec, 1), std::invalid_argument);
  spec = TrackSpec{};
  spec.cone_spacing = 6.0;
  CHECK_THROWS_AS(generate_track(spec, 1), std::invalid_argument);
  spec = TrackSpec{};
  spec.min_radius = 2.0;
  CHECK_THROWS_AS(generate_track(spec, 1), std::invalid_argument);
}

TEST_CASE("noise-free detections equal in-frustum ground truth") {
  const TrackDefinition t = generate_track(TrackSpec{}, 3);
  const Pose2d pose = start_pose(t);
  const SensorProfile profile = noise_free(default_profile(SensorSource::kFusion));
  std::mt19937_64 rng(1);
  const auto obs = simulate_detections(t, pose, profile, 0.0, rng);

  std::vector<Vector2d> expected;
  for (const TrackCone& c : t.cones) {
    const Vector2d b = to_body(pose, c.position);
    if (b.norm() <= profile.max_range && std::abs(std::atan2(b.y(), b.x())) <= profile.fov_half_angle) {
      expected.push_back(b);
    }
  }
  REQUIRE(obs.size() == expected.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    CHECK((obs[i].position.mean - expected[i]).norm() < 1e-12);
  }
}

TEST_CASE("cones beyond max range are never observed") {
  SensorProfile profile = default_profile(SensorSource::kFusion);
  profile.false_positive_rate = 0.0;
  for (auto& bin : profile.recall.bins) bin.second = 1.0;
  const TrackDefinition t = single_cone(profile.max_range + 0.5);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) CHECK(simulate_detections(t, Pose2d(), profile, 0.0, rng).empty());
}

TEST_CASE("empirical recall matches the configured rate") {
  SensorProfile profile = default_profile(SensorSource::kFusion);
  profile.false_positive_rate = 0.0;
  profile.recall.bins = {{20.0, 0.9}};
  const TrackDefinition t = single_cone(10.0);
  std::mt19937_64 rng(7);
  int hits = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) hits += static_cast<int>(simulate_detections(t, Pose2d(), profile, 0.0, rng).size());
  CHECK(static_cast<double>(hits) / n == doctest::Approx(0.9).epsilon(0.01 / 0.9));
}

TEST_CASE("position noise matches the configured curve") {
  SensorProfile profile = default_profile(SensorSource::kFusion);
  profile.false_positive_rate = 0.0;
  for (auto& bin : profile.recall.bins) bin.second = 1.0;
  for (double range : {2.0, 8.0, 14.0, 19.0}) {
    const TrackDefinition t = single_cone(range);
    std::mt19937_64 rng(static_cast<std::uint64_t>(range * 10));
    double sum_x = 0, sum_xx = 0, sum_y = 0, sum_yy = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const auto obs = simulate_detections(t, Pose2d(), profile, 0.0, rng);
      const Vector2d e = obs.at(0).position.mean - Vector2d(range, 0.0);
      sum_x += e.x();
      sum_xx += e.x() * e.x();
      sum_y += e.y();
      sum_yy += e.y() * e.y();
    }
    const double sx = std::sqrt(sum_xx / n - (sum_x / n) * (sum_x / n));
    const double sy = std::sqrt(sum_yy / n - (sum_y / n) * (sum_y / n));
    const double sigma = profile.position_sigma(range);
    CHECK(sx == doctest::Approx(profile.radial_scale * sigma).epsilon(0.05));
    CHECK(sy == doctest::Approx(sigma).epsilon(0.05));
  }
}

TEST_CASE("colour accuracy matches the configured curve") {
  for (SensorSource mode : {SensorSource::kFusion, SensorSource::kLidarOnly}) {
    SensorProfile profile = default_profile(mode);
    profile.false_positive_rate = 0.0;
    for (auto& bin : profile.recall.bins) bin.second = 1.0;
    for (double range : {3.0, 6.0, 9.0, 11.0, 14.0}) {
      const TrackDefinition t = single_cone(range, ConeColor::kYellow);
      std::mt19937_64 rng(static_cast<std::uint64_t>(range * 100) + static_cast<std::uint64_t>(mode));
      int correct = 0;
      const int n = 10000;
      for (int i = 0; i < n; ++i) {
        const auto obs = simulate_detections(t, Pose2d(), profile, 0.0, rng);
        correct += obs.at(0).color.argmax() == ColorClass::kYellow;
      }
      CHECK(std::abs(static_cast<double>(correct) / n - profile.color_accuracy.at(range)) < 0.02);
    }
  }
}

TEST_CASE("one lap of a 213 m track at 5 m/s and 10 Hz") {
  SimRun run;
  run.track = generate_track(circle(213.0 / (2.0 * std::numbers::pi), 5.0), 1);
  run.speed_profile = SpeedProfile::constant(5.0);
  run.frame_rate = 10.0;
  const auto frames = run_scenario(run, default_profile(SensorSource::kFusion));
  CHECK(std::abs(static_cast<double>(frames.size()) - 426.0) <= 1.0);
}

TEST_CASE("empty speed profile is rejected") {
  SimRun run;
  run.track = generate_track(circle(30.0, 5.0), 1);
  CHECK_THROWS_AS(run_scenario(run, default_profile(SensorSource::kFusion)), std::invalid_argument);
  CHECK_THROWS_AS(SpeedProfile::constant(0.0), std::invalid_argument);
}

TEST_CASE("scenario streams are deterministic in the seed") {
  SimRun run;
  run.track = generate_track(TrackSpec{}, 5);
  run.speed_profile = SpeedProfile::constant(8.0);
  run.seed = 77;
  const auto profile = default_profile(SensorSource::kLidarOnly);
  const auto a = run_scenario(run, profile);
  const auto b = run_scenario(run, profile);
  REQUIRE(a.size() == b.size());
  bool identical = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    identical &= a[i].observations.size() == b[i].observations.size();
    identical &= a[i].noisy_velocity.vx == b[i].noisy_velocity.vx;
    identical &= a[i].noisy_velocity.yaw_rate == b[i].noisy_velocity.yaw_rate;
    identical &= a[i].true_pose.x == b[i].true_pose.x;
    for (std::size_t j = 0; identical && j < a[i].observations.size(); ++j) {
      identical &= a[i].observations[j].position.mean == b[i].observations[j].position.mean;
      identical &= a[i].observations[j].color.p_blue == b[i].observations[j].color.p_blue;
    }
  }
  CHECK(identical);
}

TEST_CASE("chord velocity reproduces the next pose with one Euler step") {
  SimRun run;
  run.track = generate_track(TrackSpec{}, 2);
  run.speed_profile = SpeedProfile::constant(12.0);
  Simulator sim(run);
  Pose2d previous = sim.advance()->pose;
  while (auto step = sim.advance()) {
    const Pose2d predicted = integrate_velocity(previous, step->velocity, step->dt);
    CHECK((predicted.translation() - step->pose.translation()).norm() < 1e-9);
    CHECK(std::abs(normalize_angle(predicted.theta - step->pose.theta)) < 1e-9);
    previous = step->pose;
  }
}

TEST_CASE("range curves") {
  RangeCurve c{{{5.0, 0.9}, {10.0, 0.5}}};
  CHECK(c.at(0.0) == 0.9);
  CHECK(c.at(7.0) == 0.5);
  CHECK(c.at(50.0) == 0.5);
  CHECK(c.valid_probabilities());
  RangeCurve bad{{{10.0, 0.9}, {5.0, 0.5}}};
  CHECK_FALSE(bad.valid_probabilities());
  SensorProfile p;
  p.recall = bad;
  CHECK_THROWS(p.validate());
}
