#include "conetrack/local_map/local_map.hpp"

#include "doctest.h"

#include <algorithm>
#include <random>

using namespace conetrack;
using namespace conetrack::local_map;

namespace {

ConeEstimate cone_at(std::int64_t id, Vector2d p, double var = 0.01) {
  ConeEstimate c;
  c.id = id;
  c.position = {p, var * Matrix2d::Identity()};
  return c;
}

/// Reference greedy matcher: repeatedly take the globally smallest remaining
/// distance under the gate, lowest cone id first on ties.
std::vector<std::pair<std::size_t, std::int64_t>> brute_force_greedy(
    const LocalMapState& state, const std::vector<Gaussian2d>& obs, double gate) {
  std::vector<bool> obs_used(obs.size(), false), cone_used(state.cones.size(), false);
  std::vector<std::pair<std::size_t, std::int64_t>> out;
  while (true) {
    double best = gate;
    std::size_t bi = 0, bj = 0;
    bool found = false;
    for (std::size_t j = 0; j < state.cones.size(); ++j) {
      if (cone_used[j]) continue;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs_used[i]) continue;
        const double d = bhattacharyya_distance(obs[i], state.cones[j].position);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
          found = true;
        }
      }
    }
    if (!found) break;
    obs_used[bi] = cone_used[bj] = true;
    out.emplace_back(bi, state.cones[bj].id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ObservationBatch batch(SensorSource src, const std::vector<Vector2d>& body_points, double var = 0.01) {
  ObservationBatch b;
  b.source = src;
  for (const Vector2d& p : body_points) {
    ConeObservation o;
    o.position = {p, var * Matrix2d::Identity()};
    o.color = ColorDistribution::certain(ColorClass::kBlue);
    o.source = src;
    b.observations.push_back(o);
  }
  return b;
}

}  // namespace

TEST_CASE("predict") {
  LocalMapState s;
  s.cones = {cone_at(0, {3, 1}), cone_at(1, {5, -2}, 0.2)};
  const Matrix2d q = Matrix2d::Identity() * 0.01;

  const LocalMapState same = predict(s, Velocity2d{3, 0, 0.1}, 0.0, q);
  CHECK(same.ego.x == 0.0);
  CHECK(same.cones[0].position.cov == s.cones[0].position.cov);
  CHECK(same.time == 0.0);

  const LocalMapState grown = predict(s, Velocity2d{}, 1.0, q);
  for (std::size_t i = 0; i < s.cones.size(); ++i) {
    CHECK((grown.cones[i].position.cov - s.cones[i].position.cov - q).norm() < 1e-15);
    CHECK(grown.cones[i].position.mean == s.cones[i].position.mean);
  }
  CHECK(grown.time == 1.0);

  const LocalMapState half = predict(predict(s, Velocity2d{}, 0.5, q), Velocity2d{}, 0.5, q);
  CHECK((half.cones[1].position.cov - grown.cones[1].position.cov).norm() < 1e-15);

  const LocalMapState moved = predict(s, Velocity2d{2, 0, 0}, 0.5, q);
  CHECK(moved.ego.x == doctest::Approx(1.0));
}

TEST_CASE("associate examples") {
  LocalMapState empty;
  const std::vector<Gaussian2d> obs{{{1, 1}, Matrix2d::Identity() * 0.01}, {{2, 0}, Matrix2d::Identity() * 0.01}};
  const Frustum fov;
  const auto r0 = associate(empty, obs, fov, 3.0);
  CHECK(r0.pairs.empty());
  CHECK(r0.new_observations == std::vector<std::size_t>{0, 1});

  LocalMapState s;
  s.cones = {cone_at(0, {5, 0}), cone_at(1, {5, 4})};
  const std::vector<Gaussian2d> exact{{{5, 4}, Matrix2d::Identity() * 0.01}};
  const auto r1 = associate(s, exact, fov, 3.0);
  REQUIRE(r1.pairs.size() == 1);
  CHECK(r1.pairs[0].second == 1);
  CHECK(r1.unmatched_cones_in_fov == std::vector<std::int64_t>{0});

  // observation near the midpoint goes to whichever cone the distances favour
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.3);
  for (int i = 0; i < 200; ++i) {
    const std::vector<Gaussian2d> mid{{{5 + n(rng), 2 + n(rng)}, Matrix2d::Identity() * 0.5}};
    const auto r = associate(s, mid, fov, 100.0);
    const double d0 = bhattacharyya_distance(mid[0], s.cones[0].position);
    const double d1 = bhattacharyya_distance(mid[0], s.cones[1].position);
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0].second == (d0 <= d1 ? 0 : 1));
  }
}

TEST_CASE("associate matches a brute-force greedy oracle and is order independent") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 12.0);
  std::uniform_real_distribution<double> var(0.01, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    LocalMapState s;
    const int nc = 1 + static_cast<int>(rng() % 12);
    for (int j = 0; j < nc; ++j) s.cones.push_back(cone_at(j, {u(rng), u(rng) - 6.0}, var(rng)));
    std::vector<Gaussian2d> obs;
    const int no = static_cast<int>(rng() % 12);
    for (int i = 0; i < no; ++i) obs.push_back({{u(rng), u(rng) - 6.0}, var(rng) * Matrix2d::Identity()});

    const auto r = associate(s, obs, Frustum{}, 3.0);
    CHECK(r.pairs == brute_force_greedy(s, obs, 3.0));

    // every observation exactly once, every cone at most once
    std::vector<int> count(obs.size(), 0);
    for (const auto& [i, id] : r.pairs) ++count[i];
    for (std::size_t i : r.new_observations) ++count[i];
    CHECK(std::all_of(count.begin(), count.end(), [](int c) { return c == 1; }));
    std::vector<std::int64_t> ids;
    for (const auto& p : r.pairs) ids.push_back(p.second);
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());

    // permuting the observations permutes the result
    std::vector<std::size_t> perm(obs.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Gaussian2d> shuffled;
    for (std::size_t i : perm) shuffled.push_back(obs[i]);
    const auto rp = associate(s, shuffled, Frustum{}, 3.0);
    std::vector<std::pair<std::size_t, std::int64_t>> mapped;
    for (const auto& [i, id] : rp.pairs) mapped.emplace_back(perm[i], id);
    std::sort(mapped.begin(), mapped.end());
    CHECK(mapped == r.pairs);
    CHECK(rp.unmatched_cones_in_fov == r.unmatched_cones_in_fov);
  }
}

TEST_CASE("update_position") {
  const ConeEstimate c = cone_at(0, {0, 0}, 1.0);
  const ConeEstimate u = update_position(c, {{2, 0}, Matrix2d::Identity()});
  CHECK((u.position.mean - Vector2d(1, 0)).norm() < 1e-15);
  CHECK((u.position.cov - 0.5 * Matrix2d::Identity()).norm() < 1e-15);

  const ConeEstimate vague = update_position(c, {{100, -50}, 1e12 * Matrix2d::Identity()});
  CHECK(vague.position.mean.norm() < 1e-6);

  // repeated identical observations shrink the trace towards zero like R / n
  ConeEstimate it = c;
  double previous = it.position.cov.trace();
  for (int n = 1; n <= 50; ++n) {
    it = update_position(it, {{1, 1}, Matrix2d::Identity()});
    const double t = it.position.cov.trace();
    CHECK(t < previous);
    CHECK(t == doctest::Approx(2.0 / (n + 1)));
    previous = t;
  }
}

TEST_CASE("covariance traces never increase on update and never decrease on predict") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random_spd = [&] {
    Matrix2d l;
    l << u(rng), 0, u(rng), u(rng);
    return make_spd<double>(l * l.transpose() + 0.01 * Matrix2d::Identity());
  };
  for (int i = 0; i < 1000; ++i) {
    ConeEstimate c = cone_at(0, {u(rng), u(rng)});
    c.position.cov = random_spd();
    const ConeEstimate updated = update_position(c, {{u(rng), u(rng)}, random_spd()});
    CHECK(updated.position.cov.trace() <= c.position.cov.trace() + 1e-15);

    LocalMapState s;
    s.cones = {c};
    const LocalMapState p = predict(s, Velocity2d{u(rng), u(rng), u(rng)}, std::abs(u(rng)), random_spd());
    CHECK(p.cones[0].position.cov.trace() >= c.position.cov.trace());
  }
}

TEST_CASE("update_color") {
  ConeEstimate c;
  c = update_color(c, {1, 0, 0});
  CHECK(c.color.vector() == Vector3d(1, 0, 0));
  c = update_color(c, {0, 1, 0});
  CHECK((c.color.vector() - Vector3d(0.5, 0.5, 0)).norm() < 1e-15);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ConeEstimate d;
  for (int i = 0; i < 500; ++i) {
    const ColorClass before = i > 0 ? d.color.argmax() : ColorClass::kBlue;
    if (i % 3 == 0) {
      d = update_color(d, ColorDistribution::uniform());
      if (i > 0) CHECK(d.color.argmax() == before);
    } else {
      d = update_color(d, normalize({u(rng), u(rng), u(rng)}), u(rng));
    }
    CHECK(d.color.valid());
  }
}

TEST_CASE("existence dynamics") {
  LocalMapConfig config = LocalMapConfig::for_frame_rate(10.0);
  LocalMapState s;
  s.cones = {cone_at(0, {5, 0}), cone_at(1, {-5, 0})};
  s.cones[0].existence = s.cones[1].existence = 1.0;

  SUBCASE("cone never in the field of view keeps its existence") {
    AssociationResult none;
    for (int i = 0; i < 100; ++i) s = apply_negative_observations(s, none, config);
    CHECK(s.cones.size() == 2);
    CHECK(s.cones[1].existence == 1.0);
  }

  SUBCASE("certain false positive is removed within 0.5 s") {
    AssociationResult miss;
    miss.unmatched_cones_in_fov = {0};
    int frames = 0;
    while (s.find(0) && frames < 100) {
      s = apply_negative_observations(s, miss, config);
      ++frames;
    }
    CHECK(frames / 10.0 <= 0.5);
    CHECK(s.find(1) != nullptr);
  }

  SUBCASE("alternating hit and miss stays inside the closed-form band") {
    // after each hit-miss pair, e <- d * (e + g * (1 - e)); fixed point below
    const double g = config.existence_gain, d = config.existence_decay;
    const double fixed_after_miss = d * g / (1.0 - d * (1.0 - g));
    const double fixed_after_hit = fixed_after_miss + g * (1.0 - fixed_after_miss);
    AssociationResult hit, miss;
    hit.pairs = {{0, 0}};
    miss.unmatched_cones_in_fov = {0};
    s.cones[0].existence = config.existence_initial;
    double e = s.cones[0].existence;
    for (int i = 0; i < 200; ++i) {
      s = apply_negative_observations(s, i % 2 == 0 ? hit : miss, config);
      REQUIRE(s.find(0) != nullptr);
      e = i % 2 == 0 ? e + g * (1.0 - e) : e * d;
      CHECK(s.find(0)->existence == doctest::Approx(e).epsilon(1e-12));
      if (i > 100) {
        const double expect = i % 2 == 0 ? fixed_after_hit : fixed_after_miss;
        CHECK(s.find(0)->existence == doctest::Approx(expect).epsilon(1e-9));
      }
    }
    CHECK(fixed_after_miss > config.existence_floor);
  }
}

TEST_CASE("decay calibration meets the rejection time") {
  for (double rate : {5.0, 10.0, 20.0, 30.0}) {
    const LocalMapConfig c = LocalMapConfig::for_frame_rate(rate);
    double e = 1.0;
    int misses = 0;
    while (e >= c.existence_floor) {
      e *= c.existence_decay;
      ++misses;
    }
    CHECK(misses / rate <= 0.5);
  }
}

TEST_CASE("noise-free straight segment reproduces ground truth") {
  std::vector<Vector2d> truth;
  for (int i = 0; i < 20; ++i) {
    truth.emplace_back(4.0 * i, 1.75);
    truth.emplace_back(4.0 * i, -1.75);
  }
  LocalMap map(LocalMapConfig::for_frame_rate(10.0));
  const Frustum sensor{15.0, 1.2};
  LocalMapSnapshot last;
  for (int k = 0; k <= 100; ++k) {
    Frame f;
    f.timestamp = 0.1 * k;
    f.dt = k == 0 ? 0.0 : 0.1;
    f.velocity = k == 0 ? Velocity2d{} : Velocity2d{5.0, 0.0, 0.0};
    const Pose2d ego(0.5 * k, 0.0, 0.0);
    std::vector<Vector2d> visible;
    for (const Vector2d& p : truth) {
      const Vector2d b = to_body(ego, p);
      if (sensor.contains(b)) visible.push_back(b);
    }
    f.batches.push_back(batch(SensorSource::kFusion, visible, 1e-4));
    last = map.ingest_frame(f);
    for (const ConeEstimate& c : last.cones) {
      double best = 1e9;
      for (const Vector2d& p : truth) best = std::min(best, (p - c.position.mean).norm());
      CHECK(best < 1e-9);
    }
  }
  CHECK(last.ego.x == doctest::Approx(50.0));
  CHECK_FALSE(last.cones.empty());
}

TEST_CASE("injected false positive disappears within 0.5 s and snapshots stay frozen") {
  LocalMap map(LocalMapConfig::for_frame_rate(10.0));
  ConeEstimate fp = cone_at(0, {6, 0});
  fp.existence = 1.0;
  const std::int64_t id = map.insert_cone(fp);

  Frame f0;
  f0.batches.push_back(batch(SensorSource::kFusion, {}));
  const LocalMapSnapshot first = map.ingest_frame(f0);
  REQUIRE(first.cones.size() == 1);
  const ConeEstimate frozen = first.cones[0];

  double removed_at = -1.0;
  for (int k = 1; k <= 10; ++k) {
    Frame f;
    f.timestamp = 0.1 * k;
    f.dt = 0.1;
    f.batches.push_back(batch(SensorSource::kFusion, {}));
    const auto snap = map.ingest_frame(f);
    const bool present = std::any_of(snap.cones.begin(), snap.cones.end(),
                                     [&](const ConeEstimate& c) { return c.id == id; });
    if (!present && removed_at < 0) removed_at = f.timestamp;
  }
  CHECK(removed_at >= 0.0);
  CHECK(removed_at <= 0.5 + 1e-9);
  CHECK(first.cones.size() == 1);
  CHECK(first.cones[0].existence == frozen.existence);
  CHECK(first.cones[0].position.cov == frozen.position.cov);
}

TEST_CASE("mode selection follows pipeline staleness") {
  LocalMap map;
  CHECK_FALSE(map.select_mode(0.0).has_value());

  Frame f;
  f.batches = {batch(SensorSource::kFusion, {}), batch(SensorSource::kLidarOnly, {}),
               batch(SensorSource::kCameraOnly, {})};
  map.ingest_frame(f);
  CHECK(map.select_mode(0.0) == Mode::kFusion);

  // fusion stops: lidar and camera together give degraded mode
  for (int k = 1; k <= 5; ++k) {
    Frame g;
    g.timestamp = 0.1 * k;
    g.dt = 0.1;
    g.batches = {batch(SensorSource::kLidarOnly, {}), batch(SensorSource::kCameraOnly, {})};
    map.ingest_frame(g);
  }
  CHECK(map.state().mode == Mode::kDegraded);

  for (int k = 6; k <= 10; ++k) {
    Frame g;
    g.timestamp = 0.1 * k;
    g.dt = 0.1;
    g.batches = {batch(SensorSource::kCameraOnly, {})};
    map.ingest_frame(g);
  }
  CHECK(map.state().mode == Mode::kCameraOnly);

  Frame stale;
  stale.timestamp = 5.0;
  stale.dt = 4.0;
  map.ingest_frame(stale);
  CHECK_FALSE(map.select_mode(5.0).has_value());

  Frame backwards;
  backwards.timestamp = 1.0;
  CHECK_THROWS_AS(map.ingest_frame(backwards), std::invalid_argument);
}

TEST_CASE("fusion mode ignores the other pipelines") {
  LocalMap map;
  Frame f;
  f.batches = {batch(SensorSource::kFusion, {{5, 1}}), batch(SensorSource::kLidarOnly, {{5, -1}, {8, 0}})};
  const auto snap = map.ingest_frame(f);
  REQUIRE(snap.cones.size() == 1);
  CHECK((snap.cones[0].position.mean - Vector2d(5, 1)).norm() < 1e-12);
}

TEST_CASE("cone ids are unique and stable across snapshots") {
  LocalMap map;
  std::vector<std::int64_t> seen;
  for (int k = 0; k < 20; ++k) {
    Frame f;
    f.timestamp = 0.1 * k;
    f.dt = k == 0 ? 0.0 : 0.1;
    f.batches.push_back(batch(SensorSource::kFusion, {{5, 1}, {5, -1}, {9, 1.0 + 0.1 * k}}));
    const auto snap = map.ingest_frame(f);
    std::vector<std::int64_t> ids;
    for (const auto& c : snap.cones) ids.push_back(c.id);
    CHECK(std::is_sorted(ids.begin(), ids.end()));
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
    if (k == 0) seen = ids;
  }
  for (std::int64_t id : seen) CHECK(map.state().find(id) != nullptr);
}
