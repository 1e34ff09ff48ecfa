#include "conetrack/planner/delaunay.hpp"
#include "conetrack/planner/planner.hpp"

#include "doctest.h"

#include <algorithm>
#include <numbers>
#include <random>

using namespace conetrack;
using namespace conetrack::planner;

namespace {

constexpr double kPi = std::numbers::pi;

/// Brute-force check: no input point strictly inside any circumcircle.
bool delaunay_ok(const Triangulation& tri, const std::vector<Vector2d>& pts) {
  for (const auto& t : tri.triangles) {
    const Vector2d &a = pts[t[0]], &b = pts[t[1]], &c = pts[t[2]];
    // explicit circumcentre rather than the library predicate
    const double d = 2.0 * (a.x() * (b.y() - c.y()) + b.x() * (c.y() - a.y()) + c.x() * (a.y() - b.y()));
    const double ux = (a.squaredNorm() * (b.y() - c.y()) + b.squaredNorm() * (c.y() - a.y()) +
                       c.squaredNorm() * (a.y() - b.y())) / d;
    const double uy = (a.squaredNorm() * (c.x() - b.x()) + b.squaredNorm() * (a.x() - c.x()) +
                       c.squaredNorm() * (b.x() - a.x())) / d;
    const Vector2d centre(ux, uy);
    const double r = (a - centre).norm();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (static_cast<int>(i) == t[0] || static_cast<int>(i) == t[1] || static_cast<int>(i) == t[2]) continue;
      if ((pts[i] - centre).norm() < r - 1e-9) return false;
    }
  }
  return true;
}

/// Straight corridor along +x with cones every `spacing` metres.
PlannerInput straight_corridor(int pairs, double spacing, double width, double x0 = 0.0) {
  PlannerInput in;
  for (int i = 0; i < pairs; ++i) {
    in.positions.emplace_back(x0 + spacing * i, 0.5 * width);
    in.colors.push_back(ColorDistribution::certain(ColorClass::kBlue));
    in.positions.emplace_back(x0 + spacing * i, -0.5 * width);
    in.colors.push_back(ColorDistribution::certain(ColorClass::kYellow));
  }
  for (std::size_t i = 0; i < in.positions.size(); ++i) in.ids.push_back(static_cast<std::int64_t>(i));
  in.ego = Pose2d(0.5, 0.0, 0.0);
  return in;
}

CandidatePath path_from(Vector2d origin, double heading, std::vector<Vector2d> waypoints) {
  CandidatePath p;
  p.origin = origin;
  p.origin_heading = heading;
  p.waypoints = std::move(waypoints);
  return p;
}

int maximal_count(const std::vector<CandidatePath>& c) {
  return static_cast<int>(std::count_if(c.begin(), c.end(), [](const CandidatePath& p) { return p.maximal; }));
}

}  // namespace

TEST_CASE("triangulation small cases") {
  const std::vector<Vector2d> three{{0, 0}, {1, 0}, {0, 1}};
  CHECK(triangulate(three).triangles.size() == 1);

  const std::vector<Vector2d> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const Triangulation t = triangulate(square);
  CHECK(t.triangles.size() == 2);
  CHECK(t.edges.size() == 5);
  CHECK(std::count_if(t.edges.begin(), t.edges.end(), [](const auto& e) { return e.interior(); }) == 1);

  const std::vector<Vector2d> collinear{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  CHECK(triangulate(collinear).empty());
  const std::vector<Vector2d> two{{0, 0}, {1, 0}};
  CHECK(triangulate(two).empty());

  const std::vector<Vector2d> dup{{0, 0}, {1, 0}, {0, 1}, {1, 0}};
  const Triangulation td = triangulate(dup);
  CHECK(td.triangles.size() == 1);
  CHECK(td.vertices.size() == 3);
}

TEST_CASE("random triangulations satisfy the circumcircle property") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vector2d> pts;
    for (int i = 0; i < 50; ++i) pts.emplace_back(u(rng), u(rng));
    const Triangulation t = triangulate(pts);
    CHECK(delaunay_ok(t, pts));
    for (const auto& tr : t.triangles) CHECK(orientation(pts[tr[0]], pts[tr[1]], pts[tr[2]]) > 0.0);

    // Euler relation for a triangulated point set: T = 2n - h - 2, E = 3n - h - 3
    int hull = 0;
    for (const auto& e : t.edges) hull += !e.interior();
    CHECK(static_cast<int>(t.triangles.size()) == 2 * 50 - hull - 2);
    CHECK(static_cast<int>(t.edges.size()) == 3 * 50 - hull - 3);

    // adjacency is symmetric
    for (int tri = 0; tri < static_cast<int>(t.triangles.size()); ++tri) {
      for (int e : t.triangle_edges[tri]) {
        const int other = t.neighbor(tri, e);
        if (other >= 0) CHECK(t.neighbor(other, e) == tri);
      }
    }
  }
}

TEST_CASE("predicates and point location") {
  CHECK(orientation({0, 0}, {1, 0}, {0, 1}) > 0.0);
  CHECK(orientation({0, 0}, {0, 1}, {1, 0}) < 0.0);
  CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {0.5, 0.5}) > 0.0);
  CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {3, 3}) < 0.0);

  const std::vector<Vector2d> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const Triangulation t = triangulate(square);
  CHECK(locate(t, square, {0.5, 0.2}) >= 0);
  CHECK(locate(t, square, {5.0, 5.0}) == -1);
}

TEST_CASE("single corridor has one maximal path") {
  // zig-zag ladder: the triangulation is a strip without branches
  PlannerInput in;
  for (int i = 0; i < 8; ++i) {
    in.positions.emplace_back(4.0 * i, 1.75);
    in.positions.emplace_back(4.0 * i + 2.0, -1.75);
  }
  const Triangulation tri = triangulate(in.positions);
  REQUIRE(!tri.empty());
  SearchLimits limits;
  limits.max_length = 100.0;
  limits.max_edges = 100;
  limits.beam_width = 0;
  const auto paths = enumerate_paths(tri, in.positions, Pose2d(0.5, 0.0, 0.0), limits);
  CHECK(maximal_count(paths) == 1);
  for (const auto& p : paths) {
    CHECK(p.waypoints.size() == p.crossed_edges.size());
    for (int l : p.left_cones) CHECK(std::find(p.right_cones.begin(), p.right_cones.end(), l) == p.right_cones.end());
  }
}

TEST_CASE("Y junction gives several maximal paths") {
  PlannerInput in;
  for (int i = 0; i < 3; ++i) {
    in.positions.emplace_back(4.0 * i, 2.0);
    in.positions.emplace_back(4.0 * i, -2.0);
  }
  // fork cone with two arms
  in.positions.emplace_back(11.0, 0.0);
  for (int i = 1; i <= 3; ++i) {
    in.positions.emplace_back(8.0 + 3.0 * i, 2.0 + 3.0 * i);
    in.positions.emplace_back(11.0 + 3.0 * i, 0.0 + 2.0 * i);
    in.positions.emplace_back(8.0 + 3.0 * i, -2.0 - 3.0 * i);
    in.positions.emplace_back(11.0 + 3.0 * i, 0.0 - 2.0 * i);
  }
  const Triangulation tri = triangulate(in.positions);
  SearchLimits limits;
  limits.beam_width = 0;
  limits.max_length = 30.0;
  const auto paths = enumerate_paths(tri, in.positions, Pose2d(0.5, 0.0, 0.0), limits);
  CHECK(maximal_count(paths) >= 2);
}

TEST_CASE("noise-free straight segment follows the centerline") {
  const PlannerInput in = straight_corridor(12, 4.0, 3.5);
  PlannerConfig config;
  const PlanResult r = plan(in, config);
  const CandidatePath* best = r.best();
  REQUIRE(best != nullptr);
  CHECK(best->features[5] >= config.limits.max_length);
  for (const Vector2d& w : best->waypoints) CHECK(std::abs(w.y()) < 1e-6);
  CHECK(best->log_likelihood == doctest::Approx(0.0));
  CHECK(best->features[0] < 1e-12);
  CHECK(best->features[1] < 1e-12);
  CHECK(best->features[2] < 1e-12);
}

TEST_CASE("feature examples") {
  const std::vector<Vector2d> none;
  const CandidatePath bend = path_from({0, 0}, 0.0, {{1, 0}, {1, 1}});
  const Features fb = compute_features(bend, none, 15);
  CHECK(fb[0] == doctest::Approx(kPi / 2));
  CHECK(fb[5] == doctest::Approx(2.0));

  // crossed edges of widths 3, 3 and 5
  const std::vector<Vector2d> pts{{0, 1.5}, {0, -1.5}, {2, 1.5}, {2, -1.5}, {4, 2.5}, {4, -2.5}};
  CandidatePath widths = path_from({-1, 0}, 0.0, {{0, 0}, {2, 0}, {4, 0}});
  widths.crossed_edges = {{0, 1}, {2, 3}, {4, 5}};
  const Features fw = compute_features(widths, pts, 15);
  CHECK(fw[3] == doctest::Approx(std::sqrt(8.0 / 9.0)).epsilon(1e-12));
  CHECK(fw[3] == doctest::Approx(0.9428).epsilon(1e-4));
  CHECK(fw[4] == 3.0);
  CHECK(compute_features(widths, pts, 2)[4] == 2.0);

  // straight and evenly spaced: every regularity feature vanishes
  const std::vector<Vector2d> even{{0, 1.5}, {0, -1.5}, {2, 1.5}, {2, -1.5}, {4, 1.5}, {4, -1.5}};
  CandidatePath straight = widths;
  straight.left_cones = {0, 2, 4};
  straight.right_cones = {1, 3, 5};
  const Features fs = compute_features(straight, even, 15);
  for (int j = 0; j < 4; ++j) CHECK(fs[j] == doctest::Approx(0.0));

  // one cone per side: std defined as zero
  CandidatePath sparse = straight;
  sparse.left_cones = {0};
  sparse.right_cones = {1};
  CHECK(compute_features(sparse, even, 15)[1] == 0.0);
}

TEST_CASE("log prior examples") {
  PriorConfig c;
  c.w_prior = 29.0;
  for (auto& t : c.terms) t = {0.1, 0.0, 1.0};
  Features f{};
  CHECK(log_prior(f, c) == 0.0);
  f[2] = 2.0;
  CHECK(log_prior(f, c) == doctest::Approx(-11.6).epsilon(1e-12));

  const PriorConfig d = PriorConfig::defaults();
  CHECK(d.w_prior == 29.0);
  for (int j = 0; j < 5; ++j) CHECK(d.terms[j].weight == 0.1);
  CHECK(d.terms[5].weight == 0.5);
  Features at_setpoints{};
  for (int j = 0; j < kFeatureCount; ++j) at_setpoints[j] = d.terms[j].setpoint;
  CHECK(log_prior(at_setpoints, d) == 0.0);
  CHECK_NOTHROW(d.validate());

  PriorConfig bad = d;
  bad.terms[1].scale = 0.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("log prior is monotone in every feature deviation") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-5.0, 5.0), step(0.0, 2.0);
  const PriorConfig c = PriorConfig::defaults();
  for (int i = 0; i < 5000; ++i) {
    Features f;
    for (auto& v : f) v = u(rng);
    const int j = static_cast<int>(rng() % kFeatureCount);
    Features g = f;
    const double dev = f[j] - c.terms[j].setpoint;
    g[j] = c.terms[j].setpoint + (dev >= 0 ? 1.0 : -1.0) * (std::abs(dev) + step(rng));
    CHECK(log_prior(g, c) <= log_prior(f, c));
  }
}

TEST_CASE("log likelihood examples") {
  CandidatePath p;
  p.left_cones = {0};
  p.right_cones = {1};
  std::vector<ColorDistribution> consistent{ColorDistribution::certain(ColorClass::kBlue),
                                            ColorDistribution::certain(ColorClass::kYellow),
                                            ColorDistribution::certain(ColorClass::kYellow)};
  CHECK(log_likelihood(p, consistent, 1e-6) == 0.0);

  std::vector<ColorDistribution> one{{0.7, 0.2, 0.1}};
  CandidatePath left_only;
  left_only.left_cones = {0};
  CHECK(log_likelihood(left_only, one, 1e-6) == doctest::Approx(std::log(0.7)).epsilon(1e-15));

  std::vector<ColorDistribution> contradiction{ColorDistribution::certain(ColorClass::kYellow)};
  CHECK(log_likelihood(left_only, contradiction, 1e-6) == doctest::Approx(std::log(1e-6)));
}

TEST_CASE("every cone contributes exactly one factor") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 20);
    std::vector<ColorDistribution> colors;
    for (int i = 0; i < n; ++i) colors.push_back(normalize({u(rng), u(rng), u(rng) * (trial % 3 == 0 ? 0 : 1)}));
    CandidatePath p;
    for (int i = 0; i < n; ++i) {
      const double r = u(rng);
      if (r < 0.3) p.left_cones.push_back(i);
      else if (r < 0.6) p.right_cones.push_back(i);
    }
    double expected = 0.0;
    for (int i = 0; i < n; ++i) {
      const ColorDistribution& c = colors[i];
      const bool l = std::find(p.left_cones.begin(), p.left_cones.end(), i) != p.left_cones.end();
      const bool r = std::find(p.right_cones.begin(), p.right_cones.end(), i) != p.right_cones.end();
      const double factor = l ? std::max(c.p_blue, c.p_unknown)
                              : r ? std::max(c.p_yellow, c.p_unknown)
                                  : std::max({c.p_blue, c.p_yellow, c.p_unknown});
      expected += std::log(std::max(factor, 1e-6));
    }
    CHECK(log_likelihood(p, colors, 1e-6) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("select_path") {
  CHECK_FALSE(select_path(std::vector<CandidatePath>{}).has_value());

  std::vector<CandidatePath> single(1);
  single[0].log_posterior = -1e9;
  CHECK(select_path(single) == 0u);

  // equal priors, one path with a contradicting colour
  std::vector<ColorDistribution> colors{ColorDistribution::certain(ColorClass::kBlue),
                                        ColorDistribution::certain(ColorClass::kYellow)};
  std::vector<CandidatePath> two(2);
  two[0].left_cones = {1};
  two[0].right_cones = {0};
  two[1].left_cones = {0};
  two[1].right_cones = {1};
  for (auto& c : two) {
    c.log_prior = -2.0;
    c.log_likelihood = log_likelihood(c, colors, 1e-6);
    c.log_posterior = c.log_prior + c.log_likelihood;
  }
  CHECK(select_path(two) == 1u);

  // ties: longer first, then smoother
  std::vector<CandidatePath> tied(3);
  tied[0].features[5] = 10.0;
  tied[1].features[5] = 12.0;
  tied[1].features[0] = 0.3;
  tied[2].features[5] = 12.0;
  tied[2].features[0] = 0.1;
  CHECK(select_path(tied) == 2u);
}

TEST_CASE("plan matches an exhaustive scoring oracle on random snapshots") {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(0.0, 1.0), jitter(-0.4, 0.4);
  PlannerConfig config;
  config.limits.beam_width = 0;
  for (int trial = 0; trial < 40; ++trial) {
    PlannerInput in = straight_corridor(6, 4.0, 3.5);
    for (auto& p : in.positions) p += Vector2d(jitter(rng), jitter(rng));
    for (auto& c : in.colors) c = normalize({u(rng), u(rng), 0.3 * u(rng)});
    in.positions.emplace_back(8.0 + jitter(rng), 0.3);  // stray cone inside the track
    in.colors.push_back(ColorDistribution::uniform());
    in.ids.push_back(99);

    const PlanResult r = plan(in, config);
    REQUIRE(r.selected.has_value());
    // rescore independently and take the argmax by hand
    std::size_t best = 0;
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
      CandidatePath c = r.candidates[i];
      score(c, in, config);
      CHECK(c.log_posterior == doctest::Approx(r.candidates[i].log_posterior).epsilon(1e-12));
      CHECK(std::abs(c.log_posterior - (c.log_prior + c.log_likelihood)) <= 1e-12);
      const CandidatePath& b = r.candidates[best];
      if (c.log_posterior > b.log_posterior ||
          (c.log_posterior == b.log_posterior &&
           (c.features[5] > b.features[5] || (c.features[5] == b.features[5] && c.features[0] < b.features[0])))) {
        best = i;
      }
    }
    CHECK(*r.selected == best);

    // scaling all colour evidence by a common factor leaves the choice unchanged
    PlannerInput scaled = in;
    for (auto& c : scaled.colors) c = ColorDistribution::from_evidence(7.5 * c.vector());
    const PlanResult rs = plan(scaled, config);
    REQUIRE(rs.best() != nullptr);
    CHECK(rs.best()->waypoints == r.best()->waypoints);
  }
}

TEST_CASE("make_input and records") {
  local_map::LocalMapSnapshot s;
  s.ego = Pose2d(1, 0, 0);
  for (int i = 0; i < 4; ++i) {
    ConeEstimate c;
    c.id = i;
    c.position.mean = Vector2d(5.0 * i * i, 0.0);
    c.existence = i == 1 ? 0.2 : 0.9;
    s.cones.push_back(c);
  }
  const PlannerInput in = make_input(s, 25.0, 0.4);
  CHECK(in.ids == std::vector<std::int64_t>{0, 2});
  CHECK(make_input(s, 25.0).ids.size() == 3);

  const PlanResult r = plan(straight_corridor(8, 4.0, 3.5), PlannerConfig{});
  const PlanRecord quiet = make_record(r, 1.5, false);
  CHECK(quiet.has_path);
  CHECK(quiet.candidates.empty());
  CHECK(quiet.candidate_count == static_cast<int>(r.candidates.size()));
  CHECK(quiet.length == r.best()->features[5]);
  const PlanRecord verbose = make_record(r, 1.5, true);
  CHECK(verbose.candidates.size() == r.candidates.size());

  const PlanResult empty = plan(PlannerInput{}, PlannerConfig{});
  CHECK_FALSE(make_record(empty, 0.0, false).has_path);
}
