#include "conetrack/planner/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace conetrack::planner {

PriorConfig PriorConfig::defaults(int desired_edges, double max_length) {
  PriorConfig c;
  c.w_prior = 29.0;
  for (int j = 0; j < 5; ++j) c.terms[static_cast<std::size_t>(j)] = {0.1, 0.0, 1.0};
  c.terms[5] = {0.5, max_length, max_length * max_length};
  c.terms[0].scale = std::numbers::pi * std::numbers::pi;
  c.terms[4].setpoint = static_cast<double>(desired_edges);
  c.terms[4].scale = std::max(1.0, static_cast<double>(desired_edges) * desired_edges);
  return c;
}

void PriorConfig::validate() const {
  if (w_prior < 0.0) throw std::invalid_argument("prior: W_prior must be non-negative");
  for (const FeatureTerm& t : terms) {
    if (t.weight < 0.0 || !(t.scale > 0.0)) {
      throw std::invalid_argument("prior: weights must be non-negative and scalings positive");
    }
  }
}

PlannerInput make_input(const local_map::LocalMapSnapshot& snapshot, double input_radius,
                        double min_existence) {
  PlannerInput in;
  in.ego = snapshot.ego;
  for (const ConeEstimate& c : snapshot.cones) {
    if ((c.position.mean - snapshot.ego.translation()).norm() > input_radius) continue;
    if (c.existence < min_existence) continue;
    in.positions.push_back(c.position.mean);
    in.colors.push_back(c.color);
    in.ids.push_back(c.id);
  }
  return in;
}

namespace {

Vector2d centroid(const Triangulation& tri, std::span<const Vector2d> points, int t) {
  const auto& v = tri.triangles[static_cast<std::size_t>(t)];
  return (points[static_cast<std::size_t>(v[0])] + points[static_cast<std::size_t>(v[1])] +
          points[static_cast<std::size_t>(v[2])]) /
         3.0;
}

double population_std(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

/// Arc length along the origin-waypoint polyline of the point closest to p.
double station(const CandidatePath& path, const Vector2d& p) {
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double travelled = 0.0;
  Vector2d a = path.origin;
  for (const Vector2d& b : path.waypoints) {
    const Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const double d = (a + t * ab - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best_s = travelled + t * std::sqrt(len2);
    }
    travelled += std::sqrt(len2);
    a = b;
  }
  return best_s;
}

/// Gaps between same-side cones taken in their order along the path.
double gap_std(const CandidatePath& path, const std::vector<int>& cones, std::span<const Vector2d> points) {
  if (cones.size() < 2) return 0.0;
  std::vector<std::pair<double, int>> ordered;
  for (int c : cones) ordered.emplace_back(station(path, points[static_cast<std::size_t>(c)]), c);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> gaps;
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    gaps.push_back((points[static_cast<std::size_t>(ordered[i].second)] -
                    points[static_cast<std::size_t>(ordered[i - 1].second)])
                       .norm());
  }
  return population_std(gaps);
}

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

/// Per-cone log contributions for each side assignment.
struct LikelihoodTable {
  std::vector<double> any;
  std::vector<double> left;
  std::vector<double> right;

  LikelihoodTable(std::span<const ColorDistribution> colors, double floor) {
    for (const ColorDistribution& c : colors) {
      any.push_back(std::log(std::max({c.p_blue, c.p_yellow, c.p_unknown, floor})));
      left.push_back(std::log(std::max({c.p_blue, c.p_unknown, floor})));
      right.push_back(std::log(std::max({c.p_yellow, c.p_unknown, floor})));
    }
  }

  double evaluate(const CandidatePath& path) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < any.size(); ++i) {
      const int idx = static_cast<int>(i);
      if (contains(path.left_cones, idx)) {
        sum += left[i];
      } else if (contains(path.right_cones, idx)) {
        sum += right[i];
      } else {
        sum += any[i];
      }
    }
    return sum;
  }
};

void score_with(CandidatePath& path, const PlannerInput& input, const PlannerConfig& config,
                const LikelihoodTable& table) {
  path.features = compute_features(path, input.positions, config.desired_edges);
  path.log_prior = log_prior(path.features, config.prior);
  path.log_likelihood = table.evaluate(path);
  path.log_posterior = path.log_prior + path.log_likelihood;
}

}  // namespace

int start_triangle(const Triangulation& tri, std::span<const Vector2d> points, const Pose2d& ego,
                   double probe_distance) {
  if (tri.empty()) return -1;
  const Vector2d probe = transform_point(ego, Vector2d(probe_distance, 0.0));
  const int inside = locate(tri, points, probe);
  if (inside >= 0) return inside;
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int t = 0; t < static_cast<int>(tri.triangles.size()); ++t) {
    const double d = (centroid(tri, points, t) - probe).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = t;
    }
  }
  return best;
}

std::vector<CandidatePath> enumerate_paths(const Triangulation& tri,
                                           std::span<const Vector2d> points, const Pose2d& ego,
                                           const SearchLimits& limits, const PathRanker& ranker) {
  std::vector<CandidatePath> results;
  const int start = start_triangle(tri, points, ego, limits.probe_distance);
  if (start < 0) return results;

  struct Node {
    CandidatePath path;
    int triangle;
    int entry_edge;
    double length;
    std::size_t result_index;
    double rank;
  };

  Node root{};
  root.path.origin = ego.translation();
  root.path.origin_heading = ego.theta;
  root.path.triangles = {start};
  root.triangle = start;
  root.entry_edge = -1;
  root.result_index = SIZE_MAX;
  std::vector<Node> open{std::move(root)};

  for (int depth = 0; depth < limits.max_edges && !open.empty(); ++depth) {
    std::vector<Node> level;
    for (const Node& node : open) {
      int children = 0;
      const auto& edges = tri.triangle_edges[static_cast<std::size_t>(node.triangle)];
      for (int k = 0; k < 3; ++k) {
        const int e = edges[static_cast<std::size_t>(k)];
        if (e == node.entry_edge) continue;
        const int next = tri.neighbor(node.triangle, e);
        if (next < 0 || contains(node.path.triangles, next)) continue;
        const auto& edge = tri.edges[static_cast<std::size_t>(e)];
        const Vector2d& pa = points[static_cast<std::size_t>(edge.a)];
        const Vector2d& pb = points[static_cast<std::size_t>(edge.b)];
        if ((pa - pb).norm() > limits.max_edge_length) continue;
        const Vector2d mid = 0.5 * (pa + pb);
        const Vector2d prev =
            node.path.waypoints.empty() ? node.path.origin : node.path.waypoints.back();
        if (depth == 0) {
          const double heading = std::atan2(mid.y() - prev.y(), mid.x() - prev.x());
          if (std::abs(normalize_angle(heading - ego.theta)) > limits.max_initial_turn) continue;
        }
        const Vector2d dir = centroid(tri, points, next) - centroid(tri, points, node.triangle);
        const Vector2d ab = pa - pb;
        const bool a_left = dir.x() * ab.y() - dir.y() * ab.x() > 0.0;
        const int left = a_left ? edge.a : edge.b;
        const int right = a_left ? edge.b : edge.a;
        if (contains(node.path.right_cones, left) || contains(node.path.left_cones, right)) continue;

        Node child{node.path, next, e, node.length + (mid - prev).norm(), SIZE_MAX, 0.0};
        child.path.waypoints.push_back(mid);
        child.path.crossed_edges.emplace_back(edge.a, edge.b);
        child.path.triangles.push_back(next);
        if (!contains(child.path.left_cones, left)) child.path.left_cones.push_back(left);
        if (!contains(child.path.right_cones, right)) child.path.right_cones.push_back(right);
        child.path.maximal =
            child.length >= limits.max_length ||
            static_cast<int>(child.path.crossed_edges.size()) >= limits.max_edges;
        if (ranker) child.rank = ranker(child.path);
        level.push_back(std::move(child));
        ++children;
      }
      if (children == 0 && node.result_index != SIZE_MAX) results[node.result_index].maximal = true;
    }

    if (ranker && limits.beam_width > 0 && static_cast<int>(level.size()) > limits.beam_width) {
      std::stable_sort(level.begin(), level.end(),
                       [](const Node& a, const Node& b) { return a.rank > b.rank; });
      level.resize(static_cast<std::size_t>(limits.beam_width));
    }

    open.clear();
    for (Node& node : level) {
      node.result_index = results.size();
      results.push_back(node.path);
      if (!node.path.maximal) open.push_back(std::move(node));
    }
  }
  return results;
}

Features compute_features(const CandidatePath& path, std::span<const Vector2d> points,
                          int desired_edges) {
  Features f{};
  double max_turn = 0.0;
  double heading = path.origin_heading;
  Vector2d prev = path.origin;
  double length = 0.0;
  for (const Vector2d& w : path.waypoints) {
    const Vector2d d = w - prev;
    const double h = std::atan2(d.y(), d.x());
    max_turn = std::max(max_turn, std::abs(normalize_angle(h - heading)));
    heading = h;
    length += d.norm();
    prev = w;
  }
  f[0] = max_turn;
  f[1] = gap_std(path, path.left_cones, points);
  f[2] = gap_std(path, path.right_cones, points);
  std::vector<double> widths;
  for (const auto& [a, b] : path.crossed_edges) {
    widths.push_back((points[static_cast<std::size_t>(a)] - points[static_cast<std::size_t>(b)]).norm());
  }
  f[3] = population_std(widths);
  f[4] = static_cast<double>(
      std::min(static_cast<int>(path.crossed_edges.size()), std::max(desired_edges, 0)));
  f[5] = length;
  return f;
}

double log_prior(const Features& features, const PriorConfig& config) {
  double sum = 0.0;
  for (std::size_t j = 0; j < features.size(); ++j) {
    const FeatureTerm& t = config.terms[j];
    const double d = features[j] - t.setpoint;
    sum += t.weight * d * d / t.scale;
  }
  return -config.w_prior * sum;
}

double log_likelihood(const CandidatePath& path, std::span<const ColorDistribution> colors,
                      double floor) {
  return LikelihoodTable(colors, floor).evaluate(path);
}

void score(CandidatePath& path, const PlannerInput& input, const PlannerConfig& config) {
  score_with(path, input, config, LikelihoodTable(input.colors, config.likelihood_floor));
}

std::optional<std::size_t> select_path(std::span<const CandidatePath> candidates) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!best) {
      best = i;
      continue;
    }
    const CandidatePath& c = candidates[i];
    const CandidatePath& b = candidates[*best];
    if (c.log_posterior > b.log_posterior ||
        (c.log_posterior == b.log_posterior &&
         (c.features[5] > b.features[5] ||
          (c.features[5] == b.features[5] && c.features[0] < b.features[0])))) {
      best = i;
    }
  }
  return best;
}

PlanResult plan(const PlannerInput& input, const PlannerConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  PlanResult result;
  result.input = input;
  const Triangulation tri = triangulate(result.input.positions);
  if (!tri.empty()) {
    const LikelihoodTable table(result.input.colors, config.likelihood_floor);
    const PathRanker ranker = [&](CandidatePath& p) {
      score_with(p, result.input, config, table);
      return p.log_posterior;
    };
    result.candidates =
        enumerate_paths(tri, result.input.positions, result.input.ego, config.limits, ranker);
    result.selected = select_path(result.candidates);
  }
  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

PlanResult plan(const local_map::LocalMapSnapshot& snapshot, const PlannerConfig& config) {
  return plan(make_input(snapshot, config.input_radius, config.min_existence), config);
}

PlanRecord make_record(const PlanResult& result, double timestamp, bool verbose,
                       std::optional<Pose2d> true_pose) {
  PlanRecord r;
  r.timestamp = timestamp;
  r.ego = result.input.ego;
  r.true_pose = true_pose;
  r.candidate_count = static_cast<int>(result.candidates.size());
  if (const CandidatePath* best = result.best()) {
    r.has_path = true;
    r.waypoints = best->waypoints;
    for (int i : best->left_cones) r.left_ids.push_back(result.input.ids[static_cast<std::size_t>(i)]);
    for (int i : best->right_cones) r.right_ids.push_back(result.input.ids[static_cast<std::size_t>(i)]);
    r.log_prior = best->log_prior;
    r.log_likelihood = best->log_likelihood;
    r.log_posterior = best->log_posterior;
    r.length = best->features[5];
  }
  if (verbose) {
    for (const CandidatePath& c : result.candidates) {
      r.candidates.push_back({c.log_prior, c.log_likelihood, c.log_posterior, c.features[5],
                              static_cast<int>(c.crossed_edges.size()), c.maximal});
    }
  }
  return r;
}

}  // namespace conetrack::planner
