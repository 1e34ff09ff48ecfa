#include "conetrack/sim/track.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace conetrack::sim {

namespace {

constexpr double kPi = std::numbers::pi;

/// Constant-curvature piece of a centerline. curvature 0 is a straight.
struct Segment {
  double length;
  double curvature;
};

Pose2d advance(const Pose2d& start, const Segment& seg, double s) {
  if (std::abs(seg.curvature) < 1e-12) {
    return {start.x + s * std::cos(start.theta), start.y + s * std::sin(start.theta),
            start.theta};
  }
  const double k = seg.curvature;
  const double th = start.theta + k * s;
  return {start.x + (std::sin(th) - std::sin(start.theta)) / k,
          start.y - (std::cos(th) - std::cos(start.theta)) / k, th};
}

/// Exact evaluation of a chain of segments starting at the origin.
class SegmentPath {
 public:
  explicit SegmentPath(std::vector<Segment> segments) : segments_(std::move(segments)) {
    Pose2d pose;
    starts_.reserve(segments_.size());
    offsets_.reserve(segments_.size());
    double s = 0.0;
    for (const Segment& seg : segments_) {
      starts_.push_back(pose);
      offsets_.push_back(s);
      pose = advance(pose, seg, seg.length);
      s += seg.length;
    }
    end_ = pose;
    length_ = s;
  }

  double length() const { return length_; }
  const Pose2d& end() const { return end_; }

  Pose2d pose(double s) const {
    s = std::clamp(s, 0.0, length_);
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), s);
    const std::size_t i = static_cast<std::size_t>(std::distance(offsets_.begin(), it)) - 1;
    return advance(starts_[i], segments_[i], s - offsets_[i]);
  }

 private:
  std::vector<Segment> segments_;
  std::vector<Pose2d> starts_;
  std::vector<double> offsets_;
  Pose2d end_;
  double length_{0.0};
};

std::vector<Vector2d> sample_centerline(const SegmentPath& path, double step) {
  const auto n = static_cast<std::size_t>(std::ceil(path.length() / step));
  const double ds = path.length() / static_cast<double>(n);
  std::vector<Vector2d> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back(path.pose(static_cast<double>(i) * ds).translation());
  }
  return pts;
}

/// Centerline stations that split one boundary into n equal arc lengths.
std::vector<double> boundary_stations(const SegmentPath& path, double offset, std::size_t n) {
  const auto samples = static_cast<std::size_t>(std::ceil(path.length() / 0.01));
  const double ds = path.length() / static_cast<double>(samples);
  auto boundary = [&](double s) {
    const Pose2d p = path.pose(s);
    return Vector2d(p.translation() + offset * Vector2d(-std::sin(p.theta), std::cos(p.theta)));
  };
  std::vector<double> arc(samples + 1, 0.0);
  Vector2d prev = boundary(0.0);
  for (std::size_t i = 1; i <= samples; ++i) {
    const Vector2d b = i == samples ? boundary(0.0) : boundary(static_cast<double>(i) * ds);
    arc[i] = arc[i - 1] + (b - prev).norm();
    prev = b;
  }
  std::vector<double> stations;
  stations.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double target = arc.back() * static_cast<double>(k) / static_cast<double>(n);
    const auto it = std::lower_bound(arc.begin(), arc.end(), target);
    const std::size_t i = std::max<std::size_t>(1, static_cast<std::size_t>(it - arc.begin()));
    const double span = arc[i] - arc[i - 1];
    const double f = span > 0.0 ? (target - arc[i - 1]) / span : 0.0;
    stations.push_back((static_cast<double>(i - 1) + f) * ds);
  }
  return stations;
}

// Each side gets floor(centerline length / spacing) cones, evenly spaced
// along its own boundary.
std::vector<TrackCone> place_cones(const SegmentPath& path, const TrackSpec& spec) {
  const auto n = static_cast<std::size_t>(std::floor(path.length() / spec.cone_spacing));
  const double half = 0.5 * spec.width;
  const std::vector<double> left = boundary_stations(path, half, n);
  const std::vector<double> right = boundary_stations(path, -half, n);
  auto at = [&](double s, double offset) {
    const Pose2d p = path.pose(s);
    return Vector2d(p.translation() + offset * Vector2d(-std::sin(p.theta), std::cos(p.theta)));
  };
  std::vector<TrackCone> cones;
  cones.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool start = spec.orange_start && i == 0;
    cones.push_back({at(left[i], half), start ? ConeColor::kOrange : ConeColor::kBlue});
    cones.push_back({at(right[i], -half), start ? ConeColor::kOrange : ConeColor::kYellow});
  }
  return cones;
}

// Non-neighbouring parts of the loop must stay apart so that boundaries of
// different track sections never touch.
bool has_clearance(const SegmentPath& path, double clearance) {
  const double step = 1.0;
  const auto n = static_cast<std::size_t>(std::ceil(path.length() / step));
  std::vector<Vector2d> pts;
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back(path.pose(static_cast<double>(i) * path.length() / n).translation());
  }
  const double ds = path.length() / static_cast<double>(n);
  const double min_separation = clearance * kPi / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double along = static_cast<double>(j - i) * ds;
      const double cyclic = std::min(along, path.length() - along);
      if (cyclic < min_separation) continue;
      if ((pts[i] - pts[j]).norm() < clearance) return false;
    }
  }
  return true;
}

double max_same_side_spacing(const std::vector<TrackCone>& cones) {
  double worst = 0.0;
  const std::size_t pairs = cones.size() / 2;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t j = (i + 1) % pairs;
    for (std::size_t side = 0; side < 2; ++side) {
      worst = std::max(worst, (cones[2 * i + side].position - cones[2 * j + side].position).norm());
    }
  }
  return worst;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(attempt)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::optional<std::vector<Segment>> try_random_layout(const TrackSpec& spec, std::mt19937_64& rng) {
  using Uniform = std::uniform_real_distribution<double>;
  const double r_lo = spec.min_radius + 1.5;
  const double r_hi = std::max(spec.min_radius + 4.0, 22.0);

  struct Turn {
    double angle;
    double radius;
  };
  std::vector<Turn> turns;
  const int regular = std::uniform_int_distribution<int>(4, 7)(rng);
  for (int i = 0; i < regular; ++i) {
    turns.push_back({Uniform(-0.5 * kPi, 0.8 * kPi)(rng), Uniform(r_lo, r_hi)(rng)});
  }
  for (int h = 0; h < spec.hairpins; ++h) {
    const double sign = Uniform(0.0, 1.0)(rng) < 0.7 ? 1.0 : -1.0;
    const auto at = std::uniform_int_distribution<std::size_t>(0, turns.size())(rng);
    turns.insert(turns.begin() + static_cast<std::ptrdiff_t>(at),
                 Turn{sign * Uniform(0.85 * kPi, kPi)(rng),
                      Uniform(spec.min_radius, spec.min_radius + 1.5)(rng)});
  }
  double turned = 0.0;
  double arc_length = 0.0;
  for (const Turn& t : turns) {
    turned += t.angle;
    arc_length += t.radius * std::abs(t.angle);
  }
  const double closing = 2.0 * kPi - turned;
  if (std::abs(closing) > 0.9 * kPi || std::abs(closing) < 0.15 * kPi) return std::nullopt;
  const Turn last{closing, Uniform(r_lo, r_hi)(rng)};
  arc_length += last.radius * std::abs(last.angle);

  const double straight_budget = spec.target_length - arc_length;
  if (straight_budget < 10.0) return std::nullopt;
  std::vector<double> weights(turns.size());
  double weight_sum = 0.0;
  for (double& w : weights) {
    w = Uniform(0.2, 1.0)(rng);
    weight_sum += w;
  }
  const double share = Uniform(0.5, 0.85)(rng);

  std::vector<Segment> segments;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    segments.push_back({std::max(3.0, straight_budget * share * weights[i] / weight_sum), 0.0});
    segments.push_back({turns[i].radius * std::abs(turns[i].angle),
                        std::copysign(1.0 / turns[i].radius, turns[i].angle)});
  }

  // Close the loop with straight(a), the last arc, straight(b).
  const Pose2d end = SegmentPath(segments).end();
  const Segment arc{last.radius * std::abs(last.angle), std::copysign(1.0 / last.radius, last.angle)};
  const Pose2d arc_end = advance(Pose2d(0.0, 0.0, end.theta), arc, arc.length);
  Matrix2d a;
  a << std::cos(end.theta), std::cos(end.theta + closing), std::sin(end.theta),
      std::sin(end.theta + closing);
  const Vector2d rhs = -end.translation() - arc_end.translation();
  const Vector2d ab = a.fullPivLu().solve(rhs);
  if (!ab.allFinite() || ab[0] < 3.0 || ab[1] < 3.0) return std::nullopt;
  segments.push_back({ab[0], 0.0});
  segments.push_back(arc);
  segments.push_back({ab[1], 0.0});
  return segments;
}

}  // namespace

void validate_spec(const TrackSpec& spec) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("track spec: " + msg); };
  if (!(spec.width > 0.0)) fail("width must be positive");
  if (spec.width < spec.rules.min_width || spec.width > spec.rules.max_width) {
    fail("width outside rule bounds");
  }
  if (!(spec.cone_spacing > 0.0)) fail("cone spacing must be positive");
  if (spec.cone_spacing > spec.rules.max_cone_spacing) fail("cone spacing exceeds rule limit");
  if (!(spec.centerline_step > 0.0)) fail("centerline step must be positive");
  if (spec.hairpins < 0) fail("hairpin count must be non-negative");
  if (spec.kind == TrackSpec::Kind::kCircle) {
    if (spec.radius < spec.width) fail("radius too small for track width");
  } else {
    if (spec.min_radius < spec.width) fail("minimum radius too small for track width");
    if (!(spec.target_length > 0.0)) fail("target length must be positive");
  }
}

TrackDefinition generate_track(const TrackSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  if (spec.kind == TrackSpec::Kind::kCircle) {
    const SegmentPath path({{2.0 * kPi * spec.radius, 1.0 / spec.radius}});
    return {place_cones(path, spec), sample_centerline(path, spec.centerline_step), path.length()};
  }

  constexpr int kMaxAttempts = 20000;
  const double clearance = spec.width + 3.0;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    const auto layout = try_random_layout(spec, rng);
    if (!layout) continue;
    const SegmentPath path(*layout);
    if (std::abs(path.length() - spec.target_length) > spec.length_tolerance * spec.target_length) {
      continue;
    }
    if (!has_clearance(path, clearance)) continue;
    auto cones = place_cones(path, spec);
    if (max_same_side_spacing(cones) > spec.rules.max_cone_spacing) continue;
    return {std::move(cones), sample_centerline(path, spec.centerline_step), path.length()};
  }
  throw std::invalid_argument("track spec: no feasible layout found");
}

Centerline::Centerline(std::vector<Vector2d> points) : points_(std::move(points)) {
  if (points_.size() < 3) throw std::invalid_argument("centerline needs at least 3 points");
  const std::size_t n = points_.size();
  cumulative_.assign(n + 1, 0.0);
  std::vector<double> seg_heading(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector2d d = points_[(i + 1) % n] - points_[i];
    cumulative_[i + 1] = cumulative_[i] + d.norm();
    seg_heading[i] = std::atan2(d.y(), d.x());
  }
  vertex_heading_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = seg_heading[(i + n - 1) % n];
    vertex_heading_[i] = normalize_angle(prev + 0.5 * normalize_angle(seg_heading[i] - prev));
  }
}

double Centerline::wrap(double s) const {
  const double l = length();
  double w = std::fmod(s, l);
  if (w < 0.0) w += l;
  return w;
}

std::size_t Centerline::segment_index(double s) const {
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const auto i = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
  return std::min(i == 0 ? 0 : i - 1, points_.size() - 1);
}

Vector2d Centerline::position(double s) const {
  s = wrap(s);
  const std::size_t i = segment_index(s);
  const double len = cumulative_[i + 1] - cumulative_[i];
  const double f = len > 0.0 ? (s - cumulative_[i]) / len : 0.0;
  return (1.0 - f) * points_[i] + f * points_[(i + 1) % points_.size()];
}

double Centerline::heading(double s) const {
  s = wrap(s);
  const std::size_t i = segment_index(s);
  const double len = cumulative_[i + 1] - cumulative_[i];
  const double f = len > 0.0 ? (s - cumulative_[i]) / len : 0.0;
  const double h0 = vertex_heading_[i];
  const double h1 = vertex_heading_[(i + 1) % points_.size()];
  return normalize_angle(h0 + f * normalize_angle(h1 - h0));
}

Pose2d Centerline::pose(double s) const {
  const Vector2d p = position(s);
  return {p.x(), p.y(), heading(s)};
}

double Centerline::curvature(double s, double half_window) const {
  return normalize_angle(heading(s + half_window) - heading(s - half_window)) / (2.0 * half_window);
}

double Centerline::project(const Vector2d& p) const {
  double best = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  const std::size_t n = points_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vector2d a = points_[i];
    const Vector2d d = points_[(i + 1) % n] - a;
    const double len2 = d.squaredNorm();
    const double f = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    const double dist = (a + f * d - p).squaredNorm();
    if (dist < best) {
      best = dist;
      best_s = cumulative_[i] + f * (cumulative_[i + 1] - cumulative_[i]);
    }
  }
  return best_s;
}

double Centerline::distance_to(const Vector2d& p) const {
  return (position(project(p)) - p).norm();
}

TrackBoundaries boundaries(const TrackDefinition& track) {
  const Centerline center(track.centerline);
  std::vector<std::pair<double, Vector2d>> left;
  std::vector<std::pair<double, Vector2d>> right;
  for (const TrackCone& cone : track.cones) {
    const double s = center.project(cone.position);
    bool is_left = cone.color == ConeColor::kBlue;
    if (cone.color == ConeColor::kOrange) {
      const Pose2d p = center.pose(s);
      is_left = to_body(p, cone.position).y() > 0.0;
    }
    (is_left ? left : right).emplace_back(s, cone.position);
  }
  auto ordered = [](std::vector<std::pair<double, Vector2d>>& v) {
    std::stable_sort(v.begin(), v.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Vector2d> out;
    out.reserve(v.size());
    for (const auto& e : v) out.push_back(e.second);
    return out;
  };
  return {ordered(left), ordered(right)};
}

Pose2d start_pose(const TrackDefinition& track) { return Centerline(track.centerline).pose(0.0); }

}  // namespace conetrack::sim
