#include "conetrack/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace conetrack::eval {

Pose2d fit_rigid(std::span<const Vector2d> src, std::span<const Vector2d> dst) {
  if (src.size() != dst.size() || src.empty()) {
    throw std::invalid_argument("fit_rigid: need equally many, at least one, points");
  }
  Vector2d cs = Vector2d::Zero();
  Vector2d cd = Vector2d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(src.size());
  double dot = 0.0;
  double cross = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vector2d p = src[i] - cs;
    const Vector2d q = dst[i] - cd;
    dot += p.dot(q);
    cross += p.x() * q.y() - p.y() * q.x();
  }
  const double angle = std::atan2(cross, dot);
  const Vector2d t = cd - rotation(angle) * cs;
  return Pose2d(t.x(), t.y(), angle);
}

namespace {

struct Matching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> residuals;
  double rmse{0.0};
};

Matching match(std::span<const Vector2d> estimated, std::span<const Vector2d> truth, const Pose2d& T,
               double reject_radius) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    const Vector2d p = transform_point(T, estimated[i]);
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const double d = (p - truth[j]).norm();
      if (d <= reject_radius) candidates.emplace_back(d, i, j);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> used_e(estimated.size(), false);
  std::vector<bool> used_t(truth.size(), false);
  Matching m;
  double sum = 0.0;
  for (const auto& [d, i, j] : candidates) {
    if (used_e[i] || used_t[j]) continue;
    used_e[i] = used_t[j] = true;
    m.pairs.emplace_back(i, j);
    m.residuals.push_back(d);
    sum += d * d;
  }
  if (!m.pairs.empty()) m.rmse = std::sqrt(sum / static_cast<double>(m.pairs.size()));
  return m;
}

bool coincident(std::span<const Vector2d> points) {
  return std::all_of(points.begin(), points.end(),
                     [&](const Vector2d& p) { return (p - points[0]).norm() < 1e-12; });
}

}  // namespace

AlignmentResult icp_align(std::span<const Vector2d> estimated, std::span<const Vector2d> truth,
                          const Pose2d& init, const IcpConfig& config,
                          std::span<const std::int64_t> ids) {
  if (estimated.empty() || truth.empty()) throw std::invalid_argument("icp_align: empty point set");
  if (!ids.empty() && ids.size() != estimated.size()) {
    throw std::invalid_argument("icp_align: one id per estimated point");
  }
  AlignmentResult result;
  result.degenerate = coincident(estimated) || coincident(truth);

  Pose2d T = init;
  Matching current = match(estimated, truth, T, config.reject_radius);
  result.rmse_history.push_back(current.rmse);
  if (!result.degenerate) {
    for (int iter = 0; iter < config.max_iterations && !current.pairs.empty(); ++iter) {
      std::vector<Vector2d> src;
      std::vector<Vector2d> dst;
      for (const auto& [i, j] : current.pairs) {
        src.push_back(estimated[i]);
        dst.push_back(truth[j]);
      }
      const Pose2d next_T = fit_rigid(src, dst);
      Matching next = match(estimated, truth, next_T, config.reject_radius);
      if (next.pairs.empty() || next.rmse > current.rmse) break;
      const double change = current.rmse - next.rmse;
      T = next_T;
      current = std::move(next);
      result.iterations = iter + 1;
      result.rmse_history.push_back(current.rmse);
      if (change < config.tolerance) break;
    }
  }

  result.rotation = T.theta;
  result.translation = T.translation();
  result.rmse = current.rmse;
  result.residuals = current.residuals;
  for (const auto& [i, j] : current.pairs) {
    const std::int64_t id = ids.empty() ? static_cast<std::int64_t>(i) : ids[i];
    result.correspondences.emplace_back(id, static_cast<int>(j));
  }
  result.unmatched_estimated = static_cast<int>(estimated.size() - current.pairs.size());
  result.unmatched_truth = static_cast<int>(truth.size() - current.pairs.size());
  return result;
}

double map_rmse(const AlignmentResult& alignment) {
  if (alignment.residuals.empty()) return 0.0;
  double sum = 0.0;
  for (double r : alignment.residuals) sum += r * r;
  return std::sqrt(sum / static_cast<double>(alignment.residuals.size()));
}

int length_bin(double length) {
  if (!(length > 0.0)) return 0;
  return static_cast<int>(std::min(std::floor(length), static_cast<double>(kHistogramBins - 1)));
}

double PlanningStats::out_of_track_within(double distance) const {
  double sum = 0.0;
  for (int b = 0; b < kHistogramBins && b < distance; ++b) {
    sum += out_of_track_histogram[static_cast<std::size_t>(b)];
  }
  return sum;
}

int winding_number(std::span<const Vector2d> polygon, const Vector2d& p) {
  int wn = 0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vector2d& a = polygon[i];
    const Vector2d& b = polygon[(i + 1) % n];
    const double side = (b.x() - a.x()) * (p.y() - a.y()) - (p.x() - a.x()) * (b.y() - a.y());
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && side > 0.0) ++wn;
    } else if (b.y() <= p.y() && side < 0.0) {
      --wn;
    }
  }
  return wn;
}

Corridor::Corridor(std::vector<Vector2d> left, std::vector<Vector2d> right)
    : left_(std::move(left)), right_(std::move(right)) {
  if (left_.size() < 3 || right_.size() < 3) {
    throw std::invalid_argument("corridor: boundaries need at least three points");
  }
}

bool Corridor::contains(const Vector2d& p) const {
  return (winding_number(left_, p) != 0) != (winding_number(right_, p) != 0);
}

namespace {

/// Parameter along a->b where it meets segment c->d, or a negative value.
double segment_hit(const Vector2d& a, const Vector2d& b, const Vector2d& c, const Vector2d& d) {
  const Vector2d r = b - a;
  const Vector2d s = d - c;
  const double denom = r.x() * s.y() - r.y() * s.x();
  if (denom == 0.0) return -1.0;
  const Vector2d ac = c - a;
  const double t = (ac.x() * s.y() - ac.y() * s.x()) / denom;
  const double u = (ac.x() * r.y() - ac.y() * r.x()) / denom;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return -1.0;
  return t;
}

double first_hit(const std::vector<Vector2d>& polyline, const Vector2d& a, const Vector2d& b) {
  double best = -1.0;
  for (std::size_t i = 0; i < polyline.size(); ++i) {
    const double t = segment_hit(a, b, polyline[i], polyline[(i + 1) % polyline.size()]);
    if (t >= 0.0 && (best < 0.0 || t < best)) best = t;
  }
  return best;
}

}  // namespace

double Corridor::first_crossing(const Vector2d& a, const Vector2d& b) const {
  const double tl = first_hit(left_, a, b);
  const double tr = first_hit(right_, a, b);
  if (tl < 0.0) return tr;
  if (tr < 0.0) return tl;
  return std::min(tl, tr);
}

double out_of_track_distance(const Corridor& corridor, const Vector2d& origin,
                             std::span<const Vector2d> waypoints) {
  if (!corridor.contains(origin)) return 0.0;
  double travelled = 0.0;
  Vector2d prev = origin;
  for (const Vector2d& w : waypoints) {
    const double len = (w - prev).norm();
    const double t = corridor.first_crossing(prev, w);
    if (t >= 0.0) return travelled + t * len;
    travelled += len;
    if (!corridor.contains(w)) return travelled;
    prev = w;
  }
  return -1.0;
}

PlanningStats planning_stats(std::span<const planner::PlanRecord> records,
                             const sim::TrackDefinition& truth, const Pose2d& world_origin) {
  PlanningStats stats;
  if (records.empty()) return stats;
  const Corridor corridor(sim::boundaries(truth));
  std::array<int, kHistogramBins> length_counts{};
  std::array<int, kHistogramBins> out_counts{};
  for (const planner::PlanRecord& r : records) {
    ++stats.paths;
    const Pose2d car = r.true_pose ? *r.true_pose : compose(world_origin, r.ego);
    std::vector<Vector2d> world;
    double length = 0.0;
    Vector2d prev = car.translation();
    for (const Vector2d& w : r.waypoints) {
      world.push_back(transform_point(car, to_body(r.ego, w)));
      length += (world.back() - prev).norm();
      prev = world.back();
    }
    ++length_counts[static_cast<std::size_t>(length_bin(r.has_path ? length : 0.0))];
    const double out = out_of_track_distance(corridor, car.translation(), world);
    if (out >= 0.0) {
      ++stats.out_of_track_paths;
      ++out_counts[static_cast<std::size_t>(length_bin(out))];
    }
  }
  for (int b = 0; b < kHistogramBins; ++b) {
    const auto i = static_cast<std::size_t>(b);
    stats.path_length_histogram[i] = static_cast<double>(length_counts[i]) / stats.paths;
    stats.out_of_track_histogram[i] = static_cast<double>(out_counts[i]) / stats.paths;
  }
  return stats;
}

double percentile(std::vector<double> samples, double p) {
  if (samples.empty()) throw std::invalid_argument("percentile: no samples");
  if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("percentile: p must be in (0, 100]");
  std::sort(samples.begin(), samples.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(samples.size())));
  return samples[std::max<std::size_t>(rank, 1) - 1];
}

TimingSummary summarize_timing(const std::vector<double>& samples) {
  TimingSummary s;
  s.count = static_cast<int>(samples.size());
  if (samples.empty()) return s;
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean_s = sum / static_cast<double>(samples.size());
  s.p50_s = percentile(samples, 50.0);
  s.p90_s = percentile(samples, 90.0);
  s.p99_s = percentile(samples, 99.0);
  s.max_s = *std::max_element(samples.begin(), samples.end());
  return s;
}

MapMetrics map_metrics(const AlignmentResult& a) {
  MapMetrics m;
  m.rmse_m = map_rmse(a);
  m.matched = static_cast<int>(a.correspondences.size());
  m.unmatched_estimated = a.unmatched_estimated;
  m.unmatched_truth = a.unmatched_truth;
  m.rotation_rad = a.rotation;
  m.translation_x_m = a.translation.x();
  m.translation_y_m = a.translation.y();
  m.degenerate = a.degenerate;
  return m;
}

std::string histogram_csv(const PlanningStats& stats) {
  std::ostringstream out;
  out << "bin_start_m,bin_end_m,path_length_fraction,out_of_track_fraction\n";
  for (int b = 0; b < kHistogramBins; ++b) {
    out << b << ',';
    if (b + 1 < kHistogramBins) {
      out << b + 1;
    } else {
      out << "inf";
    }
    out << ',' << stats.path_length_histogram[static_cast<std::size_t>(b)] << ','
        << stats.out_of_track_histogram[static_cast<std::size_t>(b)] << '\n';
  }
  return out.str();
}

}  // namespace conetrack::eval
