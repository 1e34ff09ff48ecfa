#include "conetrack/planner/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace conetrack::planner {

double orientation(const Vector2d& a, const Vector2d& b, const Vector2d& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

double incircle(const Vector2d& a, const Vector2d& b, const Vector2d& c, const Vector2d& d) {
  const Vector2d ad = a - d;
  const Vector2d bd = b - d;
  const Vector2d cd = c - d;
  const double a2 = ad.squaredNorm();
  const double b2 = bd.squaredNorm();
  const double c2 = cd.squaredNorm();
  return ad.x() * (bd.y() * c2 - b2 * cd.y()) - ad.y() * (bd.x() * c2 - b2 * cd.x()) +
         a2 * (bd.x() * cd.y() - bd.y() * cd.x());
}

int Triangulation::neighbor(int triangle, int edge) const {
  const Edge& e = edges[static_cast<std::size_t>(edge)];
  if (e.triangles[0] == triangle) return e.triangles[1];
  if (e.triangles[1] == triangle) return e.triangles[0];
  return -1;
}

namespace {

struct WorkTriangle {
  std::array<int, 3> v;
  Vector2d center;
  double radius2;
  bool alive;
};

WorkTriangle make_triangle(int a, int b, int c, const std::vector<Vector2d>& pts) {
  if (orientation(pts[a], pts[b], pts[c]) < 0.0) std::swap(b, c);
  const Vector2d& pa = pts[a];
  const Vector2d& pb = pts[b];
  const Vector2d& pc = pts[c];
  const double d = 2.0 * (pa.x() * (pb.y() - pc.y()) + pb.x() * (pc.y() - pa.y()) +
                          pc.x() * (pa.y() - pb.y()));
  Vector2d center = (pa + pb + pc) / 3.0;
  double r2 = std::numeric_limits<double>::infinity();
  if (std::abs(d) > 0.0) {
    const double a2 = pa.squaredNorm();
    const double b2 = pb.squaredNorm();
    const double c2 = pc.squaredNorm();
    center = Vector2d((a2 * (pb.y() - pc.y()) + b2 * (pc.y() - pa.y()) + c2 * (pa.y() - pb.y())) / d,
                      (a2 * (pc.x() - pb.x()) + b2 * (pa.x() - pc.x()) + c2 * (pb.x() - pa.x())) / d);
    r2 = (pa - center).squaredNorm();
  }
  return {{a, b, c}, center, r2, true};
}

}  // namespace

Triangulation triangulate(std::span<const Vector2d> points) {
  Triangulation out;
  std::vector<int> unique;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    const bool duplicate = std::any_of(unique.begin(), unique.end(), [&](int j) {
      return (points[static_cast<std::size_t>(j)] - points[static_cast<std::size_t>(i)]).squaredNorm() == 0.0;
    });
    if (!duplicate) unique.push_back(i);
  }
  if (unique.size() < 3) return out;

  // work in a frame centred on the data, super triangle appended at the end
  Vector2d lo = points[static_cast<std::size_t>(unique[0])];
  Vector2d hi = lo;
  for (int i : unique) {
    lo = lo.cwiseMin(points[static_cast<std::size_t>(i)]);
    hi = hi.cwiseMax(points[static_cast<std::size_t>(i)]);
  }
  const Vector2d mid = 0.5 * (lo + hi);
  const double span = std::max((hi - lo).maxCoeff(), 1e-6);
  const int n = static_cast<int>(points.size());
  std::vector<Vector2d> pts(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) pts[i] = points[i] - mid;
  pts.emplace_back(-40.0 * span, -30.0 * span);
  pts.emplace_back(40.0 * span, -30.0 * span);
  pts.emplace_back(0.0, 40.0 * span);

  std::vector<WorkTriangle> work{make_triangle(n, n + 1, n + 2, pts)};
  for (int p : unique) {
    const Vector2d& q = pts[static_cast<std::size_t>(p)];
    std::map<std::pair<int, int>, int> boundary;
    for (WorkTriangle& t : work) {
      if (!t.alive) continue;
      const double d2 = (q - t.center).squaredNorm();
      if (!(d2 < t.radius2 * (1.0 - 1e-12))) continue;
      t.alive = false;
      for (int k = 0; k < 3; ++k) {
        const int a = t.v[static_cast<std::size_t>(k)];
        const int b = t.v[static_cast<std::size_t>((k + 1) % 3)];
        ++boundary[{std::min(a, b), std::max(a, b)}];
      }
    }
    std::erase_if(work, [](const WorkTriangle& t) { return !t.alive; });
    for (const auto& [edge, count] : boundary) {
      if (count == 1) work.push_back(make_triangle(edge.first, edge.second, p, pts));
    }
  }

  std::map<std::pair<int, int>, int> edge_index;
  for (const WorkTriangle& t : work) {
    if (std::any_of(t.v.begin(), t.v.end(), [n](int v) { return v >= n; })) continue;
    if (orientation(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]]) <= 0.0) continue;
    const int tid = static_cast<int>(out.triangles.size());
    out.triangles.push_back(t.v);
    std::array<int, 3> opposite{};
    for (int k = 0; k < 3; ++k) {
      const int a = t.v[static_cast<std::size_t>((k + 1) % 3)];
      const int b = t.v[static_cast<std::size_t>((k + 2) % 3)];
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto [it, inserted] = edge_index.try_emplace(key, static_cast<int>(out.edges.size()));
      if (inserted) {
        out.edges.push_back({key.first, key.second, {tid, -1}});
      } else {
        out.edges[static_cast<std::size_t>(it->second)].triangles[1] = tid;
      }
      opposite[static_cast<std::size_t>(k)] = it->second;
    }
    out.triangle_edges.push_back(opposite);
  }
  if (!out.triangles.empty()) out.vertices = unique;
  return out;
}

int locate(const Triangulation& tri, std::span<const Vector2d> points, const Vector2d& p) {
  for (std::size_t t = 0; t < tri.triangles.size(); ++t) {
    const auto& v = tri.triangles[t];
    const Vector2d& a = points[static_cast<std::size_t>(v[0])];
    const Vector2d& b = points[static_cast<std::size_t>(v[1])];
    const Vector2d& c = points[static_cast<std::size_t>(v[2])];
    if (orientation(a, b, p) >= 0.0 && orientation(b, c, p) >= 0.0 && orientation(c, a, p) >= 0.0) {
      return static_cast<int>(t);
    }
  }
  return -1;
}

}  // namespace conetrack::planner
