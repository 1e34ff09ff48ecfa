#pragma once

#include "conetrack/core/geometry.hpp"

#include <array>
#include <span>
#include <vector>

namespace conetrack::planner {

/// Delaunay triangulation over a point set. Vertex indices refer to the input
/// span; exact duplicates of an earlier point are left out.
struct Triangulation {
  struct Edge {
    int a;
    int b;  // a < b
    std::array<int, 2> triangles{-1, -1};  // adjacent triangles, -1 on the hull

    bool interior() const { return triangles[1] >= 0; }
  };

  std::vector<int> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<Edge> edges;
  std::vector<std::array<int, 3>> triangle_edges;  // edge index opposite each corner

  bool empty() const { return triangles.empty(); }
  /// Triangle on the other side of the given edge, or -1.
  int neighbor(int triangle, int edge) const;
};

/// Bowyer-Watson insertion. Fewer than three distinct or all collinear points
/// give an empty triangulation.
Triangulation triangulate(std::span<const Vector2d> points);

/// > 0 when d lies strictly inside the circumcircle of the counter-clockwise
/// triangle (a, b, c).
double incircle(const Vector2d& a, const Vector2d& b, const Vector2d& c, const Vector2d& d);
double orientation(const Vector2d& a, const Vector2d& b, const Vector2d& c);

int locate(const Triangulation& tri, std::span<const Vector2d> points, const Vector2d& p);

}  // namespace conetrack::planner
