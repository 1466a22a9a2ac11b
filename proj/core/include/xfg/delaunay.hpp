#pragma once

#include <array>
#include <span>
#include <vector>

#include "xfg/landmarks.hpp"

namespace xfg {

/// Index triples into a point set. Every triangle is stored counter-clockwise
/// in a y-up sense (positive orient2d), rotated so its smallest index comes
/// first; the list is sorted.
struct Triangulation {
  std::vector<std::array<int, 3>> triangles;
  std::size_t size() const { return triangles.size(); }
  bool operator==(const Triangulation&) const = default;
};

/// Twice the signed area of (a, b, c).
double orient2d(const Point2& a, const Point2& b, const Point2& c);

/// Bowyer-Watson Delaunay triangulation with points inserted in index order.
/// Points on (or numerically on) an existing circumcircle do not invalidate
/// the triangle, so cocircular ties resolve in favour of earlier indices.
/// A final pass of Lawson flips repairs edges the finite super triangle
/// gets wrong next to collinear runs.
/// Throws on fewer than 3 points, duplicate points, or all-collinear input.
Triangulation delaunay(std::span<const Point2> points);

}  // namespace xfg
