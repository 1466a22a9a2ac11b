#include "xfg/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace xfg {
namespace {

using Tri = std::array<int, 3>;

long double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const long double adx = a.x - d.x, ady = a.y - d.y;
  const long double bdx = b.x - d.x, bdy = b.y - d.y;
  const long double cdx = c.x - d.x, cdy = c.y - d.y;
  const long double ad = adx * adx + ady * ady;
  const long double bd = bdx * bdx + bdy * bdy;
  const long double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

// Magnitude bound of the incircle terms, for a relative tie tolerance.
long double incircle_scale(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  auto mag = [&](const Point2& p) {
    const long double dx = std::abs(p.x - d.x), dy = std::abs(p.y - d.y);
    return dx + dy;
  };
  const long double m = std::max({mag(a), mag(b), mag(c)});
  return m * m * m * m;
}

Tri canonical(Tri t) {
  const auto it = std::min_element(t.begin(), t.end());
  std::rotate(t.begin(), it, t.end());
  return t;
}

bool strictly_inside(const std::vector<Point2>& pts, const Tri& t, int d) {
  const long double det = incircle(pts[t[0]], pts[t[1]], pts[t[2]], pts[d]);
  return det > 1e-12L * incircle_scale(pts[t[0]], pts[t[1]], pts[t[2]], pts[d]);
}

// Lawson flips. The finite super triangle can leave illegal edges next to
// collinear runs of input points (the image border); flipping every edge
// whose opposite vertex lies strictly inside the neighbour's circumcircle
// restores the empty-circumcircle property. Edges are visited in sorted
// order, so the result is deterministic.
void legalize(const std::vector<Point2>& pts, std::vector<Tri>& tris) {
  auto ccw = [&](Tri t) {
    if (orient2d(pts[t[0]], pts[t[1]], pts[t[2]]) < 0) std::swap(t[1], t[2]);
    return canonical(t);
  };
  const std::size_t limit = 10 * tris.size() * tris.size() + 100;
  for (std::size_t flips = 0;; ++flips) {
    if (flips > limit) throw Error("delaunay: edge flipping did not converge");
    std::map<std::pair<int, int>, std::vector<std::size_t>> edges;
    for (std::size_t k = 0; k < tris.size(); ++k)
      for (int e = 0; e < 3; ++e) edges[std::minmax(tris[k][e], tris[k][(e + 1) % 3])].push_back(k);
    bool flipped = false;
    for (const auto& [edge, owners] : edges) {
      if (owners.size() != 2) continue;
      const Tri& t1 = tris[owners[0]];
      const Tri& t2 = tris[owners[1]];
      auto opposite = [&](const Tri& t) {
        for (int v : t)
          if (v != edge.first && v != edge.second) return v;
        return -1;
      };
      const int p = opposite(t1), q = opposite(t2);
      if (!strictly_inside(pts, t1, q)) continue;
      tris[owners[0]] = ccw({p, edge.first, q});
      tris[owners[1]] = ccw({p, q, edge.second});
      flipped = true;
      break;
    }
    if (!flipped) return;
  }
}

}  // namespace

double orient2d(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

Triangulation delaunay(std::span<const Point2> input) {
  const int n = static_cast<int>(input.size());
  if (n < 3) throw Error("delaunay: need at least 3 points");
  {
    std::set<std::pair<double, double>> seen;
    for (const auto& p : input) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error("delaunay: non-finite point");
      if (!seen.emplace(p.x, p.y).second) throw Error("delaunay: duplicate points");
    }
  }
  double minx = input[0].x, maxx = minx, miny = input[0].y, maxy = miny;
  for (const auto& p : input) {
    minx = std::min(minx, p.x), maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y), maxy = std::max(maxy, p.y);
  }
  const double extent = std::max(maxx - minx, maxy - miny);
  {
    bool collinear = true;
    for (int i = 2; i < n && collinear; ++i) {
      for (int j = 1; j < i && collinear; ++j) {
        if (std::abs(orient2d(input[0], input[j], input[i])) > 1e-12 * extent * extent)
          collinear = false;
      }
    }
    if (collinear) throw Error("delaunay: all points are collinear");
  }

  // Working point list: input followed by three far-away super vertices.
  std::vector<Point2> pts(input.begin(), input.end());
  const double cx = 0.5 * (minx + maxx), cy = 0.5 * (miny + maxy);
  const double far = 1e4 * extent;
  pts.push_back({cx - far, cy - far});
  pts.push_back({cx + far, cy - far});
  pts.push_back({cx, cy + far});

  auto ccw = [&](Tri t) {
    if (orient2d(pts[t[0]], pts[t[1]], pts[t[2]]) < 0) std::swap(t[1], t[2]);
    return t;
  };
  std::vector<Tri> tris{ccw({n, n + 1, n + 2})};

  for (int i = 0; i < n; ++i) {
    const Point2& p = pts[i];
    std::vector<Tri> keep;
    std::map<std::pair<int, int>, int> edge_count;
    std::vector<std::pair<int, int>> edge_order;
    keep.reserve(tris.size());
    for (const Tri& t : tris) {
      const long double det = incircle(pts[t[0]], pts[t[1]], pts[t[2]], p);
      // The tie tolerance only makes sense at the scale of the input; against
      // a super vertex the plain sign is reliable and a scaled tolerance
      // would swallow real decisions along collinear hull runs.
      const bool synthetic = t[0] >= n || t[1] >= n || t[2] >= n;
      const long double tol =
          synthetic ? 0.0L : 1e-12L * incircle_scale(pts[t[0]], pts[t[1]], pts[t[2]], p);
      if (det > tol) {
        for (int e = 0; e < 3; ++e) {
          const int a = t[e], b = t[(e + 1) % 3];
          const auto key = std::minmax(a, b);
          if (edge_count[key]++ == 0) edge_order.emplace_back(a, b);
        }
      } else {
        keep.push_back(t);
      }
    }
    if (edge_order.empty()) throw Error("delaunay: point lies outside the working triangulation");
    for (const auto& [a, b] : edge_order) {
      if (edge_count[std::minmax(a, b)] == 1) keep.push_back(ccw({a, b, i}));
    }
    tris = std::move(keep);
  }

  std::vector<Tri> real;
  for (const Tri& t : tris)
    if (t[0] < n && t[1] < n && t[2] < n) real.push_back(canonical(t));
  std::sort(real.begin(), real.end());
  legalize(pts, real);

  Triangulation out;
  for (const Tri& t : real) out.triangles.push_back(canonical(t));
  std::sort(out.triangles.begin(), out.triangles.end());
  return out;
}

}  // namespace xfg
