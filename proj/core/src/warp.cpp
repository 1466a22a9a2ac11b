#include "xfg/warp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace xfg {

Affine2 Affine2::inverse() const {
  const double det = m[0] * m[4] - m[1] * m[3];
  if (std::abs(det) < 1e-300) throw Error("affine map is singular");
  Affine2 inv;
  inv.m[0] = m[4] / det;
  inv.m[1] = -m[1] / det;
  inv.m[3] = -m[3] / det;
  inv.m[4] = m[0] / det;
  inv.m[2] = -(inv.m[0] * m[2] + inv.m[1] * m[5]);
  inv.m[5] = -(inv.m[3] * m[2] + inv.m[4] * m[5]);
  return inv;
}

Affine2 Affine2::from_triangles(const std::array<Point2, 3>& s, const std::array<Point2, 3>& d) {
  // Solve [x y 1] * coeffs = target for the two output rows by Cramer's rule
  // on edge vectors relative to s0.
  const double ux = s[1].x - s[0].x, uy = s[1].y - s[0].y;
  const double vx = s[2].x - s[0].x, vy = s[2].y - s[0].y;
  const double det = ux * vy - uy * vx;
  if (std::abs(0.5 * det) < kDegenerateArea) throw Error("degenerate source triangle");
  Affine2 a;
  for (int row = 0; row < 2; ++row) {
    const double t0 = row == 0 ? d[0].x : d[0].y;
    const double du = (row == 0 ? d[1].x : d[1].y) - t0;
    const double dv = (row == 0 ? d[2].x : d[2].y) - t0;
    const double gx = (du * vy - dv * uy) / det;
    const double gy = (dv * ux - du * vx) / det;
    a.m[3 * row + 0] = gx;
    a.m[3 * row + 1] = gy;
    a.m[3 * row + 2] = t0 - gx * s[0].x - gy * s[0].y;
  }
  return a;
}

PiecewiseAffineMap fit_piecewise_affine(std::span<const Point2> src, std::span<const Point2> dst,
                                        const Triangulation& tri) {
  if (src.size() != dst.size()) throw Error("fit_piecewise_affine: point count mismatch");
  PiecewiseAffineMap map;
  map.triangulation = tri;
  map.forward.reserve(tri.size());
  map.inverse.reserve(tri.size());
  for (std::size_t t = 0; t < tri.size(); ++t) {
    const auto& idx = tri.triangles[t];
    for (int v : idx) {
      if (v < 0 || static_cast<std::size_t>(v) >= src.size())
        throw Error("fit_piecewise_affine: triangle index out of range");
    }
    const std::array<Point2, 3> s{src[idx[0]], src[idx[1]], src[idx[2]]};
    const std::array<Point2, 3> d{dst[idx[0]], dst[idx[1]], dst[idx[2]]};
    if (std::abs(0.5 * orient2d(s[0], s[1], s[2])) < kDegenerateArea)
      throw Error("fit_piecewise_affine: degenerate source triangle " + std::to_string(t));
    if (std::abs(0.5 * orient2d(d[0], d[1], d[2])) < kDegenerateArea)
      throw Error("fit_piecewise_affine: degenerate destination triangle " + std::to_string(t));
    map.forward.push_back(Affine2::from_triangles(s, d));
    map.inverse.push_back(Affine2::from_triangles(d, s));
  }
  return map;
}

PiecewiseAffineMap fit_piecewise_affine(const LandmarkSet& src, const StandardLayout& layout,
                                        const Triangulation& tri) {
  if (src.kind() != LandmarkKind::augmented89 || src.size() != layout.points.size())
    throw Error("fit_piecewise_affine: source must be an augmented 89-point set");
  return fit_piecewise_affine(std::span<const Point2>(src.points()),
                              std::span<const Point2>(layout.points), tri);
}

TriangleLookup::TriangleLookup(std::span<const Point2> pts, const Triangulation& tri, int width,
                               int height)
    : owner_(width, height, -1) {
  constexpr double eps = 1e-9;
  for (std::size_t t = 0; t < tri.size(); ++t) {
    const Point2 a = pts[tri.triangles[t][0]];
    const Point2 b = pts[tri.triangles[t][1]];
    const Point2 c = pts[tri.triangles[t][2]];
    const double area2 = orient2d(a, b, c);
    if (std::abs(area2) < 2 * kDegenerateArea) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - eps)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}) + eps)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - eps)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}) + eps)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (owner_(x, y) >= 0) continue;
        const Point2 p{double(x), double(y)};
        const double w0 = orient2d(b, c, p) / area2;
        const double w1 = orient2d(c, a, p) / area2;
        const double w2 = orient2d(a, b, p) / area2;
        if (w0 >= -eps && w1 >= -eps && w2 >= -eps) owner_(x, y) = static_cast<int>(t);
      }
    }
  }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (owner_(x, y) < 0)
        throw Error("triangulation does not cover pixel (" + std::to_string(x) + "," +
                    std::to_string(y) + ")");
}

double sample(const GrayImage& img, double x, double y, Interpolation mode) {
  const int w = img.width(), h = img.height();
  x = std::clamp(x, 0.0, double(w - 1));
  y = std::clamp(y, 0.0, double(h - 1));
  if (mode == Interpolation::nearest) {
    return img(static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)));
  }
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = img(x0, y0) + fx * (img(x1, y0) - img(x0, y0));
  const double bottom = img(x0, y1) + fx * (img(x1, y1) - img(x0, y1));
  const double v = top + fy * (bottom - top);
  // Keep the convex-combination bound exact under round-off.
  const double lo = std::min({img(x0, y0), img(x1, y0), img(x0, y1), img(x1, y1)});
  const double hi = std::max({img(x0, y0), img(x1, y0), img(x0, y1), img(x1, y1)});
  return std::clamp(v, lo, hi);
}

GrayImage warp_image(const GrayImage& img, const PiecewiseAffineMap& map, const TriangleLookup& lookup,
                     Interpolation mode) {
  if (img.empty()) throw Error("warp: empty image");
  GrayImage out(lookup.width(), lookup.height());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const Point2 s = map.inverse[lookup.owner(x, y)].apply({double(x), double(y)});
      out(x, y) = sample(img, s.x, s.y, mode);
    }
  }
  return out;
}

GrayImage warp_to_standard(const GrayImage& img, const LandmarkSet& src, const PiecewiseAffineMap& map,
                           const TriangleLookup& lookup, Interpolation mode) {
  if (img.width() != src.image_width() || img.height() != src.image_height())
    throw Error("warp_to_standard: image is " + std::to_string(img.width()) + "x" +
                std::to_string(img.height()) + " but landmarks are for " +
                std::to_string(src.image_width()) + "x" + std::to_string(src.image_height()));
  return warp_image(img, map, lookup, mode);
}

GrayImage warp_to_standard(const GrayImage& img, const LandmarkSet& src, const PiecewiseAffineMap& map,
                           const StandardLayout& layout, Interpolation mode) {
  const TriangleLookup lookup(layout.points, map.triangulation, layout.width, layout.height);
  return warp_to_standard(img, src, map, lookup, mode);
}

Triangulation layout_triangulation(const StandardLayout& layout) {
  layout.validate();
  return delaunay(layout.points);
}

}  // namespace xfg
