#pragma once

#include <array>
#include <span>
#include <vector>

#include "xfg/delaunay.hpp"
#include "xfg/image.hpp"
#include "xfg/landmarks.hpp"

namespace xfg {

/// x' = m[0] x + m[1] y + m[2];  y' = m[3] x + m[4] y + m[5]
struct Affine2 {
  std::array<double, 6> m{1, 0, 0, 0, 1, 0};

  Point2 apply(const Point2& p) const {
    return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]};
  }
  Affine2 inverse() const;

  /// Exact map of triangle (s0,s1,s2) onto (d0,d1,d2).
  static Affine2 from_triangles(const std::array<Point2, 3>& src, const std::array<Point2, 3>& dst);
};

/// Transformation T: one affine per triangle of a shared topology.
struct PiecewiseAffineMap {
  Triangulation triangulation;
  std::vector<Affine2> forward;  // source -> standard
  std::vector<Affine2> inverse;  // standard -> source
};

inline constexpr double kDegenerateArea = 1e-9;

PiecewiseAffineMap fit_piecewise_affine(const LandmarkSet& src, const StandardLayout& layout,
                                        const Triangulation& tri);
/// Point-list form used for both directions (face -> canonical, canonical -> face).
PiecewiseAffineMap fit_piecewise_affine(std::span<const Point2> src, std::span<const Point2> dst,
                                        const Triangulation& tri);

/// Which triangle owns each destination pixel center. Triangles are visited
/// in index order and a pixel keeps the first one that contains it (boundary
/// inclusive), so shared edges go to the lowest triangle index.
class TriangleLookup {
 public:
  TriangleLookup(std::span<const Point2> dst_points, const Triangulation& tri, int width, int height);

  int width() const { return owner_.width(); }
  int height() const { return owner_.height(); }
  int owner(int x, int y) const { return owner_(x, y); }
  const LabelImage& owners() const { return owner_; }

 private:
  LabelImage owner_;
};

enum class Interpolation { bilinear, nearest };

/// Bilinear (or nearest) sample with border clamp.
double sample(const GrayImage& img, double x, double y, Interpolation mode = Interpolation::bilinear);

/// Backward warp of `img` (in the source landmark frame) to the canonical frame.
GrayImage warp_to_standard(const GrayImage& img, const LandmarkSet& src, const PiecewiseAffineMap& map,
                           const StandardLayout& layout,
                           Interpolation mode = Interpolation::bilinear);
GrayImage warp_to_standard(const GrayImage& img, const LandmarkSet& src, const PiecewiseAffineMap& map,
                           const TriangleLookup& lookup,
                           Interpolation mode = Interpolation::bilinear);

/// Generic backward warp: for each destination pixel, map through
/// map.inverse[owner] and sample `img`. No frame check.
GrayImage warp_image(const GrayImage& img, const PiecewiseAffineMap& map, const TriangleLookup& lookup,
                     Interpolation mode = Interpolation::bilinear);

/// Standard-layout triangulation, computed once and shared by all faces.
Triangulation layout_triangulation(const StandardLayout& layout);

}  // namespace xfg
