#include "xfg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "xfg/oracle.hpp"
#include "xfg/parallel.hpp"
#include "xfg/warp.hpp"

namespace xfg {
namespace {

constexpr double kBackground = 0.10;
constexpr double kSkin = 0.50;
constexpr double kFeature = 0.28;
constexpr double kLips = 0.35;
constexpr double kMarker = 0.95;

bool inside_polygon(const std::vector<Point2>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point2 a = poly[i], b = poly[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

double segment_distance(Point2 p, Point2 a, Point2 b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

std::vector<Point2> slice(const std::vector<Point2>& pts, int begin, int end) {
  return {pts.begin() + begin, pts.begin() + end};
}

void fill_polygon(GrayImage& img, const std::vector<Point2>& poly, double value) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (inside_polygon(poly, x, y)) img(x, y) = value;
}

void draw_polyline(GrayImage& img, const std::vector<Point2>& line, double half_width, double value) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        if (segment_distance({double(x), double(y)}, line[i], line[i + 1]) <= half_width) {
          img(x, y) = value;
          break;
        }
      }
    }
  }
}

void fill_rect(GrayImage& img, const NormRect& r, double value) {
  const int x0 = static_cast<int>(std::ceil(r.x0 * img.width())), x1 = static_cast<int>(std::floor(r.x1 * img.width()));
  const int y0 = static_cast<int>(std::ceil(r.y0 * img.height())),
            y1 = static_cast<int>(std::floor(r.y1 * img.height()));
  for (int y = std::max(0, y0); y < std::min(img.height(), y1); ++y)
    for (int x = std::max(0, x0); x < std::min(img.width(), x1); ++x) img(x, y) = value;
}

bool same_orientation(const std::vector<Point2>& a, const std::vector<Point2>& b, const Triangulation& tri) {
  for (const auto& t : tri.triangles) {
    const double oa = orient2d(a[t[0]], a[t[1]], a[t[2]]);
    const double ob = orient2d(b[t[0]], b[t[1]], b[t[2]]);
    if (oa * ob <= 0 || std::abs(ob) < 1e-3) return false;
  }
  return true;
}

}  // namespace

GrayImage render_face_sketch(const StandardLayout& layout) {
  layout.validate();
  const auto& p = layout.points;
  GrayImage img(layout.width, layout.height, kBackground);

  const double cx = 0.5 * (p[0].x + p[16].x);
  const double cy = p[29].y;
  const double rx = 0.55 * (p[16].x - p[0].x);
  const double ry = 1.05 * (p[8].y - cy);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double u = (x - cx) / rx, v = (y - cy) / ry;
      if (u * u + v * v <= 1.0) img(x, y) = kSkin;
    }
  }
  draw_polyline(img, slice(p, lm::kBrowBegin, 22), 1.2, kFeature);
  draw_polyline(img, slice(p, 22, lm::kBrowEnd), 1.2, kFeature);
  draw_polyline(img, slice(p, lm::kNoseBegin, 31), 1.0, kFeature);
  draw_polyline(img, slice(p, 31, lm::kNoseEnd), 1.0, kFeature);
  fill_polygon(img, slice(p, 36, 42), kFeature);
  fill_polygon(img, slice(p, 42, lm::kEyeEnd), kFeature);
  fill_polygon(img, slice(p, lm::kMouthBegin, 60), kLips);
  return img;
}

GrayImage render_canonical_face(const StandardLayout& layout, Expression cls, std::uint64_t seed) {
  GrayImage img = render_face_sketch(layout);
  fill_rect(img, family_rects(OracleFamily::mouth)[index_of(cls)], kMarker);
  fill_rect(img, family_rects(OracleFamily::eyes)[index_of(cls)], kMarker);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-0.02, 0.02);
  for (double& v : img.pixels()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  return img;
}

SyntheticFace make_synthetic_face(const StandardLayout& layout, Expression cls, std::uint64_t seed,
                                  const SynthGeometry& geometry) {
  const GrayImage canonical = render_canonical_face(layout, cls, seed);
  const Triangulation tri = layout_triangulation(layout);
  const double cx = 0.5 * (layout.width - 1), cy = 0.5 * (layout.height - 1);

  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double angle = unit(rng) * geometry.max_rotation_deg * std::numbers::pi / 180.0;
    const double scale = 1.0 + unit(rng) * geometry.max_scale;
    const double tx = unit(rng) * geometry.max_shift, ty = unit(rng) * geometry.max_shift;
    const double c = std::cos(angle) * scale, s = std::sin(angle) * scale;

    std::vector<Point2> raw(kRawLandmarkCount);
    bool in_frame = true;
    for (int i = 0; i < kRawLandmarkCount; ++i) {
      const double dx = layout.points[i].x - cx, dy = layout.points[i].y - cy;
      raw[i] = {cx + c * dx - s * dy + tx + unit(rng) * geometry.jitter,
                cy + s * dx + c * dy + ty + unit(rng) * geometry.jitter};
      in_frame = in_frame && raw[i].x >= 0 && raw[i].y >= 0 && raw[i].x <= layout.width - 1 &&
                 raw[i].y <= layout.height - 1;
    }
    if (!in_frame) continue;
    const LandmarkSet source =
        augment_landmarks(LandmarkSet(raw, LandmarkKind::raw68, layout.width, layout.height));
    if (!same_orientation(layout.points, source.points(), tri)) continue;

    const PiecewiseAffineMap to_source = fit_piecewise_affine(layout.points, source.points(), tri);
    const TriangleLookup lookup(source.points(), tri, layout.width, layout.height);
    return {warp_image(canonical, to_source, lookup), std::move(raw), cls};
  }
  throw Error("make_synthetic_face: could not draw a valid pose");
}

std::vector<std::string> write_synthetic_set(const std::filesystem::path& dir, const StandardLayout& layout,
                                             int per_class, std::uint64_t seed,
                                             const SynthGeometry& geometry) {
  if (per_class < 1) throw Error("write_synthetic_set: per_class must be positive");
  std::filesystem::create_directories(dir);
  std::vector<std::string> ids;
  for (Expression e : kAllExpressions) {
    for (int n = 0; n < per_class; ++n) {
      char stem[64];
      std::snprintf(stem, sizeof stem, "%s_%02d", std::string(to_string(e)).c_str(), n);
      const SyntheticFace face = make_synthetic_face(layout, e, derive_seed(seed, stem), geometry);
      write_pgm8(dir / (std::string(stem) + ".pgm"), face.image);
      write_landmarks_csv(dir / (std::string(stem) + ".csv"), face.landmarks);
      ids.emplace_back(stem);
    }
  }
  return ids;
}

}  // namespace xfg
