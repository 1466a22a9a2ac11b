#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xfg/expression.hpp"
#include "xfg/image.hpp"
#include "xfg/landmarks.hpp"

namespace xfg {

/// Cartoon face (skin, brows, eyes, nose, lips) on the layout, no class marker.
GrayImage render_face_sketch(const StandardLayout& layout);

/// Cartoon face in the layout's canonical frame. The class is encoded by a
/// bright patch in sub-box `cls` of both the mouth and the eye family
/// regions, so every family oracle reads the same label.
GrayImage render_canonical_face(const StandardLayout& layout, Expression cls, std::uint64_t seed);

/// Per-face pose change applied after rendering.
struct SynthGeometry {
  double max_rotation_deg = 3.0;
  double max_scale = 0.03;    // scale drawn from [1 - s, 1 + s]
  double max_shift = 2.0;     // pixels
  double jitter = 0.4;        // per-landmark uniform noise, pixels
};

struct SyntheticFace {
  GrayImage image;              // same size as the layout
  std::vector<Point2> landmarks;  // 68 points in image coordinates
  Expression cls = Expression::anger;
};

/// Renders in canonical space, then warps to a randomly posed landmark set.
SyntheticFace make_synthetic_face(const StandardLayout& layout, Expression cls, std::uint64_t seed,
                                  const SynthGeometry& geometry = {});

/// Writes `<class>_<nn>.pgm` + `<class>_<nn>.csv` pairs, `per_class` per class.
/// Returns the image ids in write order.
std::vector<std::string> write_synthetic_set(const std::filesystem::path& dir, const StandardLayout& layout,
                                             int per_class, std::uint64_t seed,
                                             const SynthGeometry& geometry = {});

}  // namespace xfg
