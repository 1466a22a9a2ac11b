#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "xfg/delaunay.hpp"
#include "xfg/expression.hpp"
#include "xfg/image.hpp"
#include "xfg/landmarks.hpp"

namespace xfg {

/// Expression -> Action Unit ids.
struct ActionUnitTable {
  std::map<Expression, std::vector<int>> aus;

  /// Anger{4,5,7,23} Disgust{9,15} Fear{1,2,4,5,7,20,26} Happiness{6,12}
  /// Sadness{1,4,15} Surprise{1,2,5,26}
  static ActionUnitTable defaults();
};

/// Where an AU acts: landmarks (their one-ring of facial triangles is
/// marked) and/or explicit triangles given as landmark triples.
struct AuRegion {
  std::vector<int> landmarks;
  std::vector<std::array<int, 3>> triangles;
};

struct AuRegionMap {
  std::map<int, AuRegion> regions;

  /// FACS-anatomy default over the 68-point scheme (brows, eyes, nose, mouth, chin).
  static AuRegionMap defaults();
  void validate(const Triangulation& tri) const;
};

ActionUnitTable read_au_table(const std::filesystem::path& path);
void write_au_table(const std::filesystem::path& path, const ActionUnitTable& table);
AuRegionMap read_au_regions(const std::filesystem::path& path);
void write_au_regions(const std::filesystem::path& path, const AuRegionMap& map);

/// Rasterize the union of triangles: pixel centers inside or on an edge.
BinaryMask rasterize_triangles(std::span<const Point2> points, std::span<const std::array<int, 3>> triangles,
                               int width, int height);

/// Triangle indices marked by one AU. A landmark's vicinity is its incident
/// triangles whose vertices are all facial landmarks (indices < 68), so the
/// synthetic border points never pull in background.
std::vector<int> au_triangles(int au, const AuRegionMap& map, const Triangulation& tri);

/// Pixel union over the AUs' triangles.
BinaryMask au_union_mask(std::span<const int> aus, const AuRegionMap& map, const StandardLayout& layout,
                         const Triangulation& tri);

struct EkmanMask {
  BinaryMask mask;
  Expression expression = Expression::anger;
};

EkmanMask build_mask(Expression expr, const ActionUnitTable& table, const AuRegionMap& map,
                     const StandardLayout& layout, const Triangulation& tri);
std::array<EkmanMask, kExpressionCount> build_all_masks(const ActionUnitTable& table, const AuRegionMap& map,
                                                        const StandardLayout& layout,
                                                        const Triangulation& tri);

}  // namespace xfg
