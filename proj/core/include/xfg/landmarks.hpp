#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "xfg/image.hpp"

namespace xfg {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

inline constexpr int kRawLandmarkCount = 68;
inline constexpr int kTopBorderCount = 17;
inline constexpr int kAugmentedLandmarkCount = 89;  // 68 + 17 top border + 4 corners

// Index ranges of the 68-point annotation scheme.
namespace lm {
inline constexpr int kJawBegin = 0, kJawEnd = 17;
inline constexpr int kBrowBegin = 17, kBrowEnd = 27;
inline constexpr int kNoseBegin = 27, kNoseEnd = 36;
inline constexpr int kEyeBegin = 36, kEyeEnd = 48;
inline constexpr int kMouthBegin = 48, kMouthEnd = 68;
inline constexpr int kTopBorderBegin = 68, kTopBorderEnd = 85;
inline constexpr int kCornerBegin = 85;  // (0,0), (W-1,0), (0,H-1), (W-1,H-1)
}  // namespace lm

enum class LandmarkKind { raw68, augmented89 };

/// Facial landmarks in image pixel coordinates (x right, y down).
class LandmarkSet {
 public:
  LandmarkSet(std::vector<Point2> points, LandmarkKind kind, int image_width, int image_height);

  const std::vector<Point2>& points() const { return points_; }
  LandmarkKind kind() const { return kind_; }
  int image_width() const { return width_; }
  int image_height() const { return height_; }
  std::size_t size() const { return points_.size(); }
  const Point2& operator[](std::size_t i) const { return points_[i]; }

 private:
  std::vector<Point2> points_;
  LandmarkKind kind_;
  int width_;
  int height_;
};

/// Appends 17 evenly spaced top-border points and the four image corners.
LandmarkSet augment_landmarks(const LandmarkSet& raw);

/// Canonical positions of the 89 augmented landmarks.
struct StandardLayout {
  std::vector<Point2> points;
  int width = 0;
  int height = 0;

  /// Throws unless the layout has 89 in-bounds points with corners on the frame corners.
  void validate() const;
  LandmarkSet as_landmarks() const;
};

/// Built-in 224x224 layout: the common 68-point 2D mean-face alignment
/// template placed in the frame, plus the 21 border points.
StandardLayout default_layout();
/// Same face geometry rescaled to a different canonical resolution.
StandardLayout default_layout(int width, int height);

/// "x,y" rows, no header. Expects exactly 68 rows.
LandmarkSet read_landmarks_csv(const std::filesystem::path& path, int image_width, int image_height);
void write_landmarks_csv(const std::filesystem::path& path, const std::vector<Point2>& points);

/// "width=<W>" / "height=<H>" header followed by 89 "x,y" rows.
StandardLayout read_layout(const std::filesystem::path& path);
void write_layout(const std::filesystem::path& path, const StandardLayout& layout);

}  // namespace xfg
