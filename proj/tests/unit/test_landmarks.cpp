#include <cmath>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "xfg/landmarks.hpp"

using namespace xfg;

namespace {

std::vector<Point2> grid68(int w, int h) {
  std::vector<Point2> pts;
  for (int i = 0; i < kRawLandmarkCount; ++i)
    pts.push_back({1.0 + (i % 10) * (w - 3) / 9.0, 1.0 + (i / 10) * (h - 3) / 6.0});
  return pts;
}

}  // namespace

TEST_CASE("augment appends corners last") {
  const LandmarkSet raw(grid68(100, 100), LandmarkKind::raw68, 100, 100);
  const LandmarkSet aug = augment_landmarks(raw);
  REQUIRE(aug.size() == 89);
  CHECK(aug.kind() == LandmarkKind::augmented89);
  CHECK(aug[85] == Point2{0, 0});
  CHECK(aug[86] == Point2{99, 0});
  CHECK(aug[87] == Point2{0, 99});
  CHECK(aug[88] == Point2{99, 99});
  for (int i = 0; i < kRawLandmarkCount; ++i) CHECK(aug[i] == raw[i]);
}

TEST_CASE("top border spacing for a 190 px wide frame") {
  const LandmarkSet aug = augment_landmarks(LandmarkSet(grid68(190, 120), LandmarkKind::raw68, 190, 120));
  CHECK(aug[lm::kTopBorderBegin].x == 11.0);
  CHECK(aug[lm::kTopBorderEnd - 1].x == 179.0);
  for (int i = 1; i <= kTopBorderCount; ++i) {
    const Point2 p = aug[lm::kTopBorderBegin + i - 1];
    CHECK(p.y == 0.0);
    CHECK(p.x == std::round(i * 189.0 / 18.0));
  }
}

TEST_CASE("landmark validation") {
  auto pts = grid68(100, 100);
  pts[10].x = 100;  // x == W is outside [0, W-1]
  CHECK_THROWS_AS(LandmarkSet(pts, LandmarkKind::raw68, 100, 100), Error);
  pts.pop_back();
  CHECK_THROWS_AS(LandmarkSet(pts, LandmarkKind::raw68, 100, 100), Error);
  auto ok = grid68(100, 100);
  ok[0] = {99, 99};
  CHECK_NOTHROW(LandmarkSet(ok, LandmarkKind::raw68, 100, 100));
}

TEST_CASE("default layout is valid at several resolutions") {
  for (auto [w, h] : {std::pair{224, 224}, {128, 128}, {96, 160}}) {
    const StandardLayout layout = default_layout(w, h);
    CHECK_NOTHROW(layout.validate());
    CHECK(layout.width == w);
    CHECK(layout.height == h);
    CHECK(layout.points[lm::kCornerBegin + 3] == Point2{double(w - 1), double(h - 1)});
  }
  CHECK(default_layout().width == 224);
}

TEST_CASE("shipped layout file matches the built-in layout") {
  const StandardLayout shipped = read_layout(XFG_DATA_DIR "/standard_layout.csv");
  const StandardLayout built = default_layout();
  REQUIRE(shipped.points.size() == built.points.size());
  CHECK(shipped.width == built.width);
  CHECK(shipped.height == built.height);
  for (std::size_t i = 0; i < built.points.size(); ++i) {
    CHECK(shipped.points[i].x == doctest::Approx(built.points[i].x).epsilon(1e-12));
    CHECK(shipped.points[i].y == doctest::Approx(built.points[i].y).epsilon(1e-12));
  }
}

TEST_CASE("landmark and layout files round-trip") {
  test::TempDir dir("landmarks");
  const auto pts = grid68(64, 48);
  write_landmarks_csv(dir / "a.csv", pts);
  const LandmarkSet back = read_landmarks_csv(dir / "a.csv", 64, 48);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(back[i] == pts[i]);

  const StandardLayout layout = default_layout(128, 96);
  write_layout(dir / "layout.csv", layout);
  const StandardLayout read = read_layout(dir / "layout.csv");
  CHECK(read.width == 128);
  CHECK(read.height == 96);
  CHECK(read.points == layout.points);
}

TEST_CASE("landmark CSV errors") {
  test::TempDir dir("landmarks-bad");
  {
    std::ofstream out(dir / "short.csv");
    out << "1,2\n3,4\n";
  }
  CHECK_THROWS_AS(read_landmarks_csv(dir / "short.csv", 10, 10), Error);
  {
    std::ofstream out(dir / "junk.csv");
    for (int i = 0; i < 68; ++i) out << (i == 5 ? "x;y" : "1,1") << "\n";
  }
  CHECK_THROWS_AS(read_landmarks_csv(dir / "junk.csv", 10, 10), Error);
  CHECK_THROWS_AS(read_landmarks_csv(dir / "missing.csv", 10, 10), Error);
}
