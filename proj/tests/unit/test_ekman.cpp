#include <algorithm>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "xfg/ekman.hpp"
#include "xfg/warp.hpp"

using namespace xfg;

namespace {

struct Fixture {
  StandardLayout layout = default_layout(128, 128);
  Triangulation tri = layout_triangulation(layout);
  AuRegionMap regions = AuRegionMap::defaults();
  ActionUnitTable table = ActionUnitTable::defaults();
};

// Independent rasterizer: sign tests against each edge, boundary inclusive
// (or exclusive when `strict`).
bool in_triangle(const std::vector<Point2>& p, const std::array<int, 3>& t, double x, double y, bool strict) {
  const Point2 q{x, y};
  double o[3];
  for (int e = 0; e < 3; ++e) {
    const Point2 a = p[t[e]], b = p[t[(e + 1) % 3]];
    o[e] = (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x);
  }
  if (strict) return (o[0] > 0 && o[1] > 0 && o[2] > 0) || (o[0] < 0 && o[1] < 0 && o[2] < 0);
  return (o[0] >= 0 && o[1] >= 0 && o[2] >= 0) || (o[0] <= 0 && o[1] <= 0 && o[2] <= 0);
}

BinaryMask reference_raster(const std::vector<Point2>& p, const std::vector<std::array<int, 3>>& tris, int w,
                            int h, bool strict = false) {
  BinaryMask m(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (const auto& t : tris)
        if (in_triangle(p, t, x, y, strict)) {
          m(x, y) = 1;
          break;
        }
  return m;
}

std::size_t count(const BinaryMask& m) { return std::count(m.pixels().begin(), m.pixels().end(), 1); }

bool subset(const BinaryMask& a, const BinaryMask& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.pixels()[i] && !b.pixels()[i]) return false;
  return true;
}

// Andrew's monotone chain, counter-clockwise in y-up terms.
std::vector<Point2> convex_hull(std::vector<Point2> p) {
  std::sort(p.begin(), p.end(), [](auto a, auto b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  auto cross = [](Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); };
  std::vector<Point2> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  return h;
}

bool in_hull(const std::vector<Point2>& hull, double x, double y) {
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2 a = hull[i], b = hull[(i + 1) % hull.size()];
    if ((b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x) < -1e-9) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("default tables") {
  const Fixture f;
  CHECK(f.table.aus.size() == 6);
  CHECK(f.table.aus.at(Expression::happiness) == std::vector<int>{6, 12});
  CHECK(f.table.aus.at(Expression::fear) == std::vector<int>{1, 2, 4, 5, 7, 20, 26});
  for (const auto& [expr, aus] : f.table.aus)
    for (int au : aus) CHECK(f.regions.regions.count(au) == 1);
  CHECK_NOTHROW(f.regions.validate(f.tri));
}

TEST_CASE("empty AU list gives an empty mask") {
  Fixture f;
  f.table.aus[Expression::disgust] = {};
  const EkmanMask m = build_mask(Expression::disgust, f.table, f.regions, f.layout, f.tri);
  CHECK(count(m.mask) == 0);
  CHECK(m.mask.width() == 128);
}

TEST_CASE("single landmark AU equals the rasterized one-ring") {
  const Fixture f;
  for (int l : {30, 33, 62, 39}) {
    CAPTURE(l);
    AuRegionMap map;
    map.regions[99] = {{l}, {}};
    std::vector<std::array<int, 3>> ring;
    for (const auto& t : f.tri.triangles)
      if (std::find(t.begin(), t.end(), l) != t.end()) ring.push_back(t);
    REQUIRE(!ring.empty());
    for (const auto& t : ring)
      for (int v : t) REQUIRE(v < kRawLandmarkCount);  // interior landmarks: no border triangles
    const std::vector<int> aus{99};
    const BinaryMask got = au_union_mask(aus, map, f.layout, f.tri);
    CHECK(got == reference_raster(f.layout.points, ring, 128, 128));
  }
}

TEST_CASE("explicit triangles are rasterized as given") {
  const Fixture f;
  AuRegionMap map;
  map.regions[50] = {{}, {f.tri.triangles[10], f.tri.triangles[20]}};
  CHECK_NOTHROW(map.validate(f.tri));
  const std::vector<int> aus{50};
  CHECK(au_union_mask(aus, map, f.layout, f.tri) ==
        reference_raster(f.layout.points, {f.tri.triangles[10], f.tri.triangles[20]}, 128, 128));

  map.regions[51] = {{}, {{0, 1, 2}}};
  if (std::find(f.tri.triangles.begin(), f.tri.triangles.end(), std::array<int, 3>{0, 1, 2}) ==
      f.tri.triangles.end())
    CHECK_THROWS_AS(map.validate(f.tri), Error);
  map.regions.erase(51);
  map.regions[52] = {{200}, {}};
  CHECK_THROWS_AS(map.validate(f.tri), Error);
}

TEST_CASE("happiness stays away from the top border") {
  const Fixture f;
  const EkmanMask happy = build_mask(Expression::happiness, f.table, f.regions, f.layout, f.tri);
  std::vector<std::array<int, 3>> border;
  for (const auto& t : f.tri.triangles)
    if (std::any_of(t.begin(), t.end(), [](int v) { return v >= lm::kTopBorderBegin && v < lm::kTopBorderEnd; }))
      border.push_back(t);
  REQUIRE(!border.empty());
  const BinaryMask top = reference_raster(f.layout.points, border, 128, 128, true);
  for (std::size_t i = 0; i < top.size(); ++i) CHECK_FALSE((top.pixels()[i] && happy.mask.pixels()[i]));
  // Confined below the brows.
  double brow_y = 0;
  for (int i = lm::kBrowBegin; i < lm::kBrowEnd; ++i) brow_y = std::max(brow_y, f.layout.points[i].y);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x)
      if (happy.mask(x, y)) CHECK(y > brow_y);
}

TEST_CASE("fear contains the AUs it shares with surprise") {
  const Fixture f;
  const EkmanMask fear = build_mask(Expression::fear, f.table, f.regions, f.layout, f.tri);
  const std::vector<int> common{1, 2, 5, 26};
  const BinaryMask sub = au_union_mask(common, f.regions, f.layout, f.tri);
  CHECK(count(sub) > 0);
  CHECK(subset(sub, fear.mask));
}

TEST_CASE("default masks: non-empty, binary, inside the face hull, deterministic") {
  const Fixture f;
  const auto masks = build_all_masks(f.table, f.regions, f.layout, f.tri);
  const auto again = build_all_masks(f.table, f.regions, f.layout, f.tri);
  const std::vector<Point2> hull =
      convex_hull({f.layout.points.begin(), f.layout.points.begin() + kRawLandmarkCount});
  for (int c = 0; c < kExpressionCount; ++c) {
    CHECK(masks[c].expression == expression_from_index(c));
    CHECK(count(masks[c].mask) > 0);
    CHECK(masks[c].mask == again[c].mask);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        const auto v = masks[c].mask(x, y);
        CHECK((v == 0 || v == 1));
        if (v) CHECK(in_hull(hull, x, y));
      }
  }
}

TEST_CASE("union identity and monotonicity") {
  const Fixture f;
  for (Expression e : kAllExpressions) {
    const EkmanMask m = build_mask(e, f.table, f.regions, f.layout, f.tri);
    BinaryMask u(128, 128, 0);
    for (int au : f.table.aus.at(e)) {
      const std::vector<int> one{au};
      const BinaryMask part = au_union_mask(one, f.regions, f.layout, f.tri);
      for (std::size_t i = 0; i < u.size(); ++i) u.pixels()[i] |= part.pixels()[i];
    }
    CHECK(m.mask == u);
  }
  std::mt19937_64 rng(3);
  std::vector<int> all;
  for (const auto& [au, r] : f.regions.regions) all.push_back(au);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(all.begin(), all.end(), rng);
    BinaryMask prev(128, 128, 0);
    for (std::size_t n = 1; n <= all.size(); ++n) {
      const std::vector<int> aus(all.begin(), all.begin() + n);
      const BinaryMask next = au_union_mask(aus, f.regions, f.layout, f.tri);
      CHECK(subset(prev, next));
      prev = next;
    }
  }
}

TEST_CASE("errors") {
  Fixture f;
  f.table.aus[Expression::anger].push_back(77);
  CHECK_THROWS_AS(build_mask(Expression::anger, f.table, f.regions, f.layout, f.tri), Error);
  f.table.aus.erase(Expression::sadness);
  CHECK_THROWS_AS(build_mask(Expression::sadness, f.table, f.regions, f.layout, f.tri), Error);
}

TEST_CASE("JSON round-trip") {
  const Fixture f;
  test::TempDir dir("ekman");
  write_au_table(dir / "t.json", f.table);
  write_au_regions(dir / "r.json", f.regions);
  CHECK(read_au_table(dir / "t.json").aus == f.table.aus);
  const AuRegionMap back = read_au_regions(dir / "r.json");
  REQUIRE(back.regions.size() == f.regions.regions.size());
  for (const auto& [au, r] : f.regions.regions) {
    CHECK(back.regions.at(au).landmarks == r.landmarks);
    CHECK(back.regions.at(au).triangles == r.triangles);
  }
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"contempt":[14]})";
  }
  CHECK_THROWS_AS(read_au_table(dir / "bad.json"), Error);
}

TEST_CASE("shipped AU files match the built-in tables") {
  CHECK(read_au_table(XFG_DATA_DIR "/au_table.json").aus == ActionUnitTable::defaults().aus);
  const AuRegionMap shipped = read_au_regions(XFG_DATA_DIR "/au_regions.json");
  const AuRegionMap built = AuRegionMap::defaults();
  REQUIRE(shipped.regions.size() == built.regions.size());
  for (const auto& [au, r] : built.regions) {
    REQUIRE(shipped.regions.count(au) == 1);
    CHECK(shipped.regions.at(au).landmarks == r.landmarks);
    CHECK(shipped.regions.at(au).triangles == r.triangles);
  }
}
