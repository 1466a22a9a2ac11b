#include <queue>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "xfg/slic.hpp"
#include "xfg/synth.hpp"

using namespace xfg;

namespace {

// Every label is one 4-connected component and ids are 0..R-1.
void check_labels(const SuperpixelLabels& sp) {
  const LabelImage& l = sp.labels;
  REQUIRE(sp.region_count >= 1);
  std::set<int> seen;
  for (int v : l.pixels()) {
    REQUIRE(v >= 0);
    REQUIRE(v < sp.region_count);
    seen.insert(v);
  }
  CHECK(static_cast<int>(seen.size()) == sp.region_count);

  Image<std::uint8_t> visited(l.width(), l.height(), 0);
  std::set<int> started;
  for (int y = 0; y < l.height(); ++y) {
    for (int x = 0; x < l.width(); ++x) {
      if (visited(x, y)) continue;
      const int label = l(x, y);
      CHECK_MESSAGE(started.insert(label).second, "label " << label << " is split");
      std::queue<std::pair<int, int>> q;
      q.push({x, y});
      visited(x, y) = 1;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k], ny = cy + dy[k];
          if (nx < 0 || ny < 0 || nx >= l.width() || ny >= l.height()) continue;
          if (visited(nx, ny) || l(nx, ny) != label) continue;
          visited(nx, ny) = 1;
          q.push({nx, ny});
        }
      }
    }
  }
}

}  // namespace

TEST_CASE("k = 1 gives one region") {
  const SuperpixelLabels sp = slic(test::random_image(40, 30, 1), {.k_target = 1});
  CHECK(sp.region_count == 1);
  for (int v : sp.labels.pixels()) CHECK(v == 0);
}

TEST_CASE("constant image splits into quadrants") {
  const SuperpixelLabels sp = slic(GrayImage(64, 64, 0.5), {.k_target = 4});
  REQUIRE(sp.region_count == 4);
  check_labels(sp);
  for (int size : region_sizes(sp)) {
    CHECK(size >= 0.9 * 1024);
    CHECK(size <= 1.1 * 1024);
  }
  CHECK(sp.labels(5, 5) != sp.labels(58, 5));
  CHECK(sp.labels(5, 5) != sp.labels(5, 58));
  CHECK(sp.labels(58, 58) != sp.labels(58, 5));
}

TEST_CASE("two-tone image splits at the edge") {
  GrayImage img(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) img(x, y) = x < 32 ? 0.1 : 0.9;
  const SuperpixelLabels sp = slic(img, {.k_target = 2});
  REQUIRE(sp.region_count == 2);
  check_labels(sp);
  for (int y = 0; y < 64; ++y) {
    int boundary = -1;
    for (int x = 1; x < 64; ++x)
      if (sp.labels(x, y) != sp.labels(x - 1, y)) boundary = x;
    CHECK(std::abs(boundary - 32) <= 2);
  }
}

TEST_CASE("labels are complete and connected on noise and faces") {
  check_labels(slic(test::random_image(50, 70, 3)));
  const StandardLayout layout = default_layout(128, 128);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto face = make_synthetic_face(layout, expression_from_index(int(seed)), seed);
    const SuperpixelLabels sp = slic(face.image);
    check_labels(sp);
    CHECK(sp.region_count >= 15);
    CHECK(sp.region_count <= 60);
  }
}

TEST_CASE("region count stays within [k/2, 2k] across k") {
  const auto face = make_synthetic_face(default_layout(160, 160), Expression::fear, 9);
  for (int k : {10, 20, 30, 50, 80}) {
    const SuperpixelLabels sp = slic(face.image, {.k_target = k});
    CHECK(sp.region_count >= k / 2);
    CHECK(sp.region_count <= 2 * k);
  }
}

TEST_CASE("deterministic") {
  const GrayImage img = test::random_image(64, 64, 77);
  const SuperpixelLabels a = slic(img), b = slic(img);
  CHECK(a.region_count == b.region_count);
  CHECK(a.labels == b.labels);
}

TEST_CASE("argument errors") {
  CHECK_THROWS_AS(slic(GrayImage(0, 0)), Error);
  CHECK_THROWS_AS(slic(GrayImage(4, 4), {.k_target = 17}), Error);
  CHECK_THROWS_AS(slic(GrayImage(4, 4), {.k_target = 0}), Error);
  CHECK_NOTHROW(slic(GrayImage(4, 4), {.k_target = 16}));
}
