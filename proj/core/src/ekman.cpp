#include "xfg/ekman.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

namespace xfg {
namespace {

using nlohmann::json;

std::vector<int> range(int begin, int end) {
  std::vector<int> v;
  for (int i = begin; i < end; ++i) v.push_back(i);
  return v;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

ActionUnitTable ActionUnitTable::defaults() {
  ActionUnitTable t;
  t.aus[Expression::anger] = {4, 5, 7, 23};
  t.aus[Expression::disgust] = {9, 15};
  t.aus[Expression::fear] = {1, 2, 4, 5, 7, 20, 26};
  t.aus[Expression::happiness] = {6, 12};
  t.aus[Expression::sadness] = {1, 4, 15};
  t.aus[Expression::surprise] = {1, 2, 5, 26};
  return t;
}

AuRegionMap AuRegionMap::defaults() {
  AuRegionMap m;
  m.regions[1] = {{20, 21, 22, 23}, {}};              // inner brow raiser
  m.regions[2] = {{17, 18, 19, 24, 25, 26}, {}};      // outer brow raiser
  m.regions[4] = {{20, 21, 22, 23, 27}, {}};          // brow lowerer + glabella
  m.regions[5] = {{37, 38, 43, 44}, {}};              // upper lid raiser
  m.regions[6] = {{40, 41, 46, 47}, {}};              // cheek raiser, lower lids
  m.regions[7] = {range(36, 48), {}};                 // lid tightener
  m.regions[9] = {range(27, 36), {}};                 // nose wrinkler
  m.regions[12] = {{48, 54}, {}};                     // lip corner puller
  m.regions[15] = {{48, 54, 55, 59}, {}};             // lip corner depressor
  m.regions[20] = {{48, 54, 60, 64}, {}};             // lip stretcher
  m.regions[23] = {range(48, 68), {}};                // lip tightener
  m.regions[26] = {{8, 57, 66}, {}};                  // jaw drop
  return m;
}

void AuRegionMap::validate(const Triangulation& tri) const {
  for (const auto& [au, region] : regions) {
    for (int l : region.landmarks)
      if (l < 0 || l >= kAugmentedLandmarkCount)
        throw Error("AU " + std::to_string(au) + ": landmark index " + std::to_string(l) + " out of range");
    for (const auto& t : region.triangles) {
      std::array<int, 3> sorted = t;
      std::sort(sorted.begin(), sorted.end());
      const bool found = std::any_of(tri.triangles.begin(), tri.triangles.end(), [&](const auto& u) {
        std::array<int, 3> s = u;
        std::sort(s.begin(), s.end());
        return s == sorted;
      });
      if (!found)
        throw Error("AU " + std::to_string(au) + ": triangle (" + std::to_string(t[0]) + "," +
                    std::to_string(t[1]) + "," + std::to_string(t[2]) + ") is not in the triangulation");
    }
  }
}

ActionUnitTable read_au_table(const std::filesystem::path& path) {
  const json j = read_json(path);
  if (!j.is_object()) throw Error(path.string() + ": AU table must be a JSON object");
  ActionUnitTable t;
  for (const auto& [name, list] : j.items()) {
    const auto expr = parse_expression(name);
    if (!expr) throw Error(path.string() + ": unknown expression \"" + name + "\"");
    t.aus[*expr] = list.get<std::vector<int>>();
  }
  return t;
}

void write_au_table(const std::filesystem::path& path, const ActionUnitTable& table) {
  json j = json::object();
  for (const auto& [expr, aus] : table.aus) j[std::string(to_string(expr))] = aus;
  write_json(path, j);
}

AuRegionMap read_au_regions(const std::filesystem::path& path) {
  const json j = read_json(path);
  if (!j.is_object()) throw Error(path.string() + ": AU region map must be a JSON object");
  AuRegionMap m;
  try {
    for (const auto& [key, value] : j.items()) {
      AuRegion r;
      if (value.contains("landmarks")) r.landmarks = value["landmarks"].get<std::vector<int>>();
      if (value.contains("triangles")) r.triangles = value["triangles"].get<std::vector<std::array<int, 3>>>();
      m.regions[std::stoi(key)] = std::move(r);
    }
  } catch (const std::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return m;
}

void write_au_regions(const std::filesystem::path& path, const AuRegionMap& map) {
  json j = json::object();
  for (const auto& [au, r] : map.regions) {
    j[std::to_string(au)] = {{"landmarks", r.landmarks}, {"triangles", r.triangles}};
  }
  write_json(path, j);
}

BinaryMask rasterize_triangles(std::span<const Point2> pts, std::span<const std::array<int, 3>> triangles,
                               int width, int height) {
  BinaryMask mask(width, height, 0);
  constexpr double eps = 1e-9;
  for (const auto& t : triangles) {
    const Point2 a = pts[t[0]], b = pts[t[1]], c = pts[t[2]];
    const double area2 = orient2d(a, b, c);
    if (area2 == 0.0) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}))));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}))));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Point2 p{double(x), double(y)};
        if (orient2d(b, c, p) / area2 >= -eps && orient2d(c, a, p) / area2 >= -eps &&
            orient2d(a, b, p) / area2 >= -eps)
          mask(x, y) = 1;
      }
    }
  }
  return mask;
}

std::vector<int> au_triangles(int au, const AuRegionMap& map, const Triangulation& tri) {
  const auto it = map.regions.find(au);
  if (it == map.regions.end()) throw Error("AU " + std::to_string(au) + " has no region mapping");
  const AuRegion& region = it->second;
  std::set<int> marked;
  const std::set<int> centers(region.landmarks.begin(), region.landmarks.end());
  for (std::size_t t = 0; t < tri.size(); ++t) {
    const auto& v = tri.triangles[t];
    const bool facial = v[0] < kRawLandmarkCount && v[1] < kRawLandmarkCount && v[2] < kRawLandmarkCount;
    if (facial && (centers.count(v[0]) || centers.count(v[1]) || centers.count(v[2])))
      marked.insert(static_cast<int>(t));
  }
  for (const auto& want : region.triangles) {
    std::array<int, 3> w = want;
    std::sort(w.begin(), w.end());
    for (std::size_t t = 0; t < tri.size(); ++t) {
      std::array<int, 3> s = tri.triangles[t];
      std::sort(s.begin(), s.end());
      if (s == w) marked.insert(static_cast<int>(t));
    }
  }
  return {marked.begin(), marked.end()};
}

BinaryMask au_union_mask(std::span<const int> aus, const AuRegionMap& map, const StandardLayout& layout,
                         const Triangulation& tri) {
  std::set<int> all;
  for (int au : aus) {
    const auto t = au_triangles(au, map, tri);
    all.insert(t.begin(), t.end());
  }
  std::vector<std::array<int, 3>> selected;
  for (int t : all) selected.push_back(tri.triangles[t]);
  return rasterize_triangles(layout.points, selected, layout.width, layout.height);
}

EkmanMask build_mask(Expression expr, const ActionUnitTable& table, const AuRegionMap& map,
                     const StandardLayout& layout, const Triangulation& tri) {
  const auto it = table.aus.find(expr);
  if (it == table.aus.end())
    throw Error("AU table has no entry for " + std::string(to_string(expr)));
  return {au_union_mask(it->second, map, layout, tri), expr};
}

std::array<EkmanMask, kExpressionCount> build_all_masks(const ActionUnitTable& table, const AuRegionMap& map,
                                                        const StandardLayout& layout,
                                                        const Triangulation& tri) {
  std::array<EkmanMask, kExpressionCount> out;
  for (Expression e : kAllExpressions) out[index_of(e)] = build_mask(e, table, map, layout, tri);
  return out;
}

}  // namespace xfg
