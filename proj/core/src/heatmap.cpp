#include "xfg/heatmap.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "xfg/parallel.hpp"

namespace xfg {
namespace {

void check_range(const GrayImage& img) {
  for (double v : img.pixels())
    if (!(v >= 0.0 && v <= 1.0)) throw Error("aggregate: pixel value outside [0,1]");
}

using nlohmann::json;

std::string id_string(const json& v, const char* field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(std::string("manifest: \"") + field + "\" must be a string or integer");
}

std::string safe_component(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return out;
}

}  // namespace

void ExplanationManifest::validate() const {
  std::set<std::tuple<std::string, int, Expression, std::string>> seen;
  for (const auto& e : entries) {
    if (!seen.emplace(e.model, e.fold, e.cls, e.image_id).second)
      throw Error("manifest: duplicate entry for model " + e.model + ", fold " + std::to_string(e.fold) +
                  ", class " + std::string(to_string(e.cls)) + ", image " + e.image_id);
  }
}

std::filesystem::path ExplanationManifest::resolve(const ManifestEntry& e) const {
  std::filesystem::path p(e.path);
  return p.is_absolute() ? p : base_dir / p;
}

ExplanationManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("manifest " + path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw Error("manifest must be a JSON array");
  ExplanationManifest m;
  m.base_dir = path.parent_path();
  for (const auto& item : j) {
    ManifestEntry e;
    try {
      e.path = item.at("path").get<std::string>();
      e.model = id_string(item.at("model"), "model");
      e.fold = item.at("fold").get<int>();
      const auto& cls = item.at("class");
      std::optional<Expression> parsed =
          cls.is_number_integer() ? std::optional(expression_from_index(cls.get<int>()))
                                  : parse_expression(cls.get<std::string>());
      if (!parsed) throw Error("manifest: unknown class " + cls.dump());
      e.cls = *parsed;
      e.image_id = id_string(item.at("image_id"), "image_id");
    } catch (const json::exception& ex) {
      throw Error("manifest " + path.string() + ": " + ex.what());
    }
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

void write_manifest(const std::filesystem::path& path, const ExplanationManifest& manifest) {
  json j = json::array();
  for (const auto& e : manifest.entries) {
    j.push_back({{"path", e.path},
                 {"model", e.model},
                 {"fold", e.fold},
                 {"class", std::string(to_string(e.cls))},
                 {"image_id", e.image_id}});
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::optional<GroupLevel> parse_group_level(std::string_view text) {
  if (text == "per_fold" || text == "fold") return GroupLevel::per_fold;
  if (text == "per_model" || text == "model") return GroupLevel::per_model;
  if (text == "global") return GroupLevel::global;
  return std::nullopt;
}

std::string_view to_string(GroupLevel level) {
  switch (level) {
    case GroupLevel::per_fold: return "per_fold";
    case GroupLevel::per_model: return "per_model";
    case GroupLevel::global: return "global";
  }
  return "?";
}

std::string GroupKey::stem() const {
  std::string s = model ? safe_component(*model) : "global";
  if (fold) s += "_fold" + std::to_string(*fold);
  return s + "_" + std::string(to_string(cls));
}

GroupKey group_key(const ManifestEntry& e, GroupLevel level) {
  GroupKey k;
  k.cls = e.cls;
  if (level != GroupLevel::global) k.model = e.model;
  if (level == GroupLevel::per_fold) k.fold = e.fold;
  return k;
}

Heatmap aggregate(std::span<const GrayImage> images) {
  if (images.empty()) throw Error("aggregate: empty image set");
  const GrayImage& first = images.front();
  std::vector<long double> acc(first.size(), 0.0L);
  for (const auto& img : images) {
    require_same_shape(first, img, "aggregate");
    check_range(img);
    const auto px = img.pixels();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += px[i];
  }
  Heatmap h;
  h.support = images.size();
  h.pixels = GrayImage(first.width(), first.height());
  const long double n = static_cast<long double>(images.size());
  auto out = h.pixels.pixels();
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<double>(acc[i] / n);
  return h;
}

ImageLoader disk_loader(const ExplanationManifest& manifest) {
  return [&manifest](const ManifestEntry& e) { return read_gray(manifest.resolve(e)); };
}

std::vector<Heatmap> group_and_aggregate(const ExplanationManifest& manifest, GroupLevel level,
                                         const ImageLoader& load, int jobs) {
  manifest.validate();
  std::map<GroupKey, std::vector<const ManifestEntry*>> groups;
  for (const auto& e : manifest.entries) groups[group_key(e, level)].push_back(&e);
  if (groups.empty()) throw Error("group_and_aggregate: manifest has no entries");

  std::vector<std::pair<GroupKey, std::vector<const ManifestEntry*>>> work(groups.begin(), groups.end());
  for (auto& [key, members] : work) {
    std::sort(members.begin(), members.end(),
              [](const ManifestEntry* a, const ManifestEntry* b) { return a->sort_key() < b->sort_key(); });
  }
  std::vector<Heatmap> out(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t g) {
    const auto& [key, members] = work[g];
    if (members.empty()) throw Error("group_and_aggregate: empty group " + key.stem());
    // Stream members so memory stays at one image per group.
    GrayImage first = load(*members.front());
    check_range(first);
    std::vector<long double> acc(first.pixels().begin(), first.pixels().end());
    for (std::size_t m = 1; m < members.size(); ++m) {
      const GrayImage img = load(*members[m]);
      require_same_shape(first, img, "group_and_aggregate");
      check_range(img);
      const auto px = img.pixels();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += px[i];
    }
    Heatmap h;
    h.group = key;
    h.support = members.size();
    h.pixels = GrayImage(first.width(), first.height());
    const long double n = static_cast<long double>(members.size());
    auto dst = h.pixels.pixels();
    for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<double>(acc[i] / n);
    out[g] = std::move(h);
  });
  return out;
}

void write_heatmap(const std::filesystem::path& dir, const Heatmap& h, const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  const std::string stem = h.group.stem();
  write_pgm16(dir / (stem + ".pgm"), h.pixels);
  json group = {{"class", std::string(to_string(h.group.cls))}};
  if (h.group.model) group["model"] = *h.group.model;
  if (h.group.fold) group["fold"] = *h.group.fold;
  json side = {{"group", group}, {"support", h.support}, {"config_hash", config_hash}};
  std::ofstream out(dir / (stem + ".json"));
  if (!out) throw Error("cannot write sidecar for " + stem);
  out << side.dump(2) << "\n";
}

}  // namespace xfg
