#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <tuple>
#include <string>
#include <vector>

#include "xfg/expression.hpp"
#include "xfg/image.hpp"

namespace xfg {

/// One standardized relevance image and the cell it belongs to.
struct ManifestEntry {
  std::string path;  // relative paths resolve against the manifest's directory
  std::string model;
  int fold = 0;
  Expression cls = Expression::anger;
  std::string image_id;

  auto sort_key() const { return std::tie(model, fold, cls, image_id); }
};

struct ExplanationManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // where relative paths resolve

  /// Throws on duplicate (model, fold, class, image_id).
  void validate() const;
  std::filesystem::path resolve(const ManifestEntry& e) const;
};

/// JSON array of {"path","model","fold","class","image_id"}.
ExplanationManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const ExplanationManifest& manifest);

enum class GroupLevel { per_fold, per_model, global };
std::optional<GroupLevel> parse_group_level(std::string_view text);
std::string_view to_string(GroupLevel level);

struct GroupKey {
  std::optional<std::string> model;
  std::optional<int> fold;
  Expression cls = Expression::anger;

  auto operator<=>(const GroupKey&) const = default;
  bool operator==(const GroupKey&) const = default;
  /// File stem, e.g. "vgg16_fold2_happiness" or "global_anger".
  std::string stem() const;
};

GroupKey group_key(const ManifestEntry& e, GroupLevel level);

struct Heatmap {
  GrayImage pixels;
  GroupKey group;
  std::size_t support = 0;
};

/// Pixel-wise mean, accumulated in long double in the given order.
Heatmap aggregate(std::span<const GrayImage> images);

using ImageLoader = std::function<GrayImage(const ManifestEntry&)>;

/// Loader that reads entries from disk relative to the manifest.
ImageLoader disk_loader(const ExplanationManifest& manifest);

/// One heatmap per group key, sorted by key. Each group is the flat union of
/// its members (count-weighted), summed in (model, fold, class, image_id)
/// order so neither manifest order nor `jobs` changes a single bit.
std::vector<Heatmap> group_and_aggregate(const ExplanationManifest& manifest, GroupLevel level,
                                         const ImageLoader& load, int jobs = 1);

/// Sidecar JSON: {"group":{...},"support":N,"config_hash":"..."}.
void write_heatmap(const std::filesystem::path& dir, const Heatmap& h, const std::string& config_hash);

}  // namespace xfg
