#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "xfg/config.hpp"
#include "xfg/ekman.hpp"
#include "xfg/heatmap.hpp"
#include "xfg/landmarks.hpp"

namespace xfg {

/// Outcome of one stage. Failures are per-item messages in a fixed order.
struct StageResult {
  std::string stage;
  std::size_t items = 0;
  std::vector<std::string> failures;
  double seconds = 0.0;
};

/// An input face: `<id>.pgm|png` next to `<id>.csv` (68 landmark rows).
struct InputItem {
  std::string image_id;
  std::filesystem::path image;
  std::filesystem::path landmarks;  // empty if the CSV is missing
};

/// Sorted by image id. Throws ConfigError if the directory has no images.
std::vector<InputItem> list_inputs(const std::filesystem::path& dir);

/// Layout, AU table and AU regions from the config (or the built-in defaults).
StandardLayout resolve_layout(const RunConfig& config);
ActionUnitTable resolve_au_table(const RunConfig& config);
AuRegionMap resolve_au_regions(const RunConfig& config);

/// Classify every input with each model/fold oracle, keep up to `quota`
/// positives per predicted class, explain them with SLIC + LIME. Writes
/// `<model>/fold<k>/<id>.pgm`, `<model>/fold<k>/predictions.json` and
/// `manifest.json` under `out_dir`.
StageResult run_explain(const RunConfig& config, const std::filesystem::path& out_dir);

/// Warps each relevance image in `manifest` to the canonical frame using
/// `<landmarks_dir>/<image_id>.csv`. Writes a new manifest.json.
StageResult run_standardize(const RunConfig& config, const std::filesystem::path& manifest,
                            const std::filesystem::path& landmarks_dir, const std::filesystem::path& out_dir);

/// Heatmaps for each level under `out_dir/<level>/`.
StageResult run_aggregate(const RunConfig& config, const std::filesystem::path& manifest,
                          const std::vector<GroupLevel>& levels, const std::filesystem::path& out_dir);

/// `<expression>.pgm` per expression plus masks.json.
StageResult run_masks(const RunConfig& config, const std::filesystem::path& out_dir);

/// Otsu-binarizes every heatmap in `heatmap_dir` and scores it against the
/// mask of its expression. Writes metrics.csv and the binarized masks.
StageResult run_compare(const RunConfig& config, const std::filesystem::path& heatmap_dir,
                        const std::filesystem::path& mask_dir, const std::filesystem::path& out_dir);

/// One dendrogram per expression over the per-model heatmaps in `heatmap_dir`.
StageResult run_cluster(const RunConfig& config, const std::filesystem::path& heatmap_dir,
                        const std::filesystem::path& out_dir);

/// explain -> standardize -> aggregate -> masks -> compare -> cluster under
/// config.output_dir. Writes run.json (deterministic) and timings.json.
std::vector<StageResult> run_pipeline(const RunConfig& config);

/// FNV-1a over every file's relative path and bytes, skipping timings.json.
std::string hash_tree(const std::filesystem::path& root);

}  // namespace xfg
