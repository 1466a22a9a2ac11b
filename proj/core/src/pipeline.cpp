#include "xfg/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "xfg/dendrogram.hpp"
#include "xfg/lime.hpp"
#include "xfg/metrics.hpp"
#include "xfg/oracle.hpp"
#include "xfg/parallel.hpp"
#include "xfg/slic.hpp"
#include "xfg/synth.hpp"
#include "xfg/warp.hpp"

namespace xfg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_stage(const fs::path& dir, const StageResult& r, const RunConfig& config) {
  write_json(dir / "stage.json",
             {{"stage", r.stage}, {"config_hash", config.hash()}, {"items", r.items}, {"failures", r.failures}});
}

std::string component(const std::string& s) {
  std::string out;
  for (char c : s) out += (c == '/' || c == '\\' || c == ':') ? '_' : c;
  return out.empty() ? "_" : out;
}

fs::path cell_dir(const std::string& model, int fold) {
  return fs::path(component(model)) / ("fold" + std::to_string(fold));
}

template <typename Fn>
StageResult timed(const char* name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  StageResult r = fn();
  r.stage = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Heatmap sidecars in a directory, sorted by file name.
struct StoredHeatmap {
  fs::path image;
  std::optional<std::string> model;
  std::optional<int> fold;
  Expression cls;
  std::string stem;
};

std::vector<StoredHeatmap> list_heatmaps(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("heatmap directory not found: " + dir.string());
  std::vector<fs::path> sidecars;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "stage.json")
      sidecars.push_back(e.path());
  std::sort(sidecars.begin(), sidecars.end());
  std::vector<StoredHeatmap> out;
  for (const auto& p : sidecars) {
    const json j = read_json(p);
    StoredHeatmap h;
    h.stem = p.stem().string();
    h.image = p.parent_path() / (h.stem + ".pgm");
    try {
      const auto& g = j.at("group");
      const auto cls = parse_expression(g.at("class").get<std::string>());
      if (!cls) throw Error("unknown class");
      h.cls = *cls;
      if (g.contains("model")) h.model = g["model"].get<std::string>();
      if (g.contains("fold")) h.fold = g["fold"].get<int>();
    } catch (const std::exception& e) {
      throw Error(p.string() + ": bad heatmap sidecar: " + e.what());
    }
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace

std::vector<InputItem> list_inputs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("input directory not found: " + dir.string());
  std::map<std::string, InputItem> items;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".pgm" && ext != ".png") continue;
    InputItem item;
    item.image_id = e.path().stem().string();
    item.image = e.path();
    const fs::path csv = dir / (item.image_id + ".csv");
    if (fs::is_regular_file(csv)) item.landmarks = csv;
    if (!items.emplace(item.image_id, item).second)
      throw ConfigError("two images share the id \"" + item.image_id + "\"");
  }
  if (items.empty()) throw ConfigError("no input images in " + dir.string());
  std::vector<InputItem> out;
  for (auto& [id, item] : items) out.push_back(std::move(item));
  return out;
}

StandardLayout resolve_layout(const RunConfig& config) {
  if (!config.layout_path) return default_layout(config.canonical_width, config.canonical_height);
  StandardLayout layout = read_layout(*config.layout_path);
  layout.validate();
  if (layout.width != config.canonical_width || layout.height != config.canonical_height)
    throw ConfigError("layout " + config.layout_path->string() + " is " + std::to_string(layout.width) + "x" +
                      std::to_string(layout.height) + " but the canonical resolution is " +
                      std::to_string(config.canonical_width) + "x" + std::to_string(config.canonical_height));
  return layout;
}

ActionUnitTable resolve_au_table(const RunConfig& config) {
  return config.au_table_path ? read_au_table(*config.au_table_path) : ActionUnitTable::defaults();
}

AuRegionMap resolve_au_regions(const RunConfig& config) {
  return config.au_regions_path ? read_au_regions(*config.au_regions_path) : AuRegionMap::defaults();
}

// --- explain ------------------------------------------------------------------

StageResult run_explain(const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  if (config.models.empty()) throw ConfigError("no models configured");
  const auto inputs = list_inputs(config.input_dir);
  const std::size_t n = inputs.size();

  StageResult result;
  result.stage = "explain";

  struct Loaded {
    GrayImage img;
    SuperpixelLabels superpixels;
    std::string error;
  };
  std::vector<Loaded> loaded(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    try {
      if (inputs[i].landmarks.empty()) throw Error("missing landmark file");
      GrayImage img = read_gray(inputs[i].image);
      read_landmarks_csv(inputs[i].landmarks, img.width(), img.height());
      loaded[i].superpixels = slic(img, config.slic);
      loaded[i].img = std::move(img);
    } catch (const std::exception& e) {
      loaded[i].error = e.what();
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    if (!loaded[i].error.empty()) result.failures.push_back(inputs[i].image_id + ": " + loaded[i].error);

  fs::create_directories(out_dir);
  ExplanationManifest manifest;
  manifest.base_dir = out_dir;

  for (const auto& model : config.models) {
    for (int fold = 0; fold < config.folds; ++fold) {
      const std::string spec = config.oracle_spec(model, fold);
      const std::string cell = model.name + "/fold" + std::to_string(fold);
      const fs::path rel_dir = cell_dir(model.name, fold);
      fs::create_directories(out_dir / rel_dir);

      std::optional<OraclePool> pool;
      try {
        pool.emplace(make_oracle_factory(spec, cell, std::chrono::milliseconds(config.oracle_timeout_ms)),
                     config.pool_size);
      } catch (const std::exception& e) {
        result.failures.push_back(cell + ": cannot start oracle: " + e.what());
        continue;
      }

      std::vector<std::optional<PredictionRecord>> preds(n);
      std::vector<std::string> errors(n);
      parallel_for(n, config.jobs, [&](std::size_t i) {
        if (!loaded[i].error.empty()) return;
        auto lease = pool->acquire();
        try {
          preds[i] = lease->classify(loaded[i].img);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      });

      std::array<int, kExpressionCount> kept{};
      std::vector<char> selected(n, 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (!preds[i]) continue;
        int& k = kept[index_of(preds[i]->predicted)];
        if (config.quota == 0 || k < config.quota) {
          selected[i] = 1;
          ++k;
        }
      }

      std::vector<std::optional<Expression>> explained(n);
      parallel_for(n, config.jobs, [&](std::size_t i) {
        if (!selected[i]) return;
        auto lease = pool->acquire();
        try {
          const std::uint64_t seed = derive_seed(config.seed, cell + "/" + inputs[i].image_id);
          const Explanation ex = explain(loaded[i].img, *lease, loaded[i].superpixels, seed, config.lime);
          write_pgm16(out_dir / rel_dir / (inputs[i].image_id + ".pgm"), ex.relevance);
          explained[i] = ex.explained_class;
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      });

      json records = json::array();
      for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i].empty()) result.failures.push_back(cell + "/" + inputs[i].image_id + ": " + errors[i]);
        if (!preds[i]) continue;
        records.push_back({{"image_id", inputs[i].image_id},
                           {"probs", preds[i]->probs},
                           {"predicted", std::string(to_string(preds[i]->predicted))},
                           {"explained", explained[i].has_value()}});
        if (explained[i]) {
          manifest.entries.push_back({(rel_dir / (inputs[i].image_id + ".pgm")).generic_string(), model.name, fold,
                                      *explained[i], inputs[i].image_id});
          ++result.items;
        }
      }
      write_json(out_dir / rel_dir / "predictions.json", {{"config_hash", config.hash()},
                                                          {"model", model.name},
                                                          {"fold", fold},
                                                          {"oracle", spec},
                                                          {"predictions", records}});
    }
  }
  write_manifest(out_dir / "manifest.json", manifest);
  write_stage(out_dir, result, config);
  return result;
}

// --- standardize --------------------------------------------------------------

StageResult run_standardize(const RunConfig& config, const fs::path& manifest_path, const fs::path& landmarks_dir,
                            const fs::path& out_dir) {
  const ExplanationManifest manifest = read_manifest(manifest_path);
  manifest.validate();
  const StandardLayout layout = resolve_layout(config);
  const Triangulation tri = layout_triangulation(layout);
  const TriangleLookup lookup(layout.points, tri, layout.width, layout.height);

  const std::size_t n = manifest.entries.size();
  std::vector<std::string> errors(n);
  std::vector<char> ok(n, 0);
  fs::create_directories(out_dir);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    try {
      const GrayImage rel = read_gray(manifest.resolve(e));
      const LandmarkSet raw =
          read_landmarks_csv(landmarks_dir / (e.image_id + ".csv"), rel.width(), rel.height());
      const LandmarkSet src = augment_landmarks(raw);
      const PiecewiseAffineMap map = fit_piecewise_affine(src, layout, tri);
      const GrayImage out = warp_to_standard(rel, src, map, lookup);
      const fs::path dir = out_dir / cell_dir(e.model, e.fold);
      fs::create_directories(dir);
      write_pgm16(dir / (e.image_id + ".pgm"), out);
      ok[i] = 1;
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  });

  StageResult result;
  result.stage = "standardize";
  ExplanationManifest out;
  out.base_dir = out_dir;
  for (std::size_t i = 0; i < n; ++i) {
    const ManifestEntry& e = manifest.entries[i];
    if (!ok[i]) {
      result.failures.push_back(e.model + "/fold" + std::to_string(e.fold) + "/" + e.image_id + ": " + errors[i]);
      continue;
    }
    ManifestEntry s = e;
    s.path = (cell_dir(e.model, e.fold) / (e.image_id + ".pgm")).generic_string();
    out.entries.push_back(std::move(s));
    ++result.items;
  }
  write_manifest(out_dir / "manifest.json", out);
  write_stage(out_dir, result, config);
  return result;
}

// --- aggregate ----------------------------------------------------------------

StageResult run_aggregate(const RunConfig& config, const fs::path& manifest_path,
                          const std::vector<GroupLevel>& levels, const fs::path& out_dir) {
  const ExplanationManifest manifest = read_manifest(manifest_path);
  manifest.validate();
  StageResult result;
  result.stage = "aggregate";
  fs::create_directories(out_dir);
  const std::string hash = config.hash();
  for (GroupLevel level : levels) {
    const fs::path dir = out_dir / std::string(to_string(level));
    fs::create_directories(dir);
    const auto heatmaps = group_and_aggregate(manifest, level, disk_loader(manifest), config.jobs);
    for (const auto& h : heatmaps) {
      write_heatmap(dir, h, hash);
      write_png(dir / (h.group.stem() + ".png"), render_jet(h.pixels));
    }
    result.items += heatmaps.size();
  }
  write_stage(out_dir, result, config);
  return result;
}

// --- masks --------------------------------------------------------------------

StageResult run_masks(const RunConfig& config, const fs::path& out_dir) {
  const StandardLayout layout = resolve_layout(config);
  const Triangulation tri = layout_triangulation(layout);
  const ActionUnitTable table = resolve_au_table(config);
  const AuRegionMap regions = resolve_au_regions(config);
  regions.validate(tri);
  const auto masks = build_all_masks(table, regions, layout, tri);

  fs::create_directories(out_dir);
  StageResult result;
  result.stage = "masks";
  const GrayImage sketch = render_face_sketch(layout);
  json exprs = json::object();
  for (const auto& m : masks) {
    const std::string name(to_string(m.expression));
    write_mask_pgm(out_dir / (name + ".pgm"), m.mask);
    write_png(out_dir / (name + "_overlay.png"), render_overlay(sketch, m.mask));
    std::size_t on = 0;
    for (auto v : m.mask.pixels()) on += v != 0;
    exprs[name] = {{"aus", table.aus.at(m.expression)}, {"pixels", on}};
    if (on == 0) result.failures.push_back(name + ": empty mask");
    ++result.items;
  }
  write_json(out_dir / "masks.json", {{"config_hash", config.hash()},
                                      {"width", layout.width},
                                      {"height", layout.height},
                                      {"expressions", exprs}});
  write_stage(out_dir, result, config);
  return result;
}

// --- compare ------------------------------------------------------------------

StageResult run_compare(const RunConfig& config, const fs::path& heatmap_dir, const fs::path& mask_dir,
                        const fs::path& out_dir) {
  const auto heatmaps = list_heatmaps(heatmap_dir);
  fs::create_directories(out_dir);
  StageResult result;
  result.stage = "compare";

  struct Row {
    std::string label;
    Expression cls;
    std::optional<MetricsRecord> metrics;
  };
  std::vector<Row> rows(heatmaps.size());
  std::vector<std::string> errors(heatmaps.size());
  parallel_for(heatmaps.size(), config.jobs, [&](std::size_t i) {
    const StoredHeatmap& h = heatmaps[i];
    rows[i].label = h.model.value_or("global") + (h.fold ? "/fold" + std::to_string(*h.fold) : "");
    rows[i].cls = h.cls;
    try {
      const GrayImage heat = read_gray(h.image);
      const BinaryMask gt = read_mask_pgm(mask_dir / (std::string(to_string(h.cls)) + ".pgm"));
      const BinaryMask pred = binarize_otsu(heat);
      write_mask_pgm(out_dir / (h.stem + "_otsu.pgm"), pred);
      rows[i].metrics = compare(gt, pred);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.label, a.cls) < std::tie(b.label, b.cls);
  });
  std::vector<MetricsRow> table;
  for (std::size_t i = 0; i < heatmaps.size(); ++i)
    if (!errors[i].empty()) result.failures.push_back(heatmaps[i].stem + ": " + errors[i]);
  for (const auto& r : rows) {
    if (!r.metrics) continue;
    table.push_back({r.label, std::string(display_name(r.cls)), *r.metrics});
    ++result.items;
  }
  write_metrics_csv(out_dir / "metrics.csv", table);
  write_stage(out_dir, result, config);
  return result;
}

// --- cluster ------------------------------------------------------------------

StageResult run_cluster(const RunConfig& config, const fs::path& heatmap_dir, const fs::path& out_dir) {
  const auto heatmaps = list_heatmaps(heatmap_dir);
  fs::create_directories(out_dir);
  StageResult result;
  result.stage = "cluster";

  std::map<Expression, std::vector<const StoredHeatmap*>> by_class;
  for (const auto& h : heatmaps)
    if (h.model && !h.fold) by_class[h.cls].push_back(&h);

  for (Expression e : kAllExpressions) {
    const std::string name(to_string(e));
    auto& members = by_class[e];
    std::sort(members.begin(), members.end(), [](auto* a, auto* b) { return *a->model < *b->model; });
    if (members.size() < 2) {
      result.failures.push_back(name + ": need at least two model heatmaps, found " +
                                std::to_string(members.size()));
      continue;
    }
    try {
      std::vector<std::string> labels;
      std::vector<GrayImage> images;
      for (const auto* h : members) {
        labels.push_back(*h->model);
        images.push_back(read_gray(h->image));
      }
      const DistanceMatrix d = distance_matrix(labels, images, config.jobs);
      const Dendrogram tree = agglomerate(d, config.linkage);
      {
        std::ofstream out(out_dir / (name + ".json"), std::ios::binary);
        out << tree.to_json() << "\n";
      }
      {
        std::ofstream out(out_dir / (name + ".nwk"), std::ios::binary);
        out << tree.to_newick() << "\n";
      }
      std::ofstream csv(out_dir / (name + "_distances.csv"), std::ios::binary);
      csv << "label";
      for (const auto& l : labels) csv << "," << l;
      csv << "\n" << std::setprecision(17);
      for (std::size_t i = 0; i < d.size(); ++i) {
        csv << labels[i];
        for (std::size_t j = 0; j < d.size(); ++j) csv << "," << d(i, j);
        csv << "\n";
      }
      ++result.items;
    } catch (const std::exception& ex) {
      result.failures.push_back(name + ": " + ex.what());
    }
  }
  write_stage(out_dir, result, config);
  return result;
}

// --- pipeline -----------------------------------------------------------------

std::vector<StageResult> run_pipeline(const RunConfig& config) {
  config.validate();
  if (config.models.empty()) throw ConfigError("no models configured");
  list_inputs(config.input_dir);  // fail before writing anything

  const fs::path root = config.output_dir;
  const fs::path explain_dir = root / "explain", std_dir = root / "standardized", heat_dir = root / "heatmaps",
                 mask_dir = root / "masks", compare_dir = root / "compare", cluster_dir = root / "cluster";
  std::vector<StageResult> stages;
  stages.push_back(timed("explain", [&] { return run_explain(config, explain_dir); }));
  stages.push_back(timed("standardize", [&] {
    return run_standardize(config, explain_dir / "manifest.json", config.input_dir, std_dir);
  }));
  stages.push_back(timed("aggregate", [&] {
    return run_aggregate(config, std_dir / "manifest.json",
                         {GroupLevel::per_fold, GroupLevel::per_model, GroupLevel::global}, heat_dir);
  }));
  stages.push_back(timed("masks", [&] { return run_masks(config, mask_dir); }));
  stages.push_back(timed("compare", [&] {
    return run_compare(config, heat_dir / std::string(to_string(GroupLevel::per_model)), mask_dir, compare_dir);
  }));
  stages.push_back(timed("cluster", [&] {
    return run_cluster(config, heat_dir / std::string(to_string(GroupLevel::per_model)), cluster_dir);
  }));

  json stage_list = json::array();
  json timings = json::object();
  for (const auto& s : stages) {
    stage_list.push_back({{"stage", s.stage}, {"items", s.items}, {"failures", s.failures}});
    timings[s.stage] = s.seconds;
  }
  std::vector<std::string> settings;
  std::istringstream lines(config.canonical_text());
  for (std::string line; std::getline(lines, line);) settings.push_back(line);
  write_json(root / "run.json",
             {{"config_hash", config.hash()}, {"seed", config.seed}, {"settings", settings}, {"stages", stage_list}});
  write_json(root / "timings.json", {{"config_hash", config.hash()}, {"seconds", timings}});
  return stages;
}

std::string hash_tree(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "timings.json") files.push_back(e.path());
  std::vector<std::pair<std::string, fs::path>> named;
  for (const auto& f : files) named.emplace_back(fs::relative(f, root).generic_string(), f);
  std::sort(named.begin(), named.end());
  std::uint64_t h = fnv1a64("");
  for (const auto& [rel, path] : named) {
    h = fnv1a64(rel, h);
    h = fnv1a64(std::string_view("\0", 1), h);
    std::ifstream in(path, std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    h = fnv1a64(bytes.str(), h);
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

}  // namespace xfg
