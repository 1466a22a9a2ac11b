// xfg: command-line front end for the explanation pipeline.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xfg/config.hpp"
#include "xfg/ekman.hpp"
#include "xfg/landmarks.hpp"
#include "xfg/pipeline.hpp"
#include "xfg/synth.hpp"

namespace {

using namespace xfg;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitUsage = 2;

/// Command-line mirrors of the config keys. Unset flags leave the file value.
struct Overrides {
  std::string config;
  std::optional<std::string> input, output;
  std::optional<int> width, height;
  std::optional<std::string> layout, au_table, au_regions;
  std::optional<int> slic_k, slic_iterations;
  std::optional<double> compactness;
  std::optional<int> samples;
  std::optional<double> sigma, lambda;
  std::optional<std::uint64_t> seed;
  std::optional<int> folds, quota, pool, timeout_ms, jobs;
  std::optional<std::string> linkage;
  std::vector<std::string> models;  // name=spec
  std::optional<std::string> oracle, oracle_cmd;
  std::string model_name = "model";

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "TOML run config");
    app->add_option("--input", input, "Directory of images + landmark CSVs");
    app->add_option("--output", output, "Output directory");
    app->add_option("--width", width, "Canonical width");
    app->add_option("--height", height, "Canonical height");
    app->add_option("--layout", layout, "Standard layout CSV");
    app->add_option("--au-table", au_table, "Expression -> AU table (JSON)");
    app->add_option("--au-regions", au_regions, "AU -> landmark region map (JSON)");
    app->add_option("--slic-k", slic_k, "Target superpixel count");
    app->add_option("--compactness", compactness, "SLIC compactness");
    app->add_option("--slic-iterations", slic_iterations, "SLIC iterations");
    app->add_option("--samples", samples, "LIME perturbation samples");
    app->add_option("--sigma", sigma, "LIME kernel width");
    app->add_option("--lambda", lambda, "Ridge penalty");
    app->add_option("--seed", seed, "Master seed (XFG_SEED also works)");
    app->add_option("--folds", folds, "Folds per model");
    app->add_option("--quota", quota, "Positives kept per predicted class (0 = all)");
    app->add_option("--pool", pool, "Oracle instances per model");
    app->add_option("--timeout-ms", timeout_ms, "Oracle response timeout");
    app->add_option("-j,--jobs", jobs, "Worker threads");
    app->add_option("--linkage", linkage, "single | complete | average");
    app->add_option("--model", models, "name=oracle-spec, repeatable; replaces configured models");
    app->add_option("--oracle", oracle, "Single oracle spec (builtin:... or cmd:...)");
    app->add_option("--oracle-cmd", oracle_cmd, "Single external oracle command line");
    app->add_option("--model-name", model_name, "Model id used with --oracle / --oracle-cmd");
  }

  /// file < XFG_SEED < flags.
  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    apply_environment(c);
    if (input) c.input_dir = *input;
    if (output) c.output_dir = *output;
    if (width) c.canonical_width = *width;
    if (height) c.canonical_height = *height;
    if (layout) c.layout_path = *layout;
    if (au_table) c.au_table_path = *au_table;
    if (au_regions) c.au_regions_path = *au_regions;
    if (slic_k) c.slic.k_target = *slic_k;
    if (compactness) c.slic.compactness = *compactness;
    if (slic_iterations) c.slic.iterations = *slic_iterations;
    if (samples) c.lime.n_samples = *samples;
    if (sigma) c.lime.kernel_width = *sigma;
    if (lambda) c.lime.ridge = *lambda;
    if (seed) c.seed = *seed;
    if (folds) c.folds = *folds;
    if (quota) c.quota = *quota;
    if (pool) c.pool_size = *pool;
    if (timeout_ms) c.oracle_timeout_ms = *timeout_ms;
    if (jobs) c.jobs = *jobs;
    if (linkage) {
      const auto l = parse_linkage(*linkage);
      if (!l) throw ConfigError("--linkage must be single, complete or average");
      c.linkage = *l;
    }
    if (!models.empty()) {
      c.models.clear();
      for (const auto& m : models) {
        const auto eq = m.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--model expects name=spec, got \"" + m + "\"");
        c.models.push_back({m.substr(0, eq), m.substr(eq + 1)});
      }
    }
    if (oracle && oracle_cmd) throw ConfigError("use either --oracle or --oracle-cmd");
    if (oracle) c.models = {{model_name, *oracle}};
    if (oracle_cmd) c.models = {{model_name, "cmd:" + *oracle_cmd}};
    c.validate();
    return c;
  }
};

int report(const std::vector<StageResult>& stages) {
  bool failed = false;
  for (const auto& s : stages) {
    std::cerr << s.stage << ": " << s.items << " item(s)";
    if (!s.failures.empty()) std::cerr << ", " << s.failures.size() << " failure(s)";
    std::cerr << "\n";
    for (const auto& f : s.failures) std::cerr << "  " << f << "\n";
    failed = failed || !s.failures.empty();
  }
  return failed ? kExitPartial : kExitOk;
}

std::vector<GroupLevel> parse_levels(const std::string& text) {
  if (text == "all") return {GroupLevel::per_fold, GroupLevel::per_model, GroupLevel::global};
  const auto l = parse_group_level(text);
  if (!l) throw ConfigError("--level must be per_fold, per_model, global or all");
  return {*l};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explain facial-expression classifiers and compare their heatmaps with Ekman masks"};
  app.require_subcommand(1);

  Overrides ov;
  std::string manifest, landmarks, heatmaps, masks, level = "all";
  int per_class = 20;

  auto* pipeline = app.add_subcommand("pipeline", "explain -> standardize -> aggregate -> masks -> compare -> cluster");
  ov.attach(pipeline);

  auto* explain = app.add_subcommand("explain", "Classify and explain input faces");
  ov.attach(explain);

  auto* standardize = app.add_subcommand("standardize", "Warp relevance images to the canonical face");
  ov.attach(standardize);
  standardize->add_option("--manifest", manifest, "Relevance manifest from explain")->required();
  standardize->add_option("--landmarks", landmarks, "Directory of <image_id>.csv")->required();

  auto* aggregate = app.add_subcommand("aggregate", "Average standardized images into heatmaps");
  ov.attach(aggregate);
  aggregate->add_option("--manifest", manifest, "Standardized manifest")->required();
  aggregate->add_option("--level", level, "per_fold | per_model | global | all");

  auto* mask_cmd = app.add_subcommand("masks", "Rasterize one Ekman mask per expression");
  ov.attach(mask_cmd);

  auto* compare = app.add_subcommand("compare", "Score Otsu-binarized heatmaps against the masks");
  ov.attach(compare);
  compare->add_option("--heatmaps", heatmaps, "Heatmap directory (one level)")->required();
  compare->add_option("--masks", masks, "Mask directory")->required();

  auto* cluster = app.add_subcommand("cluster", "One dendrogram per expression over per-model heatmaps");
  ov.attach(cluster);
  cluster->add_option("--heatmaps", heatmaps, "per_model heatmap directory")->required();

  auto* synth = app.add_subcommand("synth", "Write synthetic faces with landmark CSVs");
  ov.attach(synth);
  synth->add_option("--per-class", per_class, "Faces per expression");

  auto* defaults = app.add_subcommand("defaults", "Write the built-in layout and AU tables");
  ov.attach(defaults);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig config = ov.resolve();
    const fs::path out = config.output_dir;
    if (*pipeline) return report(run_pipeline(config));
    if (*explain) return report({run_explain(config, out)});
    if (*standardize) return report({run_standardize(config, manifest, landmarks, out)});
    if (*aggregate) return report({run_aggregate(config, manifest, parse_levels(level), out)});
    if (*mask_cmd) return report({run_masks(config, out)});
    if (*compare) return report({run_compare(config, heatmaps, masks, out)});
    if (*cluster) return report({run_cluster(config, heatmaps, out)});
    if (*synth) {
      const auto ids = write_synthetic_set(out, default_layout(config.canonical_width, config.canonical_height),
                                           per_class, config.seed);
      std::cerr << "wrote " << ids.size() << " faces to " << out << "\n";
      return kExitOk;
    }
    if (*defaults) {
      fs::create_directories(out);
      const StandardLayout layout = default_layout(config.canonical_width, config.canonical_height);
      write_layout(out / "standard_layout.csv", layout);
      write_au_table(out / "au_table.json", ActionUnitTable::defaults());
      write_au_regions(out / "au_regions.json", AuRegionMap::defaults());
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "xfg: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "xfg: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitUsage;
}
