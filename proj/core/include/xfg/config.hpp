#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "xfg/dendrogram.hpp"
#include "xfg/image.hpp"
#include "xfg/lime.hpp"
#include "xfg/slic.hpp"

namespace xfg {

/// Bad configuration or command-line usage (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Minimal TOML reader: [table], [[array-of-tables]], key = value with
// strings, integers, floats, booleans and single-line arrays of those.
// Inline tables, dotted keys and multi-line strings are rejected.
// ---------------------------------------------------------------------------
namespace toml {

struct Value;
using Array = std::vector<Value>;
struct Value {
  std::variant<std::string, std::int64_t, double, bool, Array> v;
};
using Table = std::map<std::string, Value>;

struct Document {
  Table root;
  std::map<std::string, Table> tables;
  std::map<std::string, std::vector<Table>> table_arrays;
};

Document parse(const std::string& text, const std::string& source = "<toml>");

}  // namespace toml

struct ModelSpec {
  std::string name;
  /// Oracle spec (see make_oracle_factory); "{fold}" is replaced by the fold index.
  std::string oracle;
};

struct RunConfig {
  std::filesystem::path input_dir;
  std::filesystem::path output_dir = "xfg-out";

  int canonical_width = 224;
  int canonical_height = 224;
  std::optional<std::filesystem::path> layout_path;
  std::optional<std::filesystem::path> au_table_path;
  std::optional<std::filesystem::path> au_regions_path;

  SlicParams slic;
  LimeParams lime;
  std::uint64_t seed = 0;

  std::vector<ModelSpec> models;
  int folds = 1;
  int quota = 0;  // positives kept per predicted class; 0 keeps all
  int pool_size = 1;
  int oracle_timeout_ms = 30000;
  int jobs = 1;

  Linkage linkage = Linkage::average;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  /// Key=value lines covering every setting that can change an output byte
  /// (so not jobs, pool size, timeout or output directory).
  std::string canonical_text() const;
  /// 16 hex digits of FNV-1a over canonical_text().
  std::string hash() const;
  std::string oracle_spec(const ModelSpec& model, int fold) const;
};

/// Reads a TOML run config. Relative paths resolve against the file's directory.
RunConfig load_config(const std::filesystem::path& path);
/// Applies XFG_SEED if set.
void apply_environment(RunConfig& config);

}  // namespace xfg
