#include "xfg/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "xfg/parallel.hpp"

namespace xfg {
namespace toml {
namespace {

class Parser {
 public:
  Parser(const std::string& text, const std::string& source) : text_(text), source_(source) {}

  Document run() {
    Document doc;
    Table* current = &doc.root;
    std::set<std::string> seen_tables;
    while (pos_ < text_.size()) {
      skip_blank();
      if (at_end_of_line()) {
        next_line();
        continue;
      }
      if (peek() == '[') {
        const bool array = text_.compare(pos_, 2, "[[") == 0;
        pos_ += array ? 2 : 1;
        skip_blank();
        const std::string name = bare_key();
        skip_blank();
        expect(array ? "]]" : "]");
        if (array) {
          current = &doc.table_arrays[name].emplace_back();
        } else {
          if (!seen_tables.insert(name).second) fail("table [" + name + "] defined twice");
          current = &doc.tables[name];
        }
      } else {
        const std::string key = peek() == '"' ? basic_string() : bare_key();
        skip_blank();
        expect("=");
        skip_blank();
        Value v = value();
        if (!current->emplace(key, std::move(v)).second) fail("duplicate key \"" + key + "\"");
      }
      skip_blank();
      if (!at_end_of_line()) fail("unexpected trailing characters");
      next_line();
    }
    return doc;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source_ + ":" + std::to_string(line_) + ": " + what);
  }

  void skip_blank() {
    while (peek() == ' ' || peek() == '\t') ++pos_;
  }

  bool at_end_of_line() const {
    const char c = peek();
    return c == '\0' || c == '\n' || c == '#' || (c == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n');
  }

  void next_line() {
    while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
    if (pos_ < text_.size()) ++pos_;
    ++line_;
  }

  void expect(const char* token) {
    const std::string t(token);
    if (text_.compare(pos_, t.size(), t) != 0) fail("expected '" + t + "'");
    pos_ += t.size();
  }

  std::string bare_key() {
    const std::size_t start = pos_;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-') ++pos_;
    if (pos_ == start) fail("expected a key");
    if (peek() == '.') fail("dotted keys are not supported");
    return text_.substr(start, pos_ - start);
  }

  std::string basic_string() {
    expect("\"");
    if (text_.compare(pos_, 2, "\"\"") == 0) fail("multi-line strings are not supported");
    std::string out;
    for (;;) {
      const char c = peek();
      if (c == '\0' || c == '\n') fail("unterminated string");
      ++pos_;
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      const char e = peek();
      ++pos_;
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
  }

  std::string literal_string() {
    expect("'");
    const std::size_t end = text_.find_first_of("'\n", pos_);
    if (end == std::string::npos || text_[end] != '\'') fail("unterminated string");
    std::string out = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }

  Value value() {
    const char c = peek();
    if (c == '"') return {basic_string()};
    if (c == '\'') return {literal_string()};
    if (c == '[') return {array()};
    if (c == '{') fail("inline tables are not supported");
    if (text_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return {true};
    }
    if (text_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return {false};
    }
    return number();
  }

  Value array() {
    expect("[");
    Array items;
    for (;;) {
      skip_blank();
      if (peek() == ']') {
        ++pos_;
        return {std::move(items)};
      }
      items.push_back(value());
      skip_blank();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  Value number() {
    const std::size_t start = pos_;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' || peek() == '.' ||
           peek() == '_')
      ++pos_;
    std::string token;
    for (char ch : text_.substr(start, pos_ - start))
      if (ch != '_') token += ch;
    if (token.empty()) fail("expected a value");
    const bool is_float = token.find_first_of(".eE") != std::string::npos || token == "inf" || token == "nan";
    const char* first = token.data() + (token[0] == '+' ? 1 : 0);
    const char* last = token.data() + token.size();
    if (is_float) {
      double d = 0;
      const auto [ptr, ec] = std::from_chars(first, last, d);
      if (ec != std::errc() || ptr != last) fail("bad number \"" + token + "\"");
      return {d};
    }
    std::int64_t i = 0;
    const auto [ptr, ec] = std::from_chars(first, last, i);
    if (ec != std::errc() || ptr != last) fail("bad value \"" + token + "\"");
    return {i};
  }

  const std::string& text_;
  const std::string& source_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

Document parse(const std::string& text, const std::string& source) { return Parser(text, source).run(); }

}  // namespace toml

namespace {

class Reader {
 public:
  Reader(const toml::Table& table, std::string where) : table_(table), where_(std::move(where)) {}
  /// Rejects keys nobody asked for.
  void done() const {
    for (const auto& [key, value] : table_)
      if (!used_.count(key)) throw ConfigError(where_ + ": unknown key \"" + key + "\"");
  }

  std::optional<std::string> str(const std::string& key) { return get<std::string>(key, "a string"); }
  std::optional<std::int64_t> integer(const std::string& key) { return get<std::int64_t>(key, "an integer"); }
  std::optional<double> real(const std::string& key) {
    const auto it = table_.find(key);
    if (it != table_.end() && std::holds_alternative<std::int64_t>(it->second.v)) {
      used_.insert(key);
      return static_cast<double>(std::get<std::int64_t>(it->second.v));
    }
    return get<double>(key, "a number");
  }

 private:
  template <typename T>
  std::optional<T> get(const std::string& key, const char* what) {
    const auto it = table_.find(key);
    if (it == table_.end()) return std::nullopt;
    used_.insert(key);
    if (!std::holds_alternative<T>(it->second.v)) throw ConfigError(where_ + "." + key + " must be " + what);
    return std::get<T>(it->second.v);
  }

  const toml::Table& table_;
  std::string where_;
  std::set<std::string> used_;
};

int to_int(std::int64_t v, const std::string& key) {
  if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(key + " out of range");
  return static_cast<int>(v);
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(canonical_width >= 8 && canonical_height >= 8, "canonical resolution must be at least 8x8");
  require(slic.k_target >= 1, "slic.k must be >= 1");
  require(slic.compactness > 0, "slic.compactness must be > 0");
  require(slic.iterations >= 1, "slic.iterations must be >= 1");
  require(lime.n_samples >= 2, "lime.samples must be >= 2");
  require(lime.kernel_width > 0, "lime.sigma must be > 0");
  require(lime.ridge >= 0, "lime.lambda must be >= 0");
  require(folds >= 1, "folds must be >= 1");
  require(quota >= 0, "quota must be >= 0");
  require(pool_size >= 1, "oracle.pool must be >= 1");
  require(oracle_timeout_ms >= 1, "oracle.timeout_ms must be >= 1");
  require(jobs >= 1, "jobs must be >= 1");
  std::set<std::string> names;
  for (const auto& m : models) {
    require(!m.name.empty(), "model name must not be empty");
    require(m.name.find_first_of("/\\") == std::string::npos, "model name must not contain path separators");
    require(!m.oracle.empty(), "model " + m.name + " has no oracle");
    require(names.insert(m.name).second, "duplicate model name " + m.name);
  }
}

std::string RunConfig::canonical_text() const {
  std::ostringstream s;
  auto opt = [](const std::optional<std::filesystem::path>& p) { return p ? p->generic_string() : std::string(); };
  s << "input=" << input_dir.generic_string() << "\n"
    << "canonical.width=" << canonical_width << "\n"
    << "canonical.height=" << canonical_height << "\n"
    << "canonical.layout=" << opt(layout_path) << "\n"
    << "masks.au_table=" << opt(au_table_path) << "\n"
    << "masks.au_regions=" << opt(au_regions_path) << "\n"
    << "slic.k=" << slic.k_target << "\n"
    << "slic.compactness=" << format_double(slic.compactness) << "\n"
    << "slic.iterations=" << slic.iterations << "\n"
    << "lime.samples=" << lime.n_samples << "\n"
    << "lime.sigma=" << format_double(lime.kernel_width) << "\n"
    << "lime.lambda=" << format_double(lime.ridge) << "\n"
    << "seed=" << seed << "\n"
    << "folds=" << folds << "\n"
    << "quota=" << quota << "\n"
    << "cluster.linkage=" << static_cast<int>(linkage) << "\n";
  for (const auto& m : models) s << "model=" << m.name << "|" << m.oracle << "\n";
  return s.str();
}

std::string RunConfig::hash() const {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical_text());
  return s.str();
}

std::string RunConfig::oracle_spec(const ModelSpec& model, int fold) const {
  std::string spec = model.oracle;
  const std::string token = "{fold}";
  for (auto at = spec.find(token); at != std::string::npos; at = spec.find(token))
    spec.replace(at, token.size(), std::to_string(fold));
  return spec;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const toml::Document doc = toml::parse(buffer.str(), path.string());
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };

  static const std::set<std::string> known_tables = {"canonical", "slic", "lime", "oracle", "masks", "cluster"};
  for (const auto& [name, table] : doc.tables)
    if (!known_tables.count(name)) throw ConfigError(path.string() + ": unknown table [" + name + "]");
  for (const auto& [name, tables] : doc.table_arrays)
    if (name != "model") throw ConfigError(path.string() + ": unknown table array [[" + name + "]]");

  RunConfig c;
  {
    Reader r(doc.root, path.string());
    if (auto v = r.str("input")) c.input_dir = resolve(*v);
    if (auto v = r.str("output")) c.output_dir = resolve(*v);
    if (auto v = r.integer("seed")) {
      if (*v < 0) throw ConfigError("seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(*v);
    }
    if (auto v = r.integer("folds")) c.folds = to_int(*v, "folds");
    if (auto v = r.integer("quota")) c.quota = to_int(*v, "quota");
    if (auto v = r.integer("jobs")) c.jobs = to_int(*v, "jobs");
    r.done();
  }
  auto table = [&](const char* name) -> const toml::Table& {
    static const toml::Table empty;
    const auto it = doc.tables.find(name);
    return it == doc.tables.end() ? empty : it->second;
  };
  {
    Reader r(table("canonical"), "canonical");
    if (auto v = r.integer("width")) c.canonical_width = to_int(*v, "canonical.width");
    if (auto v = r.integer("height")) c.canonical_height = to_int(*v, "canonical.height");
    if (auto v = r.str("layout")) c.layout_path = resolve(*v);
    r.done();
  }
  {
    Reader r(table("slic"), "slic");
    if (auto v = r.integer("k")) c.slic.k_target = to_int(*v, "slic.k");
    if (auto v = r.real("compactness")) c.slic.compactness = *v;
    if (auto v = r.integer("iterations")) c.slic.iterations = to_int(*v, "slic.iterations");
    r.done();
  }
  {
    Reader r(table("lime"), "lime");
    if (auto v = r.integer("samples")) c.lime.n_samples = to_int(*v, "lime.samples");
    if (auto v = r.real("sigma")) c.lime.kernel_width = *v;
    if (auto v = r.real("lambda")) c.lime.ridge = *v;
    r.done();
  }
  {
    Reader r(table("oracle"), "oracle");
    if (auto v = r.integer("pool")) c.pool_size = to_int(*v, "oracle.pool");
    if (auto v = r.integer("timeout_ms")) c.oracle_timeout_ms = to_int(*v, "oracle.timeout_ms");
    r.done();
  }
  {
    Reader r(table("masks"), "masks");
    if (auto v = r.str("au_table")) c.au_table_path = resolve(*v);
    if (auto v = r.str("au_regions")) c.au_regions_path = resolve(*v);
    r.done();
  }
  {
    Reader r(table("cluster"), "cluster");
    if (auto v = r.str("linkage")) {
      const auto l = parse_linkage(*v);
      if (!l) throw ConfigError("cluster.linkage must be single, complete or average");
      c.linkage = *l;
    }
    r.done();
  }
  if (const auto it = doc.table_arrays.find("model"); it != doc.table_arrays.end()) {
    for (const auto& t : it->second) {
      Reader r(t, "model");
      ModelSpec m;
      m.name = r.str("name").value_or("");
      m.oracle = r.str("oracle").value_or("");
      c.models.push_back(std::move(m));
      r.done();
    }
  }
  c.validate();
  return c;
}

void apply_environment(RunConfig& config) {
  const char* env = std::getenv("XFG_SEED");
  if (!env || !*env) return;
  const std::string text(env);
  std::uint64_t seed = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("XFG_SEED must be an unsigned integer, got \"" + text + "\"");
  config.seed = seed;
}

}  // namespace xfg
