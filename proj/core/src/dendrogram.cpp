#include "xfg/dendrogram.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "xfg/metrics.hpp"
#include "xfg/parallel.hpp"

namespace xfg {

DistanceMatrix::DistanceMatrix(std::vector<std::string> labels, std::vector<double> values)
    : labels_(std::move(labels)), values_(std::move(values)) {
  const std::size_t n = labels_.size();
  if (values_.size() != n * n) throw Error("distance matrix: size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (values_[i * n + i] != 0.0) throw Error("distance matrix: non-zero diagonal");
    for (std::size_t j = 0; j < n; ++j) {
      const double v = values_[i * n + j];
      if (std::isnan(v)) throw Error("distance matrix: NaN distance");
      if (std::abs(v - values_[j * n + i]) > 1e-12) throw Error("distance matrix: not symmetric");
    }
  }
}

DistanceMatrix distance_matrix(const std::vector<std::string>& labels, const std::vector<GrayImage>& heatmaps,
                               int jobs) {
  const std::size_t n = heatmaps.size();
  if (n < 2) throw Error("distance_matrix: need at least two heatmaps");
  if (labels.size() != n) throw Error("distance_matrix: label count mismatch");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> values(n * n, 0.0);
  parallel_for(pairs.size(), jobs, [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    const auto d = correlation_distance(heatmaps[i], heatmaps[j]);
    if (!d) {
      const std::size_t zero = normalized_correlation(heatmaps[i], heatmaps[i]) ? j : i;
      throw Error("distance_matrix: heatmap \"" + labels[zero] + "\" is all zero");
    }
    values[i * n + j] = values[j * n + i] = *d;
  });
  return DistanceMatrix(labels, std::move(values));
}

std::optional<Linkage> parse_linkage(std::string_view text) {
  if (text == "single") return Linkage::single;
  if (text == "complete") return Linkage::complete;
  if (text == "average" || text == "upgma") return Linkage::average;
  return std::nullopt;
}

Dendrogram agglomerate(const DistanceMatrix& d, Linkage linkage) {
  const int n = static_cast<int>(d.size());
  if (n < 1) throw Error("agglomerate: empty matrix");
  Dendrogram tree;
  tree.labels = d.labels();

  struct Cluster {
    int node;
    int first_leaf;
    int size;
  };
  std::vector<Cluster> active;
  for (int i = 0; i < n; ++i) active.push_back({i, i, 1});
  // dist[a][b] between active slots, kept in slot order (sorted by first leaf).
  std::vector<std::vector<double>> dist(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) dist[i][j] = d(i, j);

  while (active.size() > 1) {
    std::size_t ba = 0, bb = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        if (dist[a][b] < best) {
          best = dist[a][b];
          ba = a;
          bb = b;
        }
      }
    }
    const Cluster ca = active[ba], cb = active[bb];
    const int node = n + static_cast<int>(tree.merges.size());
    tree.merges.push_back({ca.node, cb.node, best, ca.size + cb.size});

    std::vector<double> merged(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (k == ba || k == bb) continue;
      switch (linkage) {
        case Linkage::single: merged[k] = std::min(dist[ba][k], dist[bb][k]); break;
        case Linkage::complete: merged[k] = std::max(dist[ba][k], dist[bb][k]); break;
        case Linkage::average:
          merged[k] = (ca.size * dist[ba][k] + cb.size * dist[bb][k]) / (ca.size + cb.size);
          break;
      }
    }
    // Merged cluster takes slot ba (it keeps ca's first leaf, the smaller one).
    active[ba] = {node, ca.first_leaf, ca.size + cb.size};
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (k == ba || k == bb) continue;
      dist[ba][k] = dist[k][ba] = merged[k];
    }
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bb));
    dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(bb));
    for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  return tree;
}

std::vector<int> Dendrogram::leaves(int node) const {
  const int n = static_cast<int>(leaf_count());
  if (node < n) return {node};
  const Merge& m = merges.at(node - n);
  auto l = leaves(m.left);
  const auto r = leaves(m.right);
  l.insert(l.end(), r.begin(), r.end());
  return l;
}

std::pair<std::set<int>, std::set<int>> Dendrogram::root_split() const {
  if (merges.empty()) throw Error("dendrogram has no merges");
  const auto& root = merges.back();
  const auto l = leaves(root.left), r = leaves(root.right);
  return {std::set<int>(l.begin(), l.end()), std::set<int>(r.begin(), r.end())};
}

std::set<std::set<std::string>> Dendrogram::partition_at(double height) const {
  const int n = static_cast<int>(leaf_count());
  std::vector<int> parent(n + merges.size(), -1);
  for (std::size_t k = 0; k < merges.size(); ++k) {
    if (merges[k].height > height) continue;
    parent[merges[k].left] = n + static_cast<int>(k);
    parent[merges[k].right] = n + static_cast<int>(k);
  }
  std::map<int, std::set<std::string>> groups;
  for (int leaf = 0; leaf < n; ++leaf) {
    int top = leaf;
    while (parent[top] >= 0) top = parent[top];
    groups[top].insert(labels[leaf]);
  }
  std::set<std::set<std::string>> out;
  for (auto& [root, members] : groups) out.insert(std::move(members));
  return out;
}

std::string Dendrogram::to_newick() const {
  const int n = static_cast<int>(leaf_count());
  auto quote = [](const std::string& s) {
    if (s.find_first_of(" ,;:()[]'") == std::string::npos) return s;
    std::string q = "'";
    for (char c : s) q += (c == '\'') ? std::string("''") : std::string(1, c);
    return q + "'";
  };
  auto height_of = [&](int node) { return node < n ? 0.0 : merges[node - n].height; };
  std::ostringstream out;
  out.precision(10);
  std::function<void(int)> emit = [&](int node) {
    if (node < n) {
      out << quote(labels[node]);
      return;
    }
    const Merge& m = merges[node - n];
    out << "(";
    emit(m.left);
    out << ":" << (m.height - height_of(m.left)) << ",";
    emit(m.right);
    out << ":" << (m.height - height_of(m.right)) << ")";
  };
  if (n == 1) {
    out << quote(labels[0]);
  } else {
    emit(n + static_cast<int>(merges.size()) - 1);
  }
  out << ";";
  return out.str();
}

std::string Dendrogram::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& m : merges) j.push_back({{"merge", {m.left, m.right}}, {"height", m.height}});
  return j.dump(2);
}

}  // namespace xfg
