#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xfg/image.hpp"

namespace xfg {

/// Symmetric distances with a zero diagonal, row-major.
class DistanceMatrix {
 public:
  DistanceMatrix(std::vector<std::string> labels, std::vector<double> values);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
};

/// d[i][j] = 1 - normalized correlation. Needs >= 2 non-zero heatmaps.
DistanceMatrix distance_matrix(const std::vector<std::string>& labels, const std::vector<GrayImage>& heatmaps,
                               int jobs = 1);

enum class Linkage { single, complete, average };
std::optional<Linkage> parse_linkage(std::string_view text);

/// Node ids: leaves 0..n-1, merge k creates node n+k.
struct Merge {
  int left = 0;
  int right = 0;
  double height = 0.0;
  int size = 0;
};

struct Dendrogram {
  std::vector<std::string> labels;
  std::vector<Merge> merges;

  std::size_t leaf_count() const { return labels.size(); }
  /// Leaf indices under a node.
  std::vector<int> leaves(int node) const;
  /// The two leaf sets joined by the last merge.
  std::pair<std::set<int>, std::set<int>> root_split() const;
  /// Clusters left after undoing every merge above `height`.
  std::set<std::set<std::string>> partition_at(double height) const;

  std::string to_newick() const;
  /// [{"merge":[i,j],"height":h}, ...]
  std::string to_json() const;
};

/// Agglomerative clustering. Closest pair first; exact ties go to the pair
/// whose clusters have the smallest first-leaf indices (label order).
/// Average linkage weights member distances by cluster size (UPGMA).
Dendrogram agglomerate(const DistanceMatrix& d, Linkage linkage = Linkage::average);

}  // namespace xfg
