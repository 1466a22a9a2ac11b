#include "xfg/slic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace xfg {
namespace {

constexpr double kIntensityScale = 100.0;

struct Center {
  double x, y, intensity;
};

// 4-connected components of equal label. Returns component id per pixel,
// numbered in raster order of first pixel.
std::vector<int> components(const LabelImage& labels, std::vector<int>& comp_label,
                            std::vector<int>& comp_size) {
  const int w = labels.width(), h = labels.height();
  std::vector<int> comp(labels.size(), -1);
  std::vector<int> stack;
  comp_label.clear();
  comp_size.clear();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t start = static_cast<std::size_t>(y) * w + x;
      if (comp[start] >= 0) continue;
      const int id = static_cast<int>(comp_label.size());
      const int lab = labels(x, y);
      comp_label.push_back(lab);
      comp_size.push_back(0);
      comp[start] = id;
      stack.assign(1, static_cast<int>(start));
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        ++comp_size[id];
        const int px = p % w, py = p / w;
        const int nbr[4][2] = {{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}};
        for (const auto& q : nbr) {
          if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
          const std::size_t qi = static_cast<std::size_t>(q[1]) * w + q[0];
          if (comp[qi] < 0 && labels(q[0], q[1]) == lab) {
            comp[qi] = id;
            stack.push_back(static_cast<int>(qi));
          }
        }
      }
    }
  }
  return comp;
}

LabelImage enforce_connectivity(const LabelImage& labels, int k_target) {
  const int w = labels.width(), h = labels.height();
  std::vector<int> comp_label, comp_size;
  const std::vector<int> comp = components(labels, comp_label, comp_size);
  const int ncomp = static_cast<int>(comp_size.size());
  const long long n = static_cast<long long>(w) * h;
  const int min_size = static_cast<int>(std::max<long long>(1, n / (4LL * k_target)));

  // owner[c] == c for kept components, -1 for unresolved orphans.
  std::vector<int> owner(ncomp, -1);
  {
    std::vector<int> best(*std::max_element(comp_label.begin(), comp_label.end()) + 1, -1);
    for (int c = 0; c < ncomp; ++c) {
      int& b = best[comp_label[c]];
      if (b < 0 || comp_size[c] > comp_size[b]) b = c;
    }
    for (int b : best)
      if (b >= 0 && comp_size[b] >= min_size) owner[b] = b;
    if (std::none_of(owner.begin(), owner.end(), [](int o) { return o >= 0; })) {
      const int largest = static_cast<int>(std::max_element(comp_size.begin(), comp_size.end()) - comp_size.begin());
      owner[largest] = largest;
    }
  }
  std::vector<long long> kept_size(comp_size.begin(), comp_size.end());

  for (;;) {
    std::vector<std::set<int>> adjacent(ncomp);
    bool any_orphan = false;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int a = comp[static_cast<std::size_t>(y) * w + x];
        auto link = [&](int b) {
          if (a == b) return;
          if (owner[a] < 0 && owner[b] >= 0) adjacent[a].insert(owner[b]);
          if (owner[b] < 0 && owner[a] >= 0) adjacent[b].insert(owner[a]);
        };
        if (x + 1 < w) link(comp[static_cast<std::size_t>(y) * w + x + 1]);
        if (y + 1 < h) link(comp[static_cast<std::size_t>(y + 1) * w + x]);
        if (owner[a] < 0) any_orphan = true;
      }
    }
    if (!any_orphan) break;
    bool progressed = false;
    for (int c = 0; c < ncomp; ++c) {
      if (owner[c] >= 0 || adjacent[c].empty()) continue;
      int target = -1;
      for (int k : adjacent[c])
        if (target < 0 || kept_size[k] > kept_size[target]) target = k;
      owner[c] = target;
      kept_size[target] += comp_size[c];
      progressed = true;
    }
    if (!progressed) throw Error("slic: connectivity enforcement stalled");
  }

  std::vector<int> final_id(ncomp, -1);
  int next = 0;
  LabelImage out(w, h);
  for (std::size_t i = 0; i < comp.size(); ++i) {
    const int root = owner[comp[i]];
    if (final_id[root] < 0) final_id[root] = next++;
    out.pixels()[i] = final_id[root];
  }
  return out;
}

}  // namespace

SuperpixelLabels slic(const GrayImage& img, const SlicParams& params) {
  const int w = img.width(), h = img.height();
  if (w <= 0 || h <= 0) throw Error("slic: empty image");
  const long long n = static_cast<long long>(w) * h;
  if (params.k_target < 1) throw Error("slic: k_target must be positive");
  if (params.k_target > n) throw Error("slic: k_target exceeds pixel count");
  if (!(params.compactness > 0)) throw Error("slic: compactness must be positive");
  if (params.iterations < 1) throw Error("slic: iterations must be positive");

  const int k = params.k_target;
  const int cols = std::clamp(static_cast<int>(std::ceil(std::sqrt(double(k) * w / h) - 1e-9)), 1, w);
  const int rows = std::clamp(static_cast<int>(std::lround(double(k) / cols)), 1, h);
  const double cell_w = double(w) / cols, cell_h = double(h) / rows;
  const double spacing = std::sqrt(double(n) / k);
  const int radius = static_cast<int>(std::ceil(std::max(cell_w, cell_h)));
  const double spatial_weight = (params.compactness / spacing) * (params.compactness / spacing);

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double cx = (c + 0.5) * cell_w, cy = (r + 0.5) * cell_h;
      const int px = std::min(w - 1, static_cast<int>(cx));
      const int py = std::min(h - 1, static_cast<int>(cy));
      centers.push_back({cx, cy, img(px, py)});
    }
  }

  LabelImage labels(w, h, -1);
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (int it = 0; it < params.iterations; ++it) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      const Center& c = centers[ci];
      const int x0 = std::max(0, static_cast<int>(c.x) - radius);
      const int x1 = std::min(w - 1, static_cast<int>(c.x) + radius);
      const int y0 = std::max(0, static_cast<int>(c.y) - radius);
      const int y1 = std::min(h - 1, static_cast<int>(c.y) + radius);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double di = (img(x, y) - c.intensity) * kIntensityScale;
          const double dx = x - c.x, dy = y - c.y;
          const double d = di * di + (dx * dx + dy * dy) * spatial_weight;
          double& best = dist[static_cast<std::size_t>(y) * w + x];
          if (d < best) {
            best = d;
            labels(x, y) = static_cast<int>(ci);
          }
        }
      }
    }
    std::vector<double> sx(centers.size()), sy(centers.size()), si(centers.size());
    std::vector<long long> count(centers.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int l = labels(x, y);
        sx[l] += x;
        sy[l] += y;
        si[l] += img(x, y);
        ++count[l];
      }
    }
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      if (count[ci] == 0) continue;
      centers[ci] = {sx[ci] / count[ci], sy[ci] / count[ci], si[ci] / count[ci]};
    }
  }

  SuperpixelLabels out;
  out.labels = enforce_connectivity(labels, k);
  out.region_count = 1 + *std::max_element(out.labels.pixels().begin(), out.labels.pixels().end());
  return out;
}

std::vector<int> region_sizes(const SuperpixelLabels& sp) {
  std::vector<int> sizes(sp.region_count, 0);
  for (int l : sp.labels.pixels()) ++sizes[l];
  return sizes;
}

}  // namespace xfg
