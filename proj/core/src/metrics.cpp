#include "xfg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace xfg {

__extension__ using Wide = __int128;

std::array<std::uint64_t, 256> histogram256(const GrayImage& img) {
  std::array<std::uint64_t, 256> h{};
  for (double v : img.pixels()) ++h[static_cast<std::size_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))];
  return h;
}

int otsu_bin(const std::array<std::uint64_t, 256>& hist) {
  std::uint64_t n = 0, total_sum = 0;
  for (int b = 0; b < 256; ++b) {
    n += hist[b];
    total_sum += hist[b] * static_cast<std::uint64_t>(b);
  }
  if (n == 0) throw Error("otsu: empty image");
  // sigma_B^2(t) * N^2 = (N*S0 - n0*S)^2 / (n0 * n1), integers until the division.
  int best = -1;
  long double best_var = 0.0L;
  std::uint64_t n0 = 0, s0 = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += hist[t];
    s0 += hist[t] * static_cast<std::uint64_t>(t);
    const std::uint64_t n1 = n - n0;
    if (n0 == 0 || n1 == 0) continue;
    const Wide diff = static_cast<Wide>(n) * s0 - static_cast<Wide>(n0) * total_sum;
    const long double num = static_cast<long double>(diff) * static_cast<long double>(diff);
    const long double var = num / (static_cast<long double>(n0) * static_cast<long double>(n1));
    if (var > best_var) {
      best_var = var;
      best = t;
    }
  }
  if (best < 0) {
    // Single occupied bin: threshold at its upper edge.
    for (int b = 255; b >= 0; --b)
      if (hist[b]) return b;
  }
  return best;
}

double otsu_threshold(const GrayImage& img) {
  if (img.empty()) throw Error("otsu: empty image");
  const int t = otsu_bin(histogram256(img));
  return std::min(1.0, (t + 0.5) / 255.0);
}

BinaryMask binarize(const GrayImage& img, double threshold) {
  BinaryMask m(img.width(), img.height());
  std::transform(img.pixels().begin(), img.pixels().end(), m.pixels().begin(),
                 [threshold](double v) -> std::uint8_t { return v > threshold ? 1 : 0; });
  return m;
}

BinaryMask binarize_otsu(const GrayImage& img) { return binarize(img, otsu_threshold(img)); }

MetricsRecord compare(const BinaryMask& gt, const BinaryMask& pred) {
  require_same_shape(gt, pred, "compare");
  MetricsRecord r;
  const auto g = gt.pixels(), p = pred.pixels();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool a = g[i] != 0, b = p[i] != 0;
    r.intersection += (a && b);
    r.union_ += (a || b);
    r.gt_count += a;
    r.pred_count += b;
  }
  const auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.iou = ratio(r.intersection, r.union_);
  r.precision = ratio(r.intersection, r.pred_count);
  r.recall = ratio(r.intersection, r.gt_count);
  if (r.precision && r.recall) {
    const double s = *r.precision + *r.recall;
    r.f1 = s > 0 ? 2.0 * *r.precision * *r.recall / s : 0.0;
  }
  return r;
}

std::optional<double> normalized_correlation(const GrayImage& a, const GrayImage& b) {
  require_same_shape(a, b, "normalized_correlation");
  long double ab = 0, aa = 0, bb = 0;
  const auto x = a.pixels(), y = b.pixels();
  for (std::size_t i = 0; i < x.size(); ++i) {
    ab += static_cast<long double>(x[i]) * y[i];
    aa += static_cast<long double>(x[i]) * x[i];
    bb += static_cast<long double>(y[i]) * y[i];
  }
  if (aa == 0 || bb == 0) return std::nullopt;
  const long double c = ab / std::sqrt(aa * bb);
  return static_cast<double>(std::clamp(c, -1.0L, 1.0L));
}

std::optional<double> correlation_distance(const GrayImage& a, const GrayImage& b) {
  const auto c = normalized_correlation(a, b);
  if (!c) return std::nullopt;
  return 1.0 - *c;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("pearson: need two equal-length samples");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw Error("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

namespace {

struct Accum {
  double sum[4] = {0, 0, 0, 0};
  int count[4] = {0, 0, 0, 0};
  void add(const MetricsRecord& m) {
    const std::optional<double> v[4] = {m.iou, m.precision, m.recall, m.f1};
    for (int k = 0; k < 4; ++k)
      if (v[k]) sum[k] += *v[k], ++count[k];
  }
};

std::string cell(std::optional<double> v) {
  if (!v) return "NA";
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << *v;
  return s.str();
}

std::string cell(const Accum& a, int k) {
  return a.count[k] ? cell(a.sum[k] / a.count[k]) : "NA";
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "model,expression,iou,precision,recall,f1\n";
  std::vector<std::string> model_order, expr_order;
  std::map<std::string, Accum> by_model, by_expr;
  Accum overall;
  for (const auto& r : rows) {
    out << r.model << "," << r.expression << "," << cell(r.metrics.iou) << "," << cell(r.metrics.precision)
        << "," << cell(r.metrics.recall) << "," << cell(r.metrics.f1) << "\n";
    if (!by_model.count(r.model)) model_order.push_back(r.model);
    if (!by_expr.count(r.expression)) expr_order.push_back(r.expression);
    by_model[r.model].add(r.metrics);
    by_expr[r.expression].add(r.metrics);
    overall.add(r.metrics);
  }
  auto emit = [&](const std::string& model, const std::string& expr, const Accum& a) {
    out << model << "," << expr << "," << cell(a, 0) << "," << cell(a, 1) << "," << cell(a, 2) << ","
        << cell(a, 3) << "\n";
  };
  for (const auto& m : model_order) emit(m, "average", by_model[m]);
  for (const auto& e : expr_order) emit("average", e, by_expr[e]);
  if (!rows.empty()) emit("average", "average", overall);
}

}  // namespace xfg
