#include "xfg/lime.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace xfg {

GrayImage perturb(const GrayImage& img, const SuperpixelLabels& labels, std::span<const std::uint8_t> z) {
  require_same_shape(img, labels.labels, "perturb");
  if (z.size() != static_cast<std::size_t>(labels.region_count))
    throw Error("perturb: mask length " + std::to_string(z.size()) + " != region count " +
                std::to_string(labels.region_count));
  GrayImage out(img.width(), img.height());
  const auto src = img.pixels();
  const auto lab = labels.labels.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = z[lab[i]] ? src[i] : 0.0;
  return out;
}

std::vector<Mask> sample_perturbations(int superpixels, int n_samples, std::uint64_t seed) {
  if (superpixels < 1) throw Error("sample_perturbations: need at least one superpixel");
  if (n_samples < 1) throw Error("sample_perturbations: need at least one sample");
  std::mt19937_64 rng(seed);
  std::vector<Mask> out;
  out.reserve(n_samples);
  out.emplace_back(superpixels, 1);
  for (int i = 1; i < n_samples; ++i) {
    Mask z(superpixels);
    std::uint64_t bits = 0;
    for (int s = 0; s < superpixels; ++s) {
      if (s % 64 == 0) bits = rng();
      z[s] = static_cast<std::uint8_t>(bits & 1u);
      bits >>= 1;
    }
    out.push_back(std::move(z));
  }
  return out;
}

double kernel_weight(std::span<const std::uint8_t> z, double sigma) {
  if (z.empty()) throw Error("kernel_weight: empty mask");
  const auto ones = std::count_if(z.begin(), z.end(), [](std::uint8_t v) { return v != 0; });
  const double d = 1.0 - std::sqrt(static_cast<double>(ones) / static_cast<double>(z.size()));
  return std::exp(-(d * d) / (sigma * sigma));
}

SurrogateFit fit_surrogate(std::span<const PerturbationSample> samples, double ridge) {
  if (samples.empty()) throw Error("fit_surrogate: no samples");
  if (ridge < 0) throw Error("fit_surrogate: ridge must be non-negative");
  const std::size_t s = samples.front().z.size();
  const std::size_t dim = s + 1;
  if (samples.size() < dim) throw Error("fit_surrogate: need at least S+1 samples");

  // Row-major augmented system [A | b], feature 0 is the intercept. Targets
  // are shifted by the first sample so a constant target solves to exact zeros.
  const double shift = samples.front().prob;
  std::vector<double> a(dim * (dim + 1), 0.0);
  auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * (dim + 1) + c]; };
  std::vector<double> x(dim);
  for (const auto& smp : samples) {
    if (smp.z.size() != s) throw Error("fit_surrogate: inconsistent mask lengths");
    if (!(smp.weight > 0)) throw Error("fit_surrogate: weights must be positive");
    x[0] = 1.0;
    for (std::size_t j = 0; j < s; ++j) x[j + 1] = smp.z[j] ? 1.0 : 0.0;
    for (std::size_t r = 0; r < dim; ++r) {
      if (x[r] == 0.0) continue;
      const double wx = smp.weight * x[r];
      for (std::size_t c = 0; c < dim; ++c)
        if (x[c] != 0.0) at(r, c) += wx * x[c];
      at(r, dim) += wx * (smp.prob - shift);
    }
  }
  for (std::size_t j = 1; j < dim; ++j) at(j, j) += ridge;

  double scale = 0.0;
  for (std::size_t r = 0; r < dim; ++r) scale = std::max(scale, std::abs(at(r, r)));
  const double tiny = 1e-12 * std::max(scale, 1e-300);
  for (std::size_t col = 0; col < dim; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < dim; ++r)
      if (std::abs(at(r, col)) > std::abs(at(pivot, col))) pivot = r;
    if (std::abs(at(pivot, col)) <= tiny) throw Error("fit_surrogate: singular normal equations");
    if (pivot != col)
      for (std::size_t c = col; c <= dim; ++c) std::swap(at(col, c), at(pivot, c));
    for (std::size_t r = col + 1; r < dim; ++r) {
      const double f = at(r, col) / at(col, col);
      if (f == 0.0) continue;
      for (std::size_t c = col; c <= dim; ++c) at(r, c) -= f * at(col, c);
    }
  }
  std::vector<double> beta(dim);
  for (std::size_t r = dim; r-- > 0;) {
    double v = at(r, dim);
    for (std::size_t c = r + 1; c < dim; ++c) v -= at(r, c) * beta[c];
    beta[r] = v / at(r, r);
  }
  return {std::vector<double>(beta.begin() + 1, beta.end()), beta[0] + shift};
}

GrayImage relevance_image(const SuperpixelLabels& labels, std::span<const double> coefficients) {
  if (coefficients.size() != static_cast<std::size_t>(labels.region_count))
    throw Error("relevance_image: coefficient count != region count");
  double top = 0.0;
  for (double c : coefficients) top = std::max(top, c);
  GrayImage out(labels.labels.width(), labels.labels.height(), 0.0);
  if (!(top > 0.0)) return out;
  std::vector<double> level(coefficients.size());
  for (std::size_t s = 0; s < level.size(); ++s) level[s] = std::max(coefficients[s], 0.0) / top;
  const auto lab = labels.labels.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = level[lab[i]];
  return out;
}

Explanation explain(const GrayImage& img, Oracle& oracle, const SuperpixelLabels& labels,
                    std::uint64_t seed, const LimeParams& params) {
  require_same_shape(img, labels.labels, "explain");
  Explanation ex;
  ex.prediction = oracle.classify(img);
  ex.explained_class = ex.prediction.predicted;
  const int cls = index_of(ex.explained_class);

  const auto masks = sample_perturbations(labels.region_count, params.n_samples, seed);
  std::vector<PerturbationSample> samples;
  samples.reserve(masks.size());
  for (const auto& z : masks) {
    PerturbationSample smp;
    smp.weight = kernel_weight(z, params.kernel_width);
    const bool all_on = std::all_of(z.begin(), z.end(), [](std::uint8_t v) { return v != 0; });
    smp.prob = all_on ? ex.prediction.probs[cls] : oracle.classify(perturb(img, labels, z)).probs[cls];
    smp.z = z;
    samples.push_back(std::move(smp));
  }
  auto fit = fit_surrogate(samples, params.ridge);
  ex.coefficients = std::move(fit.coefficients);
  ex.intercept = fit.intercept;
  ex.relevance = relevance_image(labels, ex.coefficients);
  return ex;
}

}  // namespace xfg
