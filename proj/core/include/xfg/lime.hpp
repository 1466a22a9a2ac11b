#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xfg/expression.hpp"
#include "xfg/image.hpp"
#include "xfg/oracle.hpp"
#include "xfg/slic.hpp"

namespace xfg {

struct LimeParams {
  int n_samples = 1000;
  double kernel_width = 0.25;  // sigma of the exponential kernel over cosine distance
  double ridge = 1.0;          // lambda; the intercept is not penalized
};

using Mask = std::vector<std::uint8_t>;  // one on/off entry per superpixel

struct PerturbationSample {
  Mask z;
  double prob = 0.0;
  double weight = 1.0;
};

struct SurrogateFit {
  std::vector<double> coefficients;
  double intercept = 0.0;
};

struct Explanation {
  std::vector<double> coefficients;
  double intercept = 0.0;
  Expression explained_class = Expression::anger;
  PredictionRecord prediction;  // oracle output on the unperturbed image
  GrayImage relevance;
};

/// Superpixels with z[s] == 0 become black; the rest are copied.
GrayImage perturb(const GrayImage& img, const SuperpixelLabels& labels, std::span<const std::uint8_t> z);

/// First sample all ones; the rest i.i.d. fair bits from a seeded mt19937_64.
std::vector<Mask> sample_perturbations(int superpixels, int n_samples, std::uint64_t seed);

/// exp(-d^2 / sigma^2) with d = 1 - sqrt(k / S) (cosine distance to all-ones).
double kernel_weight(std::span<const std::uint8_t> z, double sigma = 0.25);

/// Minimizes sum_i w_i (p_i - b0 - b.z_i)^2 + ridge * |b|^2 via the
/// (S+1)x(S+1) normal equations (Gaussian elimination, partial pivoting).
SurrogateFit fit_surrogate(std::span<const PerturbationSample> samples, double ridge);

/// clamp(coef, 0, inf) / max positive coefficient, painted per superpixel.
GrayImage relevance_image(const SuperpixelLabels& labels, std::span<const double> coefficients);

/// Explains the class the oracle predicts for `img`.
Explanation explain(const GrayImage& img, Oracle& oracle, const SuperpixelLabels& labels,
                    std::uint64_t seed, const LimeParams& params = {});

}  // namespace xfg
