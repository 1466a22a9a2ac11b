#include <random>
#include <string>
#include <vector>

#include "benchmark/benchmark.h"
#include "xfg/dendrogram.hpp"
#include "xfg/landmarks.hpp"
#include "xfg/lime.hpp"
#include "xfg/metrics.hpp"
#include "xfg/slic.hpp"
#include "xfg/synth.hpp"
#include "xfg/warp.hpp"

namespace {

using namespace xfg;

GrayImage noise_image(int w, int h, std::uint64_t seed) {
  GrayImage img(w, h);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

void BM_warp_to_standard(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const StandardLayout layout = default_layout(size, size);
  const SyntheticFace face = make_synthetic_face(layout, Expression::fear, 3);
  const LandmarkSet src = augment_landmarks(LandmarkSet(face.landmarks, LandmarkKind::raw68, size, size));
  const Triangulation tri = layout_triangulation(layout);
  const PiecewiseAffineMap map = fit_piecewise_affine(src, layout, tri);
  const TriangleLookup lookup(layout.points, tri, size, size);
  for (auto _ : state) benchmark::DoNotOptimize(warp_to_standard(face.image, src, map, lookup));
  state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_warp_to_standard)->Arg(128)->Arg(224);

void BM_slic(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const GrayImage img = render_canonical_face(default_layout(size, size), Expression::happiness, 5);
  for (auto _ : state) benchmark::DoNotOptimize(slic(img));
  state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_slic)->Arg(128)->Arg(224);

void BM_fit_surrogate(benchmark::State& state) {
  const int superpixels = static_cast<int>(state.range(0));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PerturbationSample> samples;
  for (auto& z : sample_perturbations(superpixels, 1000, 11))
    samples.push_back({z, u(rng), kernel_weight(z)});
  for (auto _ : state) benchmark::DoNotOptimize(fit_surrogate(samples, 1.0));
}
BENCHMARK(BM_fit_surrogate)->Arg(30)->Arg(60)->Arg(120);

void BM_agglomerate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<std::string> labels;
  std::vector<GrayImage> heats;
  for (int i = 0; i < n; ++i) {
    labels.push_back("m" + std::to_string(i));
    heats.push_back(noise_image(64, 64, i + 1));
  }
  const DistanceMatrix d = distance_matrix(labels, heats);
  for (auto _ : state) benchmark::DoNotOptimize(agglomerate(d, Linkage::average));
}
BENCHMARK(BM_agglomerate)->Arg(12)->Arg(60)->Arg(240);

void BM_binarize_otsu(benchmark::State& state) {
  const GrayImage img = noise_image(224, 224, 9);
  for (auto _ : state) benchmark::DoNotOptimize(binarize_otsu(img));
}
BENCHMARK(BM_binarize_otsu);

}  // namespace

BENCHMARK_MAIN();
