#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xfg/image.hpp"

namespace xfg {

/// 8-bit histogram, bin = round(clamp(v, 0, 1) * 255).
std::array<std::uint64_t, 256> histogram256(const GrayImage& img);

/// Otsu's threshold. Picks the bin t that maximizes the between-class
/// variance (class 0 = bins <= t, lowest t on ties) and returns the bin's
/// upper edge (t + 0.5) / 255, clamped to 1. When no split separates
/// anything (a single occupied bin) the upper edge of that bin is returned,
/// so binarize() yields an empty mask.
double otsu_threshold(const GrayImage& img);
/// Bin index behind otsu_threshold().
int otsu_bin(const std::array<std::uint64_t, 256>& hist);

/// pixel > threshold.
BinaryMask binarize(const GrayImage& img, double threshold);
BinaryMask binarize_otsu(const GrayImage& img);

/// Undefined values (empty denominators) are nullopt, never 0 or 1.
struct MetricsRecord {
  std::optional<double> iou;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;  // 0 when precision + recall == 0
  std::uint64_t intersection = 0, union_ = 0, gt_count = 0, pred_count = 0;
};

/// Ground truth first, prediction second.
MetricsRecord compare(const BinaryMask& ground_truth, const BinaryMask& predicted);

/// <H1,H2> / sqrt(<H1,H1><H2,H2>); nullopt if either image is all zero.
std::optional<double> normalized_correlation(const GrayImage& a, const GrayImage& b);
/// 1 - normalized_correlation.
std::optional<double> correlation_distance(const GrayImage& a, const GrayImage& b);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct MetricsRow {
  std::string model;
  std::string expression;
  MetricsRecord metrics;
};

/// CSV with columns model,expression,iou,precision,recall,f1. Per-model
/// "average" rows and per-expression rows with model "average" are appended;
/// undefined cells are written as NA and skipped in averages.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

}  // namespace xfg
