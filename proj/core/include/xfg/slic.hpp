#pragma once

#include "xfg/image.hpp"

namespace xfg {

struct SlicParams {
  int k_target = 30;
  double compactness = 10.0;
  int iterations = 10;
};

struct SuperpixelLabels {
  LabelImage labels;
  int region_count = 0;
};

/// Grayscale SLIC.
///
/// Centers start on a regular grid of roughly k_target cells (columns chosen
/// first, so k=2 splits left/right). Each iteration assigns every pixel in a
/// center's search window to the nearest center under
///   D^2 = (100 * dI)^2 + (d_xy / S)^2 * compactness^2,   S = sqrt(N / k),
/// then moves centers to their members' means. Afterwards each label keeps
/// its largest 4-connected piece; stray pieces and pieces smaller than
/// N / (4k) are merged into the largest adjacent region. Labels are
/// renumbered 0..R-1 in raster order of first appearance.
SuperpixelLabels slic(const GrayImage& img, const SlicParams& params = {});

/// Pixel counts per label.
std::vector<int> region_sizes(const SuperpixelLabels& sp);

}  // namespace xfg
