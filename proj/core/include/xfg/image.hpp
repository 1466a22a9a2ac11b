#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xfg {

/// Base class for every error the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major single-channel image.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw Error("negative image dimensions");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  T& operator()(int x, int y) { return pixels_[index(x, y)]; }
  const T& operator()(int x, int y) const { return pixels_[index(x, y)]; }

  std::span<T> pixels() { return pixels_; }
  std::span<const T> pixels() const { return pixels_; }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  template <typename U>
  bool same_shape(const Image<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> pixels_;
};

/// Grayscale intensities or relevance values, nominally in [0,1].
using GrayImage = Image<double>;
/// {0,1} mask.
using BinaryMask = Image<std::uint8_t>;
using LabelImage = Image<int>;

template <typename A, typename B>
void require_same_shape(const Image<A>& a, const Image<B>& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(std::string(what) + ": dimension mismatch (" +
                std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                " vs " + std::to_string(b.width()) + "x" +
                std::to_string(b.height()) + ")");
  }
}

// ---------------------------------------------------------------------------
// PGM / PNG I/O
//
// Relevance images and heatmaps are stored as 16-bit binary PGM, value
// round(v * 65535). Masks are 8-bit PGM with 0/255. Input face images may be
// 8- or 16-bit PGM or 8-bit grayscale/RGB PNG; they are normalized to [0,1].
// ---------------------------------------------------------------------------

GrayImage read_gray(const std::filesystem::path& path);

void write_pgm16(const std::filesystem::path& path, const GrayImage& img);
void write_pgm8(const std::filesystem::path& path, const GrayImage& img);
void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask);
/// Label map as 16-bit PGM (raw label ids, debug output).
void write_labels_pgm(const std::filesystem::path& path, const LabelImage& labels);

BinaryMask read_mask_pgm(const std::filesystem::path& path);

/// Quantize like write_pgm16 does, without touching disk.
GrayImage quantize16(const GrayImage& img);

struct Rgb {
  std::uint8_t r, g, b;
  bool operator==(const Rgb&) const = default;
};
using RgbImage = Image<Rgb>;

void write_png(const std::filesystem::path& path, const RgbImage& img);

/// Jet-style colormap for v in [0,1] (blue -> cyan -> yellow -> red).
Rgb jet(double v);
RgbImage render_jet(const GrayImage& heat);
/// Gray background with the mask blended in red.
RgbImage render_overlay(const GrayImage& background, const BinaryMask& mask);

}  // namespace xfg
