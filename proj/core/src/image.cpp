#include "xfg/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace xfg {
namespace {

std::uint16_t to_u16(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Skips whitespace and '#' comments between PGM header tokens.
int read_header_int(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  if (!(in >> v)) throw Error("malformed PGM header");
  return v;
}

struct RawPgm {
  int width = 0, height = 0, maxval = 0;
  std::vector<std::uint16_t> values;
};

RawPgm read_pgm_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw Error(path.string() + ": not a binary PGM (P5)");
  RawPgm pgm;
  pgm.width = read_header_int(in);
  pgm.height = read_header_int(in);
  pgm.maxval = read_header_int(in);
  if (pgm.width <= 0 || pgm.height <= 0 || pgm.maxval <= 0 || pgm.maxval > 65535)
    throw Error(path.string() + ": invalid PGM header");
  in.get();  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(pgm.width) * pgm.height;
  pgm.values.resize(n);
  if (pgm.maxval < 256) {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!in) throw Error(path.string() + ": truncated PGM data");
    std::copy(buf.begin(), buf.end(), pgm.values.begin());
  } else {
    std::vector<unsigned char> buf(2 * n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
    if (!in) throw Error(path.string() + ": truncated PGM data");
    for (std::size_t i = 0; i < n; ++i)
      pgm.values[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  return pgm;
}

void write_pgm_raw(const std::filesystem::path& path, int w, int h, int maxval,
                   const std::vector<std::uint16_t>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << w << " " << h << "\n" << maxval << "\n";
  if (maxval < 256) {
    std::vector<unsigned char> buf(values.begin(), values.end());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  } else {
    std::vector<unsigned char> buf(values.size() * 2);
    for (std::size_t i = 0; i < values.size(); ++i) {
      buf[2 * i] = static_cast<unsigned char>(values[i] >> 8);
      buf[2 * i + 1] = static_cast<unsigned char>(values[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw Error("write failed: " + path.string());
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

GrayImage read_png_gray(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw Error("libpng init failed");
  GrayImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(path.string() + ": PNG decode error");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  const auto color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> data(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = data.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  img = GrayImage(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(x, y) = rows[y][x] / 255.0;
  return img;
}

}  // namespace

GrayImage read_gray(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".png") return read_png_gray(path);
  RawPgm pgm = read_pgm_raw(path);
  GrayImage img(pgm.width, pgm.height);
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<double>(pgm.values[i]) / pgm.maxval;
  return img;
}

void write_pgm16(const std::filesystem::path& path, const GrayImage& img) {
  std::vector<std::uint16_t> v(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), v.begin(), to_u16);
  write_pgm_raw(path, img.width(), img.height(), 65535, v);
}

void write_pgm8(const std::filesystem::path& path, const GrayImage& img) {
  std::vector<std::uint16_t> v(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), v.begin(), to_u8);
  write_pgm_raw(path, img.width(), img.height(), 255, v);
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint16_t> v(mask.size());
  std::transform(mask.pixels().begin(), mask.pixels().end(), v.begin(),
                 [](std::uint8_t m) -> std::uint16_t { return m ? 255 : 0; });
  write_pgm_raw(path, mask.width(), mask.height(), 255, v);
}

void write_labels_pgm(const std::filesystem::path& path, const LabelImage& labels) {
  std::vector<std::uint16_t> v(labels.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const int l = labels.pixels()[i];
    if (l < 0 || l > 65535) throw Error("label out of 16-bit range");
    v[i] = static_cast<std::uint16_t>(l);
  }
  write_pgm_raw(path, labels.width(), labels.height(), 65535, v);
}

BinaryMask read_mask_pgm(const std::filesystem::path& path) {
  RawPgm pgm = read_pgm_raw(path);
  BinaryMask mask(pgm.width, pgm.height);
  auto px = mask.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = pgm.values[i] > pgm.maxval / 2 ? 1 : 0;
  return mask;
}

GrayImage quantize16(const GrayImage& img) {
  GrayImage q(img.width(), img.height());
  std::transform(img.pixels().begin(), img.pixels().end(), q.pixels().begin(),
                 [](double v) { return to_u16(v) / 65535.0; });
  return q;
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw Error("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(path.string() + ": PNG encode error");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width()) * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Rgb c = img(x, y);
      row[3 * x] = c.r;
      row[3 * x + 1] = c.g;
      row[3 * x + 2] = c.b;
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Rgb jet(double v) {
  v = std::clamp(v, 0.0, 1.0);
  auto channel = [](double t) {
    return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(1.5 - std::abs(t), 0.0, 1.0)));
  };
  const double t = 4.0 * v - 2.0;
  return {channel(t - 1.0), channel(t), channel(t + 1.0)};
}

RgbImage render_jet(const GrayImage& heat) {
  RgbImage out(heat.width(), heat.height());
  std::transform(heat.pixels().begin(), heat.pixels().end(), out.pixels().begin(), jet);
  return out;
}

RgbImage render_overlay(const GrayImage& background, const BinaryMask& mask) {
  require_same_shape(background, mask, "render_overlay");
  RgbImage out(background.width(), background.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = std::clamp(background.pixels()[i], 0.0, 1.0);
    const auto gray = static_cast<std::uint8_t>(std::lround(g * 255.0));
    if (mask.pixels()[i]) {
      out.pixels()[i] = {static_cast<std::uint8_t>(std::lround(127.0 + 128.0 * g * 0.5)),
                         static_cast<std::uint8_t>(gray / 2), static_cast<std::uint8_t>(gray / 2)};
    } else {
      out.pixels()[i] = {gray, gray, gray};
    }
  }
  return out;
}

}  // namespace xfg
