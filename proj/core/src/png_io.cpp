#include "specvit/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "specvit/errors.hpp"

namespace specvit {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png_rgb8(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    std::span<const std::uint8_t> rgb) {
  if (rgb.size() != height * width * 3) throw ValidationError("PNG buffer size mismatch");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw ValidationError("cannot write PNG " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t h = 0; h < height; ++h)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + h * width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png(const std::filesystem::path& path, const Image& img) {
  std::vector<std::uint8_t> bytes(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), bytes.begin(), [](double v) {
    return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
  });
  write_png_rgb8(path, img.height, img.width, bytes);
}

Image read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ValidationError("cannot open PNG " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("malformed PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  if (png_get_bit_depth(png, info) != 8 || png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError(path.string() + ": expected 8-bit RGB PNG");
  }
  std::vector<std::uint8_t> row(static_cast<std::size_t>(width) * 3);
  Image img(height, width);
  for (std::size_t h = 0; h < height; ++h) {
    png_read_row(png, row.data(), nullptr);
    for (std::size_t i = 0; i < row.size(); ++i) img.pixels[h * row.size() + i] = row[i] / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace specvit
