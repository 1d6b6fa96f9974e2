#include "fcppn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>

namespace fcppn {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> quantize(const Tensor<float>& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw ShapeError("quantize: expected [H,W,3], got " +
                     to_string(image.shape()));
  }
  // nearbyint honours the current rounding mode, which is
  // round-to-nearest-even unless someone changed it.
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  std::vector<std::uint8_t> out(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(static_cast<double>(image[i]), 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::nearbyint(v * 255.0));
  }
  std::fesetround(saved);
  return out;
}

void write_png(const std::filesystem::path& path, const Tensor<float>& image) {
  const std::vector<std::uint8_t> pixels = quantize(image);
  const auto height = static_cast<png_uint_32>(image.dim(0));
  const auto width = static_cast<png_uint_32>(image.dim(1));

  File file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path.string() + " for writing");

  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error,
                                            png_error_handler,
                                            png_warning_handler);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(height);
  for (png_uint_32 r = 0; r < height; ++r) {
    rows[r] = const_cast<png_bytep>(pixels.data() + r * width * 3);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("writing " + path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor<float> read_png(const std::filesystem::path& path) {
  File file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8)) {
    throw IoError(path.string() + " is not a PNG file");
  }

  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error,
                                           png_error_handler,
                                           png_warning_handler);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }

  // Declared before setjmp so longjmp cannot skip their destructors'
  // bookkeeping.
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("reading " + path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<std::size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + ": unsupported PNG layout");
  }
  pixels.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) {
    rows[r] = pixels.data() + r * rowbytes;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor<float> out(Shape{height, width, 3});
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(pixels[i]) / 255.0f;
  }
  return out;
}

}  // namespace fcppn
