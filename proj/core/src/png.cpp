#include "pancraft/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>

#include "pancraft/error.hpp"

namespace pancraft {

namespace {

struct FileCloser {
  void operator()(FILE* f) const { std::fclose(f); }
};

double percentile(std::vector<float> v, double q) {
  const size_t k = static_cast<size_t>(std::llround(q * static_cast<double>(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

}  // namespace

void write_png_rgb8(const std::filesystem::path& path, int64_t width, int64_t height, const std::vector<uint8_t>& rgb) {
  if (width < 1 || height < 1 || rgb.size() != static_cast<size_t>(width * height * 3)) {
    throw DataError("write_png_rgb8: buffer does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  std::unique_ptr<FILE, FileCloser> f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int64_t y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + y * width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<uint8_t> stretch_rgb8(const Tensor<float>& image, std::array<int, 3> bands) {
  if (image.rank() != 3) throw ShapeError("stretch_rgb8: expected [C,H,W], got " + image.shape().str());
  const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2), plane = h * w;
  std::vector<uint8_t> out(static_cast<size_t>(plane * 3));
  for (int ch = 0; ch < 3; ++ch) {
    const int b = bands[static_cast<size_t>(ch)];
    if (b < 0 || b >= c) throw ConfigError("png band index " + std::to_string(b) + " out of range");
    const float* src = image.data() + b * plane;
    std::vector<float> values(src, src + plane);
    const double lo = percentile(values, 0.01), hi = percentile(values, 0.99);
    const double span = hi > lo ? hi - lo : 1.0;
    for (int64_t i = 0; i < plane; ++i) {
      const double v = std::clamp((static_cast<double>(src[i]) - lo) / span, 0.0, 1.0);
      out[static_cast<size_t>(i * 3 + ch)] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
  }
  return out;
}

void export_png(const std::filesystem::path& path, const Tensor<float>& image, std::array<int, 3> bands) {
  write_png_rgb8(path, image.dim(2), image.dim(1), stretch_rgb8(image, bands));
}

std::array<int, 3> default_rgb_bands(int64_t bands) {
  if (bands >= 3) return {2, 1, 0};
  return {0, 0, 0};
}

}  // namespace pancraft
