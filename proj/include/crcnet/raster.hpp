#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crcnet {

// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RasterImage() = default;
  RasterImage(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
};

// PNG codec; any bit depth/colour type on disk is expanded to 8-bit RGB.
RasterImage read_png(const std::string& path);
void write_png(const std::string& path, const RasterImage& img);

}  // namespace crcnet
