#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mustan/tensor.hpp"

namespace mustan {

// 8-bit RGB, interleaved row-major.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

using Gray16 = Eigen::Array<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// All readers throw DataError naming the path when the file is unreadable.
RgbImage read_rgb(const std::string& path);
Mask read_gray8(const std::string& path);
Gray16 read_gray16(const std::string& path);

void write_rgb_png(const std::string& path, const RgbImage& image);
void write_gray8_png(const std::string& path, const Mask& image);
void write_gray16_png(const std::string& path, const Gray16& image);

// Bilinear resize to height x width, scaled to [0, 1]; 1 x 3 x H x W.
TensorF rgb_to_tensor(const RgbImage& image, int height, int width);

Mask resize_nearest(const Mask& mask, int height, int width);

}  // namespace mustan
