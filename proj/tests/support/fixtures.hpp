#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "mustan/image_io.hpp"

namespace mustan::testing {

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("mustan-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline RgbImage solid_rgb(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  return img;
}

// The five CDnet label values laid out in vertical bands.
inline Mask cdnet_label_bands(int h, int w) {
  const std::uint8_t values[5] = {0, 50, 85, 170, 255};
  Mask m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m(y, x) = values[(x * 5) / w];
  return m;
}

struct CdnetVideoSpec {
  std::string category;
  std::string video;
  int frames = 6;
  int height = 24;
  int width = 40;
  // Frames [first, last] get labels; 0 disables temporalROI.txt.
  int roi_first = 0;
  int roi_last = 0;
  bool roi_image = false;
};

// <root>/<category>/<video>/{input/in%06d.png, groundtruth/gt%06d.png, ...}.
// Labels exist for every frame; a temporalROI.txt narrows the usable range.
inline void write_cdnet_video(const std::filesystem::path& root, const CdnetVideoSpec& s) {
  namespace fs = std::filesystem;
  const fs::path dir = root / s.category / s.video;
  fs::create_directories(dir / "input");
  fs::create_directories(dir / "groundtruth");
  for (int i = 1; i <= s.frames; ++i) {
    char in[32], gt[32];
    std::snprintf(in, sizeof(in), "in%06d.png", i);
    std::snprintf(gt, sizeof(gt), "gt%06d.png", i);
    write_rgb_png((dir / "input" / in).string(),
                  solid_rgb(s.height, s.width, static_cast<std::uint8_t>(10 * i), 100, 200));
    write_gray8_png((dir / "groundtruth" / gt).string(), cdnet_label_bands(s.height, s.width));
  }
  if (s.roi_first > 0) std::ofstream(dir / "temporalROI.txt") << s.roi_first << " " << s.roi_last << "\n";
  if (s.roi_image) {
    Mask roi = Mask::Constant(s.height, s.width, 255);
    roi.topRows(s.height / 2).setZero();
    write_gray8_png((dir / "ROI.bmp").string(), roi);
  }
}

}  // namespace mustan::testing
