#include "mustan/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "mustan/error.hpp"

namespace mustan {

namespace {

cv::Mat read_any(const std::string& path, int flags) {
  cv::Mat m;
  try {
    m = cv::imread(path, flags);
  } catch (const cv::Exception& e) {
    throw DataError("cannot decode image " + path + ": " + e.what());
  }
  if (m.empty()) throw DataError("cannot read image " + path);
  return m;
}

void write_mat(const std::string& path, const cv::Mat& m) {
  bool ok = false;
  try {
    ok = cv::imwrite(path, m);
  } catch (const cv::Exception& e) {
    throw DataError("cannot write image " + path + ": " + e.what());
  }
  if (!ok) throw DataError("cannot write image " + path);
}

cv::Mat to_gray(const cv::Mat& m) {
  if (m.channels() == 1) return m;
  cv::Mat g;
  cv::cvtColor(m, g, m.channels() == 4 ? cv::COLOR_BGRA2GRAY : cv::COLOR_BGR2GRAY);
  return g;
}

}  // namespace

RgbImage read_rgb(const std::string& path) {
  cv::Mat bgr = read_any(path, cv::IMREAD_COLOR);
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage out(rgb.rows, rgb.cols);
  for (int y = 0; y < rgb.rows; ++y)
    std::copy_n(rgb.ptr<std::uint8_t>(y), rgb.cols * 3, out.pixels.data() + static_cast<std::size_t>(y) * rgb.cols * 3);
  return out;
}

Mask read_gray8(const std::string& path) {
  cv::Mat m = to_gray(read_any(path, cv::IMREAD_UNCHANGED));
  if (m.depth() != CV_8U) throw DataError(path + ": expected an 8-bit image");
  Mask out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) std::copy_n(m.ptr<std::uint8_t>(y), m.cols, out.data() + static_cast<Eigen::Index>(y) * m.cols);
  return out;
}

Gray16 read_gray16(const std::string& path) {
  cv::Mat m = to_gray(read_any(path, cv::IMREAD_UNCHANGED));
  if (m.depth() != CV_16U) throw DataError(path + ": expected a 16-bit image");
  Gray16 out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    std::copy_n(m.ptr<std::uint16_t>(y), m.cols, out.data() + static_cast<Eigen::Index>(y) * m.cols);
  return out;
}

void write_rgb_png(const std::string& path, const RgbImage& image) {
  cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  write_mat(path, bgr);
}

void write_gray8_png(const std::string& path, const Mask& image) {
  cv::Mat m(static_cast<int>(image.rows()), static_cast<int>(image.cols()), CV_8UC1,
            const_cast<std::uint8_t*>(image.data()));
  write_mat(path, m);
}

void write_gray16_png(const std::string& path, const Gray16& image) {
  cv::Mat m(static_cast<int>(image.rows()), static_cast<int>(image.cols()), CV_16UC1,
            const_cast<std::uint16_t*>(image.data()));
  write_mat(path, m);
}

TensorF rgb_to_tensor(const RgbImage& image, int height, int width) {
  cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat f;
  rgb.convertTo(f, CV_32FC3, 1.0 / 255.0);
  if (f.rows != height || f.cols != width) {
    cv::Mat resized;
    cv::resize(f, resized, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
    f = resized;
  }
  TensorF out(Shape{1, 3, height, width});
  for (int y = 0; y < height; ++y) {
    const float* row = f.ptr<float>(y);
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) out(0, c, y, x) = std::clamp(row[x * 3 + c], 0.0f, 1.0f);
  }
  return out;
}

Mask resize_nearest(const Mask& mask, int height, int width) {
  if (mask.rows() == height && mask.cols() == width) return mask;
  cv::Mat src(static_cast<int>(mask.rows()), static_cast<int>(mask.cols()), CV_8UC1,
              const_cast<std::uint8_t*>(mask.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_NEAREST);
  Mask out(height, width);
  for (int y = 0; y < height; ++y) std::copy_n(dst.ptr<std::uint8_t>(y), width, out.data() + static_cast<Eigen::Index>(y) * width);
  return out;
}

}  // namespace mustan
