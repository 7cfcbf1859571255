#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace facerec {

/// Side length of the canonical face chip fed to the recognizer.
inline constexpr int kChipSize = 64;

/// Row-major grayscale raster with real-valued luminance.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double operator()(int x, int y) const { return pixels_[index(x, y)]; }
  double& operator()(int x, int y) { return pixels_[index(x, y)]; }

  /// Replicate-edge access: coordinates outside the raster are clamped.
  double clamped(int x, int y) const;

  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<double> pixels() noexcept { return pixels_; }

  double min_value() const;
  double max_value() const;
  double mean() const;

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

/// Odd-sized correlation kernel.
class Kernel2D {
 public:
  Kernel2D(int width, int height, std::vector<double> weights);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int radius_x() const noexcept { return width_ / 2; }
  int radius_y() const noexcept { return height_ / 2; }
  double at(int dx, int dy) const {
    return weights_[static_cast<std::size_t>((dy + radius_y()) * width_ + dx + radius_x())];
  }
  std::span<const double> weights() const noexcept { return weights_; }
  double sum() const;

 private:
  int width_;
  int height_;
  std::vector<double> weights_;
};

/// Summed-area table of size (width+1) x (height+1); row 0 and column 0 are zero.
class IntegralImage {
 public:
  explicit IntegralImage(const GrayImage& img);

  int width() const noexcept { return width_; }    // source width
  int height() const noexcept { return height_; }  // source height

  /// Sum of all pixels strictly above and left of (x, y).
  double at(int x, int y) const {
    return table_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_ + 1) +
                  static_cast<std::size_t>(x)];
  }

  /// Sum over [x0, x1) x [y0, y1).
  double rect_sum(int x0, int y0, int x1, int y1) const {
    return at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
  }

 private:
  int width_;
  int height_;
  std::vector<double> table_;
};

// PGM P2/P5 reader; samples are divided by maxval.
GrayImage load_image(const std::filesystem::path& path);

// Writes binary P5 with maxval 255, clamping to [0,1] and rounding half-up.
void save_image(const GrayImage& img, const std::filesystem::path& path);

// Align-corners bilinear resampling with edge clamping.
GrayImage resize_bilinear(const GrayImage& img, int new_width, int new_height);

/// Normalized isotropic Gaussian of size (2r+1)^2. A radius <= 0 selects ceil(3 sigma).
Kernel2D gaussian_kernel(double sigma, int radius = 0);

// Correlation with replicate-edge padding; output has the input's size.
GrayImage convolve(const GrayImage& img, const Kernel2D& kernel);

IntegralImage integral_image(const GrayImage& img);

}  // namespace facerec
