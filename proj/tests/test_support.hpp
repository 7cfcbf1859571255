#pragma once

#include <facerec/image.hpp>
#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace facerec::testing {

inline GrayImage random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  GrayImage img(w, h);
  for (double& v : img.pixels()) v = dist(rng);
  return img;
}

// Smooth random texture: a few random sinusoids plus a little noise.
inline GrayImage textured_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double fx[4], fy[4], ph[4], amp[4];
  for (int i = 0; i < 4; ++i) {
    fx[i] = 0.05 + 0.4 * u(rng);
    fy[i] = 0.05 + 0.4 * u(rng);
    ph[i] = 6.283185307179586 * u(rng);
    amp[i] = 0.05 + 0.1 * u(rng);
  }
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 0.5;
      for (int i = 0; i < 4; ++i) v += amp[i] * std::sin(fx[i] * x + fy[i] * y + ph[i]);
      img(x, y) = v + 0.02 * u(rng);
    }
  }
  return img;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("facerec_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace facerec::testing
