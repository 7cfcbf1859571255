#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "facerec/image.hpp"
#include "facerec/weight_matrix.hpp"

namespace facerec {

inline constexpr int kNumHarmonics = 9;

struct Normal {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;
};

/// Per-pixel unit surface normals; every normal has unit length and z >= 0.
class NormalMap {
 public:
  NormalMap(int width, int height, std::vector<Normal> normals);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const Normal& operator()(int x, int y) const {
    return normals_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                    static_cast<std::size_t>(x)];
  }
  const std::vector<Normal>& normals() const noexcept { return normals_; }

 private:
  int width_;
  int height_;
  std::vector<Normal> normals_;
};

/// Nine harmonic images sharing one size; values may be negative.
class BasisSet {
 public:
  explicit BasisSet(std::array<GrayImage, kNumHarmonics> images);

  const GrayImage& operator[](int i) const { return images_[static_cast<std::size_t>(i)]; }
  const std::array<GrayImage, kNumHarmonics>& images() const noexcept { return images_; }
  int width() const noexcept { return images_[0].width(); }
  int height() const noexcept { return images_[0].height(); }

 private:
  std::array<GrayImage, kNumHarmonics> images_;
};

using IllumCoeffs = std::array<double, kNumHarmonics>;

// Real spherical harmonics up to order 2, in the order
// 1, x, y, z, xy, yz, 3z^2-1, xz, x^2-y^2 (each with its normalization constant).
std::array<double, kNumHarmonics> real_harmonics(const Normal& n);

/// Y_00, the constant harmonic 1/sqrt(4 pi).
inline constexpr double kHarmonicC0 = 0.28209479177387814;

BasisSet harmonic_basis(const GrayImage& albedo, const NormalMap& normals);

/// Generic face shape: a shallow ellipsoid cap centred on the chip.
NormalMap default_normal_map(int width = kChipSize, int height = kChipSize);

/// Sum of coeffs[i] * basis[i], without clamping.
GrayImage relight_linear(const BasisSet& basis, const IllumCoeffs& coeffs);

/// relight_linear with negative pixels clamped to zero.
GrayImage relight(const BasisSet& basis, const IllumCoeffs& coeffs);

/// Weighted least-squares coefficients, solved through the damped 9x9 normal equations.
IllumCoeffs fit_illumination(const GrayImage& probe, const BasisSet& basis, const WeightMatrix& weights);

inline constexpr double kIlluminationDamping = 1e-8;

// Three-plane text format; see docs/file_formats.md.
void save_normal_map(const NormalMap& map, const std::filesystem::path& path);
NormalMap load_normal_map(const std::filesystem::path& path);

}  // namespace facerec
