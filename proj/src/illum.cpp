#include "facerec/illum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>
#include "path_format.hpp"

#include "facerec/error.hpp"

namespace facerec {

WeightMatrix::WeightMatrix(std::vector<double> diagonal) : diagonal_(std::move(diagonal)) {
  bool any_positive = false;
  for (double w : diagonal_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidArgument, "weights must be finite and non-negative");
    }
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) {
    throw Error(ErrorCode::kInvalidArgument, "weight matrix is all zero");
  }
}

WeightMatrix WeightMatrix::identity(std::size_t n) { return WeightMatrix(std::vector<double>(n, 1.0)); }

std::vector<double> WeightMatrix::squared() const {
  std::vector<double> out(diagonal_.size());
  std::transform(diagonal_.begin(), diagonal_.end(), out.begin(), [](double w) { return w * w; });
  return out;
}

NormalMap::NormalMap(int width, int height, std::vector<Normal> normals)
    : width_(width), height_(height), normals_(std::move(normals)) {
  if (width < 1 || height < 1 ||
      normals_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kDimensionMismatch, "normal map size does not match its dimensions");
  }
  for (std::size_t i = 0; i < normals_.size(); ++i) {
    const Normal& n = normals_[i];
    const double norm = std::sqrt(n.x * n.x + n.y * n.y + n.z * n.z);
    if (!(std::abs(norm - 1.0) <= 1e-6) || n.z < 0.0) {
      throw Error(ErrorCode::kValidation,
                  fmt::format("normal {} is not a unit front-facing vector (norm {})", i, norm));
    }
  }
}

BasisSet::BasisSet(std::array<GrayImage, kNumHarmonics> images) : images_(std::move(images)) {
  for (const GrayImage& img : images_) {
    if (img.empty() || img.width() != images_[0].width() || img.height() != images_[0].height()) {
      throw Error(ErrorCode::kDimensionMismatch, "basis images must share one non-empty size");
    }
  }
}

std::array<double, kNumHarmonics> real_harmonics(const Normal& n) {
  constexpr double c1 = 0.48860251190291992;  // sqrt(3 / (4 pi))
  constexpr double c2 = 1.0925484305920792;   // sqrt(15 / (4 pi))
  constexpr double c3 = 0.31539156525252005;  // sqrt(5 / (16 pi))
  constexpr double c4 = 0.54627421529603959;  // sqrt(15 / (16 pi))
  return {kHarmonicC0,
          c1 * n.x,
          c1 * n.y,
          c1 * n.z,
          c2 * n.x * n.y,
          c2 * n.y * n.z,
          c3 * (3.0 * n.z * n.z - 1.0),
          c2 * n.x * n.z,
          c4 * (n.x * n.x - n.y * n.y)};
}

BasisSet harmonic_basis(const GrayImage& albedo, const NormalMap& normals) {
  if (albedo.width() != normals.width() || albedo.height() != normals.height()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("albedo {}x{} vs normals {}x{}", albedo.width(), albedo.height(),
                            normals.width(), normals.height()));
  }
  std::array<GrayImage, kNumHarmonics> images;
  for (auto& img : images) img = GrayImage(albedo.width(), albedo.height());
  for (int y = 0; y < albedo.height(); ++y) {
    for (int x = 0; x < albedo.width(); ++x) {
      const auto harmonics = real_harmonics(normals(x, y));
      for (int i = 0; i < kNumHarmonics; ++i) {
        images[static_cast<std::size_t>(i)](x, y) = albedo(x, y) * harmonics[static_cast<std::size_t>(i)];
      }
    }
  }
  return BasisSet(std::move(images));
}

NormalMap default_normal_map(int width, int height) {
  // Height field z = depth * sqrt(1 - u^2 - v^2). The semi-axes exceed the chip so
  // every pixel is on the cap; the depth keeps the central normals within 1e-3 of
  // the view axis even though an even-sized chip has no apex pixel.
  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);
  const double a = 0.75 * width;
  const double b = 0.9 * height;
  const double depth = 3.0 * width / 64.0;
  std::vector<Normal> normals(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x - cx) / a;
      const double v = (y - cy) / b;
      const double s = std::sqrt(1.0 - u * u - v * v);
      const double gx = depth * u / (a * s);  // -dz/dx
      const double gy = depth * v / (b * s);  // -dz/dy
      const double len = std::sqrt(gx * gx + gy * gy + 1.0);
      normals[static_cast<std::size_t>(y * width + x)] = {gx / len, gy / len, 1.0 / len};
    }
  }
  return NormalMap(width, height, std::move(normals));
}

GrayImage relight_linear(const BasisSet& basis, const IllumCoeffs& coeffs) {
  GrayImage out(basis.width(), basis.height());
  auto dst = out.pixels();
  for (int i = 0; i < kNumHarmonics; ++i) {
    const double a = coeffs[static_cast<std::size_t>(i)];
    auto src = basis[i].pixels();
    for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += a * src[p];
  }
  return out;
}

GrayImage relight(const BasisSet& basis, const IllumCoeffs& coeffs) {
  GrayImage out = relight_linear(basis, coeffs);
  for (double& v : out.pixels()) v = std::max(v, 0.0);
  return out;
}

IllumCoeffs fit_illumination(const GrayImage& probe, const BasisSet& basis, const WeightMatrix& weights) {
  if (probe.width() != basis.width() || probe.height() != basis.height() || weights.size() != probe.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "probe, basis and weights must agree in size");
  }
  const std::vector<double> w2 = weights.squared();
  Eigen::Matrix<double, kNumHarmonics, kNumHarmonics> normal = Eigen::Matrix<double, kNumHarmonics, kNumHarmonics>::Zero();
  Eigen::Matrix<double, kNumHarmonics, 1> rhs = Eigen::Matrix<double, kNumHarmonics, 1>::Zero();
  auto p = probe.pixels();
  for (int i = 0; i < kNumHarmonics; ++i) {
    auto bi = basis[i].pixels();
    for (std::size_t k = 0; k < p.size(); ++k) rhs(i) += w2[k] * bi[k] * p[k];
    for (int j = i; j < kNumHarmonics; ++j) {
      auto bj = basis[j].pixels();
      double acc = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) acc += w2[k] * bi[k] * bj[k];
      normal(i, j) = acc;
      normal(j, i) = acc;
    }
  }
  normal.diagonal().array() += kIlluminationDamping;
  const Eigen::Matrix<double, kNumHarmonics, 1> alpha = normal.ldlt().solve(rhs);
  IllumCoeffs out{};
  for (int i = 0; i < kNumHarmonics; ++i) out[static_cast<std::size_t>(i)] = alpha(i);
  return out;
}

void save_normal_map(const NormalMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kUnwritablePath, fmt::format("cannot write {}", path));
  out << "NMAP\n" << map.width() << ' ' << map.height() << '\n';
  for (int plane = 0; plane < 3; ++plane) {
    for (int y = 0; y < map.height(); ++y) {
      for (int x = 0; x < map.width(); ++x) {
        const Normal& n = map(x, y);
        const double v = plane == 0 ? n.x : plane == 1 ? n.y : n.z;
        out << (x ? " " : "") << fmt::format("{:.17g}", v);
      }
      out << '\n';
    }
  }
}

NormalMap load_normal_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, fmt::format("cannot open {}", path));
  std::string magic;
  int width = 0;
  int height = 0;
  if (!(in >> magic) || magic != "NMAP") {
    throw Error(ErrorCode::kBadMagic, fmt::format("{}: expected NMAP header", path));
  }
  if (!(in >> width >> height) || width < 1 || height < 1) {
    throw Error(ErrorCode::kZeroDimension, fmt::format("{}: bad normal map dimensions", path));
  }
  std::vector<Normal> normals(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int plane = 0; plane < 3; ++plane) {
    for (auto& n : normals) {
      double v = 0.0;
      if (!(in >> v)) throw Error(ErrorCode::kTruncatedPayload, fmt::format("{}: truncated plane {}", path, plane));
      (plane == 0 ? n.x : plane == 1 ? n.y : n.z) = v;
    }
  }
  return NormalMap(width, height, std::move(normals));
}

}  // namespace facerec
