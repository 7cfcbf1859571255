#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "facerec/image.hpp"
#include "facerec/weight_matrix.hpp"

namespace facerec {

inline constexpr int kLbpBins = 59;
inline constexpr int kNonUniformBin = 58;

/// Concatenated per-block uniform-LBP histograms in row-major block order.
struct LbpDescriptor {
  int blocks_x = 0;
  int blocks_y = 0;
  std::vector<std::uint32_t> bins;  // blocks_x * blocks_y * 59

  const std::uint32_t* block(int bx, int by) const {
    return bins.data() + static_cast<std::size_t>(by * blocks_x + bx) * kLbpBins;
  }
  bool operator==(const LbpDescriptor&) const = default;
};

/// Per-block matching weights, levels drawn from {0, 1, 2, 4}.
class BlockWeightMap {
 public:
  BlockWeightMap(int blocks_x, int blocks_y, std::vector<double> weights);

  int blocks_x() const noexcept { return blocks_x_; }
  int blocks_y() const noexcept { return blocks_y_; }
  double at(int bx, int by) const { return weights_[static_cast<std::size_t>(by * blocks_x_ + bx)]; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  BlockWeightMap scaled(double factor) const;

  /// Broadcast to a per-pixel weighting of a width x height image.
  WeightMatrix pixel_weights(int width, int height) const;

  bool operator==(const BlockWeightMap&) const = default;

 private:
  int blocks_x_;
  int blocks_y_;
  std::vector<double> weights_;
};

/// 8-neighbour code at radius 1. Neighbours run clockwise from the top-left
/// (most significant bit); a bit is set when neighbour >= centre.
std::uint8_t lbp_code(const GrayImage& img, int x, int y);

/// 58 uniform codes (<= 2 circular transitions) in ascending order, then 58 for the rest.
int uniform_mapping(std::uint8_t code);
int circular_transitions(std::uint8_t code);

LbpDescriptor extract_descriptor(const GrayImage& img, int blocks_x = 8, int blocks_y = 8);

/// Weighted chi-square distance; empty bins contribute nothing.
double descriptor_distance(const LbpDescriptor& a, const LbpDescriptor& b, const BlockWeightMap& w);

/// Chi-square distance restricted to one block.
double block_distance(const LbpDescriptor& a, const LbpDescriptor& b, int bx, int by);

/// Fixed face layout: eye band 4, nose/mouth band 2, periphery 1, bottom corners 0.
BlockWeightMap default_weight_map(int blocks_x = 8, int blocks_y = 8);

void write_descriptor_csv(const LbpDescriptor& d, std::ostream& out);

// Text grid: "blocks_x blocks_y" then blocks_y rows of weights; '#' comments.
void save_weight_map(const BlockWeightMap& map, const std::filesystem::path& path);
BlockWeightMap load_weight_map(const std::filesystem::path& path);

}  // namespace facerec
