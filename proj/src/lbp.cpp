#include "facerec/lbp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include "path_format.hpp"

#include "facerec/error.hpp"

namespace facerec {

BlockWeightMap::BlockWeightMap(int blocks_x, int blocks_y, std::vector<double> weights)
    : blocks_x_(blocks_x), blocks_y_(blocks_y), weights_(std::move(weights)) {
  if (blocks_x < 1 || blocks_y < 1 || weights_.size() != static_cast<std::size_t>(blocks_x * blocks_y)) {
    throw Error(ErrorCode::kDimensionMismatch, "block weight count does not match the grid");
  }
  bool any = false;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::kValidation, "block weights must be >= 0");
    any = any || w > 0.0;
  }
  if (!any) throw Error(ErrorCode::kValidation, "block weight map is all zero");
}

BlockWeightMap BlockWeightMap::scaled(double factor) const {
  std::vector<double> w = weights_;
  for (double& v : w) v *= factor;
  return BlockWeightMap(blocks_x_, blocks_y_, std::move(w));
}

WeightMatrix BlockWeightMap::pixel_weights(int width, int height) const {
  std::vector<double> out(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    const int by = std::min(y * blocks_y_ / height, blocks_y_ - 1);
    for (int x = 0; x < width; ++x) {
      const int bx = std::min(x * blocks_x_ / width, blocks_x_ - 1);
      out[static_cast<std::size_t>(y * width + x)] = at(bx, by);
    }
  }
  return WeightMatrix(std::move(out));
}

std::uint8_t lbp_code(const GrayImage& img, int x, int y) {
  if (x < 1 || y < 1 || x > img.width() - 2 || y > img.height() - 2) {
    throw Error(ErrorCode::kOutOfBounds, fmt::format("LBP needs a 1-pixel margin, got ({}, {})", x, y));
  }
  static constexpr std::array<std::array<int, 2>, 8> kNeighbours{
      {{-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}}};
  const double centre = img(x, y);
  unsigned code = 0;
  for (const auto& [dx, dy] : kNeighbours) code = (code << 1) | (img(x + dx, y + dy) >= centre ? 1u : 0u);
  return static_cast<std::uint8_t>(code);
}

int circular_transitions(std::uint8_t code) {
  const unsigned rotated = ((code >> 1) | (code << 7)) & 0xFFu;
  return std::popcount(static_cast<unsigned>(code ^ rotated));
}

namespace {

std::array<int, 256> make_uniform_table() {
  std::array<int, 256> table{};
  int next = 0;
  for (int code = 0; code < 256; ++code) {
    table[static_cast<std::size_t>(code)] =
        circular_transitions(static_cast<std::uint8_t>(code)) <= 2 ? next++ : kNonUniformBin;
  }
  return table;
}

const std::array<int, 256> kUniformTable = make_uniform_table();

// Half-open [begin, end) of block `index` along an axis of `interior` pixels; the
// remainder joins the last block.
std::pair<int, int> block_span(int interior, int blocks, int index) {
  const int size = interior / blocks;
  const int begin = index * size;
  return {begin, index == blocks - 1 ? interior : begin + size};
}

}  // namespace

int uniform_mapping(std::uint8_t code) { return kUniformTable[code]; }

LbpDescriptor extract_descriptor(const GrayImage& img, int blocks_x, int blocks_y) {
  const int inner_w = img.width() - 2;
  const int inner_h = img.height() - 2;
  if (blocks_x < 1 || blocks_y < 1 || inner_w / std::max(blocks_x, 1) < 3 || inner_h / std::max(blocks_y, 1) < 3) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("{}x{} grid too fine for a {}x{} image", blocks_x, blocks_y, img.width(), img.height()));
  }
  LbpDescriptor d{blocks_x, blocks_y,
                  std::vector<std::uint32_t>(static_cast<std::size_t>(blocks_x * blocks_y) * kLbpBins, 0)};
  for (int by = 0; by < blocks_y; ++by) {
    const auto [y0, y1] = block_span(inner_h, blocks_y, by);
    for (int bx = 0; bx < blocks_x; ++bx) {
      const auto [x0, x1] = block_span(inner_w, blocks_x, bx);
      std::uint32_t* hist = d.bins.data() + static_cast<std::size_t>(by * blocks_x + bx) * kLbpBins;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) ++hist[uniform_mapping(lbp_code(img, x + 1, y + 1))];
      }
    }
  }
  return d;
}

double block_distance(const LbpDescriptor& a, const LbpDescriptor& b, int bx, int by) {
  const std::uint32_t* ha = a.block(bx, by);
  const std::uint32_t* hb = b.block(bx, by);
  double acc = 0.0;
  for (int k = 0; k < kLbpBins; ++k) {
    const double s = static_cast<double>(ha[k]) + static_cast<double>(hb[k]);
    if (s == 0.0) continue;
    const double diff = static_cast<double>(ha[k]) - static_cast<double>(hb[k]);
    acc += diff * diff / s;
  }
  return acc;
}

double descriptor_distance(const LbpDescriptor& a, const LbpDescriptor& b, const BlockWeightMap& w) {
  if (a.blocks_x != b.blocks_x || a.blocks_y != b.blocks_y || a.blocks_x != w.blocks_x() ||
      a.blocks_y != w.blocks_y() || a.bins.size() != b.bins.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "descriptor grids or weight map disagree");
  }
  double total = 0.0;
  for (int by = 0; by < a.blocks_y; ++by) {
    for (int bx = 0; bx < a.blocks_x; ++bx) {
      const double weight = w.at(bx, by);
      if (weight != 0.0) total += weight * block_distance(a, b, bx, by);
    }
  }
  return total;
}

BlockWeightMap default_weight_map(int blocks_x, int blocks_y) {
  if (blocks_x < 4 || blocks_y < 4) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("default weight map needs at least a 4x4 grid, got {}x{}", blocks_x, blocks_y));
  }
  std::vector<double> w(static_cast<std::size_t>(blocks_x * blocks_y), 1.0);
  for (int by = 0; by < blocks_y; ++by) {
    const double centre = (by + 0.5) / blocks_y;
    for (int bx = 0; bx < blocks_x; ++bx) {
      const bool edge_column = bx == 0 || bx == blocks_x - 1;
      double level = 1.0;
      if (!edge_column && centre >= 0.20 && centre <= 0.45) {
        level = 4.0;
      } else if (!edge_column && centre > 0.45 && centre <= 0.85) {
        level = 2.0;
      }
      if (by == blocks_y - 1 && edge_column) level = 0.0;
      w[static_cast<std::size_t>(by * blocks_x + bx)] = level;
    }
  }
  return BlockWeightMap(blocks_x, blocks_y, std::move(w));
}

void write_descriptor_csv(const LbpDescriptor& d, std::ostream& out) {
  for (int by = 0; by < d.blocks_y; ++by) {
    for (int bx = 0; bx < d.blocks_x; ++bx) {
      const std::uint32_t* h = d.block(bx, by);
      for (int k = 0; k < kLbpBins; ++k) out << (k ? "," : "") << h[k];
      out << '\n';
    }
  }
}

void save_weight_map(const BlockWeightMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kUnwritablePath, fmt::format("cannot write {}", path));
  out << map.blocks_x() << ' ' << map.blocks_y() << '\n';
  for (int by = 0; by < map.blocks_y(); ++by) {
    for (int bx = 0; bx < map.blocks_x(); ++bx) out << (bx ? " " : "") << fmt::format("{:g}", map.at(bx, by));
    out << '\n';
  }
}

BlockWeightMap load_weight_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, fmt::format("cannot open {}", path));
  std::stringstream body;
  std::string line;
  while (std::getline(in, line)) body << line.substr(0, line.find('#')) << '\n';
  int bx = 0;
  int by = 0;
  if (!(body >> bx >> by) || bx < 1 || by < 1) {
    throw Error(ErrorCode::kSyntax, fmt::format("{}: expected 'blocks_x blocks_y' header", path));
  }
  std::vector<double> w(static_cast<std::size_t>(bx * by));
  for (double& v : w) {
    if (!(body >> v)) throw Error(ErrorCode::kTruncatedPayload, fmt::format("{}: too few weights", path));
  }
  return BlockWeightMap(bx, by, std::move(w));
}

}  // namespace facerec
