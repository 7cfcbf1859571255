#include <facerec/error.hpp>
#include <facerec/lbp.hpp>
#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "test_support.hpp"

namespace facerec {
namespace {

GrayImage patch(double centre, const std::array<double, 8>& clockwise) {
  GrayImage img(3, 3);
  img(1, 1) = centre;
  const int xs[8] = {0, 1, 2, 2, 2, 1, 0, 0};
  const int ys[8] = {0, 0, 0, 1, 2, 2, 2, 1};
  for (int i = 0; i < 8; ++i) img(xs[i], ys[i]) = clockwise[static_cast<std::size_t>(i)];
  return img;
}

// Independent code: build the bit string, then parse it.
int naive_code(const GrayImage& img, int x, int y) {
  const int xs[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
  const int ys[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
  std::string bits;
  for (int i = 0; i < 8; ++i) bits += img(x + xs[i], y + ys[i]) >= img(x, y) ? '1' : '0';
  return std::stoi(bits, nullptr, 2);
}

bool naive_uniform(int code) {
  int changes = 0;
  for (int i = 0; i < 8; ++i) changes += ((code >> i) & 1) != ((code >> ((i + 1) % 8)) & 1);
  return changes <= 2;
}

std::vector<std::uint32_t> naive_descriptor(const GrayImage& img, int gx, int gy) {
  std::vector<int> bin_of(256);
  int next = 0;
  for (int c = 0; c < 256; ++c) bin_of[static_cast<std::size_t>(c)] = naive_uniform(c) ? next++ : 58;
  const int iw = img.width() - 2, ih = img.height() - 2;
  std::vector<std::uint32_t> out(static_cast<std::size_t>(gx * gy * 59), 0);
  for (int y = 1; y <= ih; ++y) {
    for (int x = 1; x <= iw; ++x) {
      const int bx = std::min((x - 1) / (iw / gx), gx - 1);
      const int by = std::min((y - 1) / (ih / gy), gy - 1);
      ++out[static_cast<std::size_t>((by * gx + bx) * 59 + bin_of[static_cast<std::size_t>(naive_code(img, x, y))])];
    }
  }
  return out;
}

TEST(LbpCode, HandWorkedExample) {
  EXPECT_EQ(lbp_code(patch(5, {6, 7, 1, 2, 8, 3, 4, 9}), 1, 1), 201);
}

TEST(LbpCode, TiesAndStrictMaximum) {
  EXPECT_EQ(lbp_code(GrayImage(3, 3, 0.4), 1, 1), 255);
  EXPECT_EQ(lbp_code(patch(9, {1, 2, 3, 4, 5, 6, 7, 8}), 1, 1), 0);
  EXPECT_EQ(lbp_code(patch(5, {5, 0, 0, 0, 0, 0, 0, 0}), 1, 1), 128);
  EXPECT_EQ(lbp_code(patch(5, {0, 0, 0, 0, 0, 0, 0, 5}), 1, 1), 1);
}

TEST(LbpCode, BorderCoordinatesThrow) {
  const GrayImage img(5, 5);
  EXPECT_THROW(lbp_code(img, 0, 2), Error);
  EXPECT_THROW(lbp_code(img, 2, 4), Error);
}

TEST(UniformMapping, ExactlyFiftyEightUniformCodesInAscendingBins) {
  int uniform = 0;
  int expected_bin = 0;
  for (int c = 0; c < 256; ++c) {
    const int bin = uniform_mapping(static_cast<std::uint8_t>(c));
    if (naive_uniform(c)) {
      ++uniform;
      EXPECT_EQ(bin, expected_bin++);
    } else {
      EXPECT_EQ(bin, kNonUniformBin);
    }
  }
  EXPECT_EQ(uniform, 58);
  EXPECT_EQ(uniform_mapping(0b01010101), kNonUniformBin);
  EXPECT_EQ(circular_transitions(0b01010101), 8);
  EXPECT_EQ(uniform_mapping(0), 0);
}

TEST(Descriptor, MatchesNaiveRecomputationOnRandomImages) {
  std::mt19937_64 rng(16);
  for (int c = 0; c < 30; ++c) {
    // Quantized pixels so ties occur.
    GrayImage img = testing::random_image(16, 16, rng());
    for (double& v : img.pixels()) v = std::floor(v * 6.0) / 6.0;
    for (int grid : {1, 2, 3, 4}) {
      EXPECT_EQ(extract_descriptor(img, grid, grid).bins, naive_descriptor(img, grid, grid)) << grid;
    }
  }
}

TEST(Descriptor, CheckerboardAndConstantImages) {
  GrayImage board(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) board(x, y) = (x + y) % 2;
  EXPECT_EQ(extract_descriptor(board, 1, 1).bins, naive_descriptor(board, 1, 1));
  const LbpDescriptor flat = extract_descriptor(GrayImage(20, 20, 0.3), 2, 2);
  for (int b = 0; b < 4; ++b) {
    EXPECT_EQ(flat.bins[static_cast<std::size_t>(b * 59 + uniform_mapping(255))], 81u);
  }
}

TEST(Descriptor, BlockCountsCoverTheInterior) {
  const GrayImage img = testing::random_image(64, 64, 3);
  const LbpDescriptor d = extract_descriptor(img);
  std::uint32_t total = 0;
  for (int by = 0; by < 8; ++by) {
    for (int bx = 0; bx < 8; ++bx) {
      std::uint32_t sum = 0;
      for (int k = 0; k < 59; ++k) sum += d.block(bx, by)[k];
      const std::uint32_t w = bx == 7 ? 62 - 7 * 7 : 7;
      const std::uint32_t h = by == 7 ? 62 - 7 * 7 : 7;
      EXPECT_EQ(sum, w * h);
      total += sum;
    }
  }
  EXPECT_EQ(total, 62u * 62u);
  EXPECT_THROW(extract_descriptor(GrayImage(16, 16), 8, 8), Error);
}

TEST(Descriptor, InvariantToConstantOffset) {
  std::mt19937_64 rng(5);
  for (int c = 0; c < 10; ++c) {
    GrayImage img = testing::random_image(32, 32, rng());
    for (double& v : img.pixels()) v = std::floor(v * 256.0) / 256.0;
    GrayImage shifted = img;
    for (double& v : shifted.pixels()) v += 17.0 / 256.0;
    EXPECT_EQ(extract_descriptor(img, 4, 4), extract_descriptor(shifted, 4, 4));
  }
}

TEST(Distance, HandWorkedChiSquare) {
  // Two blocks; only the first two bins are populated.
  LbpDescriptor a{2, 1, std::vector<std::uint32_t>(118, 0)};
  LbpDescriptor b = a;
  a.bins[0] = 4;
  b.bins[1] = 4;
  const BlockWeightMap w(2, 1, {1.0, 1.0});
  EXPECT_DOUBLE_EQ(descriptor_distance(a, b, w), 8.0);
  EXPECT_DOUBLE_EQ(descriptor_distance(b, a, w), 8.0);
  EXPECT_DOUBLE_EQ(descriptor_distance(a, a, w), 0.0);
  EXPECT_DOUBLE_EQ(descriptor_distance(a, b, BlockWeightMap(2, 1, {0.0, 1.0})), 0.0);
}

TEST(Distance, SymmetricAndScalesWithWeights) {
  const LbpDescriptor a = extract_descriptor(testing::random_image(64, 64, 1));
  const LbpDescriptor b = extract_descriptor(testing::random_image(64, 64, 2));
  const BlockWeightMap w = default_weight_map();
  const double d = descriptor_distance(a, b, w);
  EXPECT_GT(d, 0.0);
  EXPECT_DOUBLE_EQ(descriptor_distance(b, a, w), d);
  EXPECT_NEAR(descriptor_distance(a, b, w.scaled(3.5)), 3.5 * d, 1e-9 * d);
  EXPECT_THROW(descriptor_distance(a, extract_descriptor(testing::random_image(64, 64, 2), 4, 4), w), Error);
}

TEST(WeightMap, DefaultLayout) {
  const BlockWeightMap w = default_weight_map();
  EXPECT_EQ(w.at(2, 2), 4.0);
  EXPECT_EQ(w.at(0, 7), 0.0);
  EXPECT_EQ(w.at(7, 7), 0.0);
  const std::set<double> levels(w.weights().begin(), w.weights().end());
  EXPECT_EQ(levels, (std::set<double>{0.0, 1.0, 2.0, 4.0}));
  EXPECT_THROW(default_weight_map(3, 8), Error);
}

TEST(WeightMap, PixelBroadcastAndFileRoundTrip) {
  const BlockWeightMap w = default_weight_map();
  const WeightMatrix px = w.pixel_weights(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) EXPECT_EQ(px[static_cast<std::size_t>(y * 64 + x)], w.at(x / 8, y / 8));
  testing::TempDir dir("wmap");
  save_weight_map(w, dir / "w.txt");
  EXPECT_EQ(load_weight_map(dir / "w.txt"), w);
  std::ofstream(dir / "bad.txt") << "2 2\n1 1 # short\n1\n";
  EXPECT_THROW(load_weight_map(dir / "bad.txt"), Error);
  EXPECT_THROW(BlockWeightMap(2, 1, {0.0, 0.0}), Error);
  EXPECT_THROW(BlockWeightMap(2, 1, {1.0, -1.0}), Error);
}

}  // namespace
}  // namespace facerec
