#include <facerec/detect.hpp>
#include <facerec/error.hpp>
#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"

namespace facerec {
namespace {

// Top half minus bottom half of the window.
HaarFeature vertical_edge(int w, int h) {
  return {HaarKind::kTwoRect, {{0, 0, w, h / 2, 1}, {0, h / 2, w, h / 2, -1}}};
}

CascadeModel toy_cascade() {
  CascadeModel m;
  m.window_width = 8;
  m.window_height = 8;
  WeakClassifier weak;
  weak.feature = vertical_edge(8, 8);
  weak.polarity = -1;
  weak.threshold = 10.0;  // fires when value > 10
  weak.vote = 1.0;
  m.stages.push_back({{weak}, 1.0});
  return m;
}

double pixel_sum(const GrayImage& img, int x0, int y0, int w, int h) {
  double s = 0;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) s += img(x, y);
  return s;
}

HaarFeature random_feature(std::mt19937_64& rng, int ww, int wh) {
  const int kind = static_cast<int>(rng() % 3);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
  if (kind == 0) {
    const int w = 1 + pick(ww / 2), h = 1 + pick(wh);
    const int x = pick(ww - 2 * w + 1), y = pick(wh - h + 1);
    return {HaarKind::kTwoRect, {{x, y, w, h, 1}, {x + w, y, w, h, -1}}};
  }
  if (kind == 1) {
    const int w = 1 + pick(ww), h = 1 + pick(wh / 4);
    const int x = pick(ww - w + 1), y = pick(wh - 4 * h + 1);
    return {HaarKind::kThreeRect, {{x, y, w, h, 1}, {x, y + h, w, 2 * h, -1}, {x, y + 3 * h, w, h, 1}}};
  }
  const int w = 1 + pick(ww / 2), h = 1 + pick(wh / 2);
  const int x = pick(ww - 2 * w + 1), y = pick(wh - 2 * h + 1);
  return {HaarKind::kFourRect,
          {{x, y, w, h, 1}, {x + w, y, w, h, -1}, {x, y + h, w, h, -1}, {x + w, y + h, w, h, 1}}};
}

TEST(HaarFeature, MatchesPixelLoopsAtUnitAndLargerScales) {
  std::mt19937_64 rng(99);
  for (int c = 0; c < 200; ++c) {
    const HaarFeature f = random_feature(rng, 12, 12);
    validate_feature(f, 12, 12);
    const double scale = (c % 2 == 0) ? 1.0 : 1.0 + 0.1 * static_cast<double>(rng() % 15);
    const GrayImage img = testing::random_image(40, 40, rng());
    const IntegralImage ii(img);
    const int span = static_cast<int>(std::lround(12 * scale));
    const int ox = static_cast<int>(rng() % static_cast<unsigned>(40 - span));
    const int oy = static_cast<int>(rng() % static_cast<unsigned>(40 - span));
    double expect = 0;
    for (const HaarRect& r : f.rects) {
      const int x0 = static_cast<int>(std::lround(r.x * scale));
      const int y0 = static_cast<int>(std::lround(r.y * scale));
      const int x1 = std::max(x0 + 1, static_cast<int>(std::lround((r.x + r.w) * scale)));
      const int y1 = std::max(y0 + 1, static_cast<int>(std::lround((r.y + r.h) * scale)));
      const double area_ratio = double(r.w * r.h) / double((x1 - x0) * (y1 - y0));
      expect += r.sign * area_ratio * pixel_sum(img, ox + x0, oy + y0, x1 - x0, y1 - y0);
    }
    EXPECT_NEAR(eval_feature(ii, f, ox, oy, scale), expect, 1e-6);
  }
}

TEST(HaarFeature, BalancedFeaturesIgnoreConstantImages) {
  std::mt19937_64 rng(5);
  const GrayImage flat(30, 30, 0.7);
  const IntegralImage ii(flat);
  for (int c = 0; c < 50; ++c) {
    const HaarFeature f = random_feature(rng, 10, 10);
    EXPECT_NEAR(eval_feature(ii, f, 3, 2, 1.0 + 0.25 * (c % 4)), 0.0, 1e-9);
  }
}

TEST(HaarFeature, ValidationRejectsBrokenFeatures) {
  EXPECT_THROW(validate_feature({HaarKind::kTwoRect, {{0, 0, 2, 2, 1}}}, 8, 8), Error);
  EXPECT_THROW(validate_feature({HaarKind::kTwoRect, {{0, 0, 2, 2, 1}, {2, 0, 3, 2, -1}}}, 8, 8), Error);
  EXPECT_THROW(validate_feature({HaarKind::kTwoRect, {{0, 0, 4, 2, 1}, {4, 0, 5, 2, -1}}}, 8, 8), Error);
  EXPECT_THROW(validate_feature({HaarKind::kTwoRect, {{0, 0, 2, 2, 2}, {2, 0, 2, 2, -1}}}, 8, 8), Error);
  EXPECT_NO_THROW(validate_feature({HaarKind::kTwoRect, {{0, 0, 2, 2, 1}, {2, 0, 2, 2, -1}}}, 8, 8));
}

TEST(HaarFeature, OutOfImageRectanglesThrow) {
  const IntegralImage ii(GrayImage(10, 10));
  try {
    eval_feature(ii, vertical_edge(8, 8), 4, 4, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfBounds);
  }
}

TEST(Cascade, TextRoundTripPreservesModel) {
  CascadeModel m = toy_cascade();
  std::mt19937_64 rng(3);
  CascadeStage extra;
  extra.threshold = 0.123456789012345678;
  for (int k = 0; k < 4; ++k) {
    extra.weak.push_back({random_feature(rng, 8, 8), 0.1 * k - 0.33333333333333331, k % 2 ? 1 : -1, 0.7 + k});
  }
  m.stages.push_back(extra);
  std::stringstream ss;
  write_cascade(m, ss);
  EXPECT_EQ(parse_cascade(ss), m);
}

TEST(Cascade, ParserAcceptsCommentsAndBlankLines) {
  std::istringstream in(
      "# toy\nwindow 8 8\n\nstage 1   # one stage\nweak 1 -1 10 two-rect 2\nrect 0 0 8 4 1\nrect 0 4 8 4 -1\n");
  EXPECT_EQ(parse_cascade(in), toy_cascade());
}

ErrorCode parse_error(const std::string& text, std::string* message = nullptr) {
  std::istringstream in(text);
  try {
    parse_cascade(in);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << text;
  return ErrorCode::kInvalidArgument;
}

TEST(Cascade, SyntaxErrorsNameTheLine) {
  std::string msg;
  EXPECT_EQ(parse_error("window 8 8\nstage 1\nweak 1 1 0 five-rect 2\n", &msg), ErrorCode::kSyntax);
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_EQ(parse_error("stage 1\n"), ErrorCode::kSyntax);
  EXPECT_EQ(parse_error("window 8 8\nstage 1\nweak 1 1 0 two-rect 2\nrect 0 0 4 8 1\n"), ErrorCode::kSyntax);
  EXPECT_EQ(parse_error("window 8 8\nstage x\n"), ErrorCode::kSyntax);
  EXPECT_EQ(parse_error("window 8 8 9\n"), ErrorCode::kSyntax);
}

TEST(Cascade, SemanticErrorsAreValidationFailures) {
  EXPECT_EQ(parse_error("window 8 8\n"), ErrorCode::kValidation);
  EXPECT_EQ(parse_error("window 8 8\nstage 1\nweak 1 1 0 two-rect 2\nrect 0 0 4 8 1\nrect 4 0 5 8 -1\n"),
            ErrorCode::kValidation);
  EXPECT_EQ(parse_error("window 8 8\nstage 1\nweak 1 2 0 two-rect 2\nrect 0 0 4 8 1\nrect 4 0 4 8 -1\n"),
            ErrorCode::kValidation);
}

TEST(Detect, RawDetectionsMatchExhaustiveScanAtUnitScale) {
  const CascadeModel m = toy_cascade();
  const GrayImage img = testing::random_image(24, 20, 8, 0.0, 3.0);
  DetectParams p;
  p.scale_step = 100.0;
  p.window_stride = 1;
  std::vector<Box> expect;
  for (int oy = 0; oy + 8 <= 20; ++oy) {
    for (int ox = 0; ox + 8 <= 24; ++ox) {
      const double v = pixel_sum(img, ox, oy, 8, 4) - pixel_sum(img, ox, oy + 4, 8, 4);
      if (-v < -10.0) expect.push_back({double(ox), double(oy), 8, 8, 1.0});
    }
  }
  EXPECT_EQ(raw_detections(img, m, p), expect);
}

TEST(Detect, FindsPlantedPatternAndMergesOverlaps) {
  GrayImage img(48, 48, 0.5);
  for (int y = 10; y < 18; ++y)
    for (int x = 20; x < 28; ++x) img(x, y) = (y < 14) ? 1.0 : 0.0;
  DetectParams p;
  p.window_stride = 1;
  const auto raw = raw_detections(img, toy_cascade(), p);
  ASSERT_FALSE(raw.empty());
  const auto merged = detect_faces(img, toy_cascade(), p);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_NEAR(merged[0].x, 20.0, 1.5);
  EXPECT_NEAR(merged[0].y, 10.0, 1.5);
}

TEST(Detect, MergeUsesOverlapThresholdTransitively) {
  const std::vector<Box> boxes = {{0, 0, 10, 10, 1}, {1, 0, 10, 10, 1}, {2, 0, 10, 10, 1}, {40, 40, 10, 10, 1}};
  const auto merged = merge_detections(boxes, 0.8);
  ASSERT_EQ(merged.size(), 2u);
  EXPECT_DOUBLE_EQ(merged[0].x, 1.0);
  EXPECT_DOUBLE_EQ(merged[1].x, 40.0);
  // IoU of boxes 0 and 2 is 8/12 < 0.8, but both chain through box 1.
  EXPECT_LT(intersection_over_union(boxes[0], boxes[2]), 0.8);
  EXPECT_EQ(merge_detections(boxes, 0.95).size(), 4u);
}

TEST(Detect, SmallImageIsRejected) {
  EXPECT_THROW(raw_detections(GrayImage(5, 5), toy_cascade(), {}), Error);
}

TEST(CropChip, ResamplesBoxToChip) {
  GrayImage img(20, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) img(x, y) = x;
  const GrayImage chip = crop_chip(img, {4, 2, 5, 5, 1}, 9);
  ASSERT_EQ(chip.width(), 9);
  EXPECT_NEAR(chip(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(chip(8, 8), 8.0, 1e-12);
  EXPECT_NEAR(chip(4, 3), 6.0, 1e-12);
  EXPECT_THROW(crop_chip(img, {18, 0, 5, 5, 1}), Error);
}

}  // namespace
}  // namespace facerec
