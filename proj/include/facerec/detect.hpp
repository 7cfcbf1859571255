#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "facerec/image.hpp"

namespace facerec {

enum class HaarKind { kTwoRect, kThreeRect, kFourRect };

struct HaarRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  int sign = 1;  // +1 or -1
  bool operator==(const HaarRect&) const = default;
};

/// Rectangles in base-window coordinates; positive and negative areas balance.
struct HaarFeature {
  HaarKind kind = HaarKind::kTwoRect;
  std::vector<HaarRect> rects;
  bool operator==(const HaarFeature&) const = default;
};

/// Votes `vote` when polarity * value < polarity * threshold.
struct WeakClassifier {
  HaarFeature feature;
  double threshold = 0.0;
  int polarity = 1;
  double vote = 0.0;
  bool operator==(const WeakClassifier&) const = default;
};

struct CascadeStage {
  std::vector<WeakClassifier> weak;
  double threshold = 0.0;
  bool operator==(const CascadeStage&) const = default;
};

struct CascadeModel {
  int window_width = 0;
  int window_height = 0;
  std::vector<CascadeStage> stages;
  bool operator==(const CascadeModel&) const = default;
};

struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  double scale = 1.0;
  bool operator==(const Box&) const = default;
};

struct DetectParams {
  double scale_step = 1.25;
  int window_stride = 2;
  double min_overlap = 0.3;
};

/// Throws kValidation describing the first broken invariant.
void validate_feature(const HaarFeature& feature, int window_width, int window_height);
void validate_cascade(const CascadeModel& model);

/// Rectangles scaled by `scale` with rounded coordinates.
std::vector<HaarRect> scale_rects(const HaarFeature& feature, double scale);

/// Signed sum of the scaled rectangles placed at (ox, oy); each rectangle sum is
/// multiplied by (unscaled area) / (scaled area) so balanced features stay balanced.
double eval_feature(const IntegralImage& ii, const HaarFeature& feature, int ox, int oy, double scale = 1.0);

bool window_passes(const IntegralImage& ii, const CascadeModel& model, int ox, int oy, double scale);

CascadeModel load_cascade(const std::filesystem::path& path);
CascadeModel parse_cascade(std::istream& in);
void save_cascade(const CascadeModel& model, const std::filesystem::path& path);
void write_cascade(const CascadeModel& model, std::ostream& out);

double intersection_over_union(const Box& a, const Box& b);

/// Groups boxes whose IoU >= min_overlap (transitively) and averages each group.
std::vector<Box> merge_detections(std::vector<Box> boxes, double min_overlap);

/// Every passing window over the scale pyramid, sorted by (y, x, scale), before merging.
std::vector<Box> raw_detections(const GrayImage& img, const CascadeModel& model, const DetectParams& params);

std::vector<Box> detect_faces(const GrayImage& img, const CascadeModel& model, const DetectParams& params = {});

/// Crops `box` (rounded to pixels) and resamples to the canonical chip.
GrayImage crop_chip(const GrayImage& img, const Box& box, int chip_size = kChipSize);

}  // namespace facerec
