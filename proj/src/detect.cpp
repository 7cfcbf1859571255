#include "facerec/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include <fmt/format.h>
#include "path_format.hpp"

#include "facerec/error.hpp"

namespace facerec {

namespace {

std::size_t expected_rects(HaarKind kind) {
  switch (kind) {
    case HaarKind::kTwoRect: return 2;
    case HaarKind::kThreeRect: return 3;
    case HaarKind::kFourRect: return 4;
  }
  return 0;
}

const char* kind_name(HaarKind kind) {
  switch (kind) {
    case HaarKind::kTwoRect: return "two-rect";
    case HaarKind::kThreeRect: return "three-rect";
    case HaarKind::kFourRect: return "four-rect";
  }
  return "?";
}

int round_int(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

void validate_feature(const HaarFeature& feature, int window_width, int window_height) {
  if (feature.rects.size() != expected_rects(feature.kind)) {
    throw Error(ErrorCode::kValidation, fmt::format("{} feature has {} rectangles", kind_name(feature.kind),
                                                    feature.rects.size()));
  }
  long balance = 0;
  for (const HaarRect& r : feature.rects) {
    if (r.w < 1 || r.h < 1 || r.x < 0 || r.y < 0 || r.x + r.w > window_width || r.y + r.h > window_height) {
      throw Error(ErrorCode::kValidation,
                  fmt::format("rectangle ({} {} {} {}) lies outside the {}x{} window", r.x, r.y, r.w, r.h,
                              window_width, window_height));
    }
    if (r.sign != 1 && r.sign != -1) {
      throw Error(ErrorCode::kValidation, fmt::format("rectangle sign must be +1 or -1, got {}", r.sign));
    }
    balance += static_cast<long>(r.sign) * r.w * r.h;
  }
  if (balance != 0) {
    throw Error(ErrorCode::kValidation, fmt::format("positive and negative areas differ by {}", balance));
  }
}

void validate_cascade(const CascadeModel& model) {
  if (model.window_width < 4 || model.window_height < 4) {
    throw Error(ErrorCode::kValidation,
                fmt::format("base window {}x{} smaller than 4x4", model.window_width, model.window_height));
  }
  if (model.stages.empty()) throw Error(ErrorCode::kValidation, "cascade has no stages");
  for (std::size_t s = 0; s < model.stages.size(); ++s) {
    const CascadeStage& stage = model.stages[s];
    if (stage.weak.empty()) throw Error(ErrorCode::kValidation, fmt::format("stage {} has no weak classifiers", s));
    for (std::size_t k = 0; k < stage.weak.size(); ++k) {
      const WeakClassifier& weak = stage.weak[k];
      try {
        validate_feature(weak.feature, model.window_width, model.window_height);
        if (!(weak.vote >= 0.0)) throw Error(ErrorCode::kValidation, "negative vote");
        if (weak.polarity != 1 && weak.polarity != -1) throw Error(ErrorCode::kValidation, "polarity must be +1 or -1");
      } catch (const Error& e) {
        throw Error(ErrorCode::kValidation, fmt::format("stage {} feature {}: {}", s, k, e.what()));
      }
    }
  }
}

std::vector<HaarRect> scale_rects(const HaarFeature& feature, double scale) {
  std::vector<HaarRect> out;
  out.reserve(feature.rects.size());
  for (const HaarRect& r : feature.rects) {
    const int x0 = round_int(r.x * scale);
    const int y0 = round_int(r.y * scale);
    const int x1 = std::max(x0 + 1, round_int((r.x + r.w) * scale));
    const int y1 = std::max(y0 + 1, round_int((r.y + r.h) * scale));
    out.push_back({x0, y0, x1 - x0, y1 - y0, r.sign});
  }
  return out;
}

double eval_feature(const IntegralImage& ii, const HaarFeature& feature, int ox, int oy, double scale) {
  if (!(scale >= 1.0)) throw Error(ErrorCode::kInvalidArgument, fmt::format("scale must be >= 1, got {}", scale));
  const std::vector<HaarRect> scaled = scale_rects(feature, scale);
  double value = 0.0;
  for (std::size_t k = 0; k < scaled.size(); ++k) {
    const HaarRect& r = scaled[k];
    const int x0 = ox + r.x;
    const int y0 = oy + r.y;
    if (x0 < 0 || y0 < 0 || x0 + r.w > ii.width() || y0 + r.h > ii.height()) {
      throw Error(ErrorCode::kOutOfBounds,
                  fmt::format("feature rectangle at ({}, {}) size {}x{} leaves the {}x{} image", x0, y0, r.w, r.h,
                              ii.width(), ii.height()));
    }
    const HaarRect& base = feature.rects[k];
    const double compensation = static_cast<double>(base.w * base.h) / static_cast<double>(r.w * r.h);
    value += r.sign * compensation * ii.rect_sum(x0, y0, x0 + r.w, y0 + r.h);
  }
  return value;
}

bool window_passes(const IntegralImage& ii, const CascadeModel& model, int ox, int oy, double scale) {
  for (const CascadeStage& stage : model.stages) {
    double votes = 0.0;
    for (const WeakClassifier& weak : stage.weak) {
      const double f = eval_feature(ii, weak.feature, ox, oy, scale);
      if (weak.polarity * f < weak.polarity * weak.threshold) votes += weak.vote;
    }
    if (votes < stage.threshold) return false;
  }
  return true;
}

CascadeModel parse_cascade(std::istream& in) {
  CascadeModel model;
  bool have_window = false;
  std::string raw;
  int line_no = 0;
  auto syntax = [&](const std::string& msg) {
    return Error(ErrorCode::kSyntax, fmt::format("line {}: {}", line_no, msg));
  };
  // Remaining rect lines owed to the most recent `weak` line.
  std::size_t pending_rects = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream line(raw.substr(0, raw.find('#')));
    std::string keyword;
    if (!(line >> keyword)) continue;
    if (keyword == "window") {
      if (have_window) throw syntax("duplicate window line");
      if (!(line >> model.window_width >> model.window_height)) throw syntax("expected 'window W H'");
      have_window = true;
    } else if (keyword == "stage") {
      if (!have_window) throw syntax("stage before window");
      if (pending_rects) throw syntax("stage started before the previous feature's rect lines");
      CascadeStage stage;
      if (!(line >> stage.threshold)) throw syntax("expected 'stage T'");
      model.stages.push_back(stage);
    } else if (keyword == "weak") {
      if (model.stages.empty()) throw syntax("weak classifier outside a stage");
      if (pending_rects) throw syntax("weak started before the previous feature's rect lines");
      WeakClassifier weak;
      std::string kind;
      long count = 0;
      if (!(line >> weak.vote >> weak.polarity >> weak.threshold >> kind >> count) || count < 1) {
        throw syntax("expected 'weak vote polarity threshold kind n'");
      }
      if (kind == "two-rect") {
        weak.feature.kind = HaarKind::kTwoRect;
      } else if (kind == "three-rect") {
        weak.feature.kind = HaarKind::kThreeRect;
      } else if (kind == "four-rect") {
        weak.feature.kind = HaarKind::kFourRect;
      } else {
        throw syntax(fmt::format("unknown feature kind '{}'", kind));
      }
      model.stages.back().weak.push_back(weak);
      pending_rects = static_cast<std::size_t>(count);
    } else if (keyword == "rect") {
      if (!pending_rects) throw syntax("rect line without a pending weak classifier");
      HaarRect r;
      if (!(line >> r.x >> r.y >> r.w >> r.h >> r.sign)) throw syntax("expected 'rect x y w h sign'");
      model.stages.back().weak.back().feature.rects.push_back(r);
      --pending_rects;
    } else {
      throw syntax(fmt::format("unknown keyword '{}'", keyword));
    }
    std::string extra;
    if (line >> extra) throw syntax(fmt::format("unexpected trailing token '{}'", extra));
  }
  if (pending_rects) {
    ++line_no;
    throw syntax("file ends before all rect lines of the last feature");
  }
  if (!have_window) throw Error(ErrorCode::kSyntax, "missing window line");
  validate_cascade(model);
  return model;
}

CascadeModel load_cascade(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, fmt::format("cannot open {}", path));
  try {
    return parse_cascade(in);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path, e.what()));
  }
}

void write_cascade(const CascadeModel& model, std::ostream& out) {
  out << fmt::format("window {} {}\n", model.window_width, model.window_height);
  for (const CascadeStage& stage : model.stages) {
    out << fmt::format("stage {:.17g}\n", stage.threshold);
    for (const WeakClassifier& weak : stage.weak) {
      out << fmt::format("weak {:.17g} {} {:.17g} {} {}\n", weak.vote, weak.polarity, weak.threshold,
                         kind_name(weak.feature.kind), weak.feature.rects.size());
      for (const HaarRect& r : weak.feature.rects) {
        out << fmt::format("rect {} {} {} {} {}\n", r.x, r.y, r.w, r.h, r.sign);
      }
    }
  }
}

void save_cascade(const CascadeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kUnwritablePath, fmt::format("cannot write {}", path));
  write_cascade(model, out);
}

double intersection_over_union(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

bool box_order(const Box& a, const Box& b) {
  return std::tie(a.y, a.x, a.scale, a.w, a.h) < std::tie(b.y, b.x, b.scale, b.w, b.h);
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) i = parent[i] = parent[parent[i]];
  return i;
}

}  // namespace

std::vector<Box> merge_detections(std::vector<Box> boxes, double min_overlap) {
  std::sort(boxes.begin(), boxes.end(), box_order);
  std::vector<std::size_t> parent(boxes.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (intersection_over_union(boxes[i], boxes[j]) >= min_overlap) {
        const std::size_t ri = find_root(parent, i);
        const std::size_t rj = find_root(parent, j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }
  std::vector<Box> sums(boxes.size(), Box{0, 0, 0, 0, 0});
  std::vector<int> counts(boxes.size(), 0);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const std::size_t r = find_root(parent, i);
    sums[r].x += boxes[i].x;
    sums[r].y += boxes[i].y;
    sums[r].w += boxes[i].w;
    sums[r].h += boxes[i].h;
    sums[r].scale += boxes[i].scale;
    ++counts[r];
  }
  std::vector<Box> merged;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (counts[i] == 0) continue;
    const double n = counts[i];
    merged.push_back({sums[i].x / n, sums[i].y / n, sums[i].w / n, sums[i].h / n, sums[i].scale / n});
  }
  std::sort(merged.begin(), merged.end(), box_order);
  return merged;
}

std::vector<Box> raw_detections(const GrayImage& img, const CascadeModel& model, const DetectParams& params) {
  if (img.width() < model.window_width || img.height() < model.window_height) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("image {}x{} smaller than the {}x{} detector window", img.width(), img.height(),
                            model.window_width, model.window_height));
  }
  if (!(params.scale_step > 1.0) || params.window_stride < 1) {
    throw Error(ErrorCode::kInvalidArgument, "scale_step must exceed 1 and stride must be >= 1");
  }
  const IntegralImage ii(img);
  std::vector<Box> found;
  for (double scale = 1.0;; scale *= params.scale_step) {
    const int ww = round_int(model.window_width * scale);
    const int wh = round_int(model.window_height * scale);
    if (ww > img.width() || wh > img.height()) break;
    const int stride = std::max(1, round_int(params.window_stride * scale));
    for (int oy = 0; oy + wh <= img.height(); oy += stride) {
      for (int ox = 0; ox + ww <= img.width(); ox += stride) {
        if (window_passes(ii, model, ox, oy, scale)) {
          found.push_back({double(ox), double(oy), double(ww), double(wh), scale});
        }
      }
    }
  }
  std::sort(found.begin(), found.end(), box_order);
  return found;
}

std::vector<Box> detect_faces(const GrayImage& img, const CascadeModel& model, const DetectParams& params) {
  return merge_detections(raw_detections(img, model, params), params.min_overlap);
}

GrayImage crop_chip(const GrayImage& img, const Box& box, int chip_size) {
  const int x0 = round_int(box.x);
  const int y0 = round_int(box.y);
  const int w = round_int(box.w);
  const int h = round_int(box.h);
  if (w < 1 || h < 1 || x0 < 0 || y0 < 0 || x0 + w > img.width() || y0 + h > img.height()) {
    throw Error(ErrorCode::kOutOfBounds, fmt::format("box ({}, {}, {}x{}) outside the {}x{} image", x0, y0, w, h,
                                                     img.width(), img.height()));
  }
  GrayImage crop(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) crop(x, y) = img(x0 + x, y0 + y);
  }
  return resize_bilinear(crop, chip_size, chip_size);
}

}  // namespace facerec
