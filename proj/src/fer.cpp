#include "facerec/fer.hpp"

#include <fmt/format.h>

#include "facerec/error.hpp"

namespace facerec {

SubbandSet dwt2(const GrayImage& img) {
  if (img.width() < 2 || img.height() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("wavelet transform needs at least 2x2, got {}x{}", img.width(), img.height()));
  }
  const int hw = (img.width() + 1) / 2;
  const int hh = (img.height() + 1) / 2;
  SubbandSet out{GrayImage(hw, hh), GrayImage(hw, hh), GrayImage(hw, hh), GrayImage(hw, hh), img.width(),
                 img.height()};
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < hw; ++x) {
      // clamped() realizes the replicate padding of odd edges.
      const double a = img.clamped(2 * x, 2 * y);
      const double b = img.clamped(2 * x + 1, 2 * y);
      const double c = img.clamped(2 * x, 2 * y + 1);
      const double d = img.clamped(2 * x + 1, 2 * y + 1);
      out.ll(x, y) = ((a + b) + (c + d)) / 2.0;
      out.lh(x, y) = ((a + b) - (c + d)) / 2.0;
      out.hl(x, y) = ((a - b) + (c - d)) / 2.0;
      out.hh(x, y) = ((a - b) - (c - d)) / 2.0;
    }
  }
  return out;
}

GrayImage idwt2(const SubbandSet& sub) {
  const int hw = sub.ll.width();
  const int hh = sub.ll.height();
  for (const GrayImage* band : {&sub.lh, &sub.hl, &sub.hh}) {
    if (band->width() != hw || band->height() != hh) {
      throw Error(ErrorCode::kDimensionMismatch, "subband dimensions disagree");
    }
  }
  if (sub.source_width < 2 * hw - 1 || sub.source_width > 2 * hw || sub.source_height < 2 * hh - 1 ||
      sub.source_height > 2 * hh) {
    throw Error(ErrorCode::kDimensionMismatch, "recorded source size does not match the subbands");
  }
  GrayImage out(sub.source_width, sub.source_height);
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < hw; ++x) {
      const double ll = sub.ll(x, y);
      const double lh = sub.lh(x, y);
      const double hl = sub.hl(x, y);
      const double hhv = sub.hh(x, y);
      const double samples[4] = {((ll + lh) + (hl + hhv)) / 2.0, ((ll + lh) - (hl + hhv)) / 2.0,
                                 ((ll - lh) + (hl - hhv)) / 2.0, ((ll - lh) - (hl - hhv)) / 2.0};
      for (int k = 0; k < 4; ++k) {
        const int px = 2 * x + (k & 1);
        const int py = 2 * y + (k >> 1);
        if (px < sub.source_width && py < sub.source_height) out(px, py) = samples[k];
      }
    }
  }
  return out;
}

GrayImage neutralize(const GrayImage& img, double strength) {
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("FER strength must lie in [0, 1], got {}", strength));
  }
  if (strength == 0.0) return img;
  SubbandSet sub = dwt2(img);
  const double keep = 1.0 - strength;
  for (GrayImage* band : {&sub.lh, &sub.hl, &sub.hh}) {
    for (double& v : band->pixels()) v *= keep;
  }
  return idwt2(sub);
}

}  // namespace facerec
