#pragma once

#include "facerec/image.hpp"

namespace facerec {

/// Single-level orthonormal Haar decomposition. Odd inputs are replicate-padded
/// on the right/bottom; the original size is kept so the inverse can crop.
struct SubbandSet {
  GrayImage ll;
  GrayImage lh;
  GrayImage hl;
  GrayImage hh;
  int source_width = 0;
  int source_height = 0;
};

SubbandSet dwt2(const GrayImage& img);
GrayImage idwt2(const SubbandSet& sub);

/// Attenuates the LH/HL/HH bands by (1 - strength) and reconstructs.
GrayImage neutralize(const GrayImage& img, double strength = 1.0);

}  // namespace facerec
