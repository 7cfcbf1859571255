#pragma once

#include <span>
#include <vector>

namespace facerec {

/// Diagonal per-pixel weighting of a residual, stored as its diagonal.
/// Entries are non-negative and not all zero.
class WeightMatrix {
 public:
  explicit WeightMatrix(std::vector<double> diagonal);

  /// All-ones weighting for an image of n pixels.
  static WeightMatrix identity(std::size_t n);

  std::size_t size() const noexcept { return diagonal_.size(); }
  double operator[](std::size_t i) const { return diagonal_[i]; }
  std::span<const double> diagonal() const noexcept { return diagonal_; }

  /// Squared diagonal, the weighting that enters the normal equations.
  std::vector<double> squared() const;

 private:
  std::vector<double> diagonal_;
};

}  // namespace facerec
