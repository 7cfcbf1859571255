#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "facerec/illum.hpp"
#include "facerec/image.hpp"
#include "facerec/weight_matrix.hpp"

namespace facerec {

struct Translation {
  int dx = 0;
  int dy = 0;
  bool operator==(const Translation&) const = default;
};

/// All integer translations with |dx|, |dy| <= radius, ordered row-major (dy outer).
class TransformSet {
 public:
  explicit TransformSet(int radius);

  int radius() const noexcept { return radius_; }
  std::size_t size() const noexcept { return shifts_.size(); }
  const Translation& operator[](std::size_t j) const { return shifts_[j]; }
  const std::vector<Translation>& shifts() const noexcept { return shifts_; }
  std::size_t index_of(int dx, int dy) const;
  std::size_t identity_index() const { return index_of(0, 0); }

 private:
  int radius_;
  std::vector<Translation> shifts_;
};

/// Transformation spread function: non-negative weights over a TransformSet.
struct Tsf {
  std::vector<double> weights;

  static Tsf one_hot(const TransformSet& ts, std::size_t j);
  double mass() const;
};

/// Columns are the vectorized image under each transform (N x N_T).
struct DictionaryMatrix {
  int width = 0;
  int height = 0;
  Eigen::MatrixXd columns;

  Eigen::Index rows() const { return columns.rows(); }
  Eigen::Index cols() const { return columns.cols(); }
};

struct SolverConfig {
  /// L1 penalty; unset selects 1e-3 * max|A^T W^2 p|.
  std::optional<double> beta;
  int max_iters = 2000;
  double rel_tol = 1e-12;
  int outer_iters = 9;
};

inline constexpr double kBetaScale = 1e-3;

/// img shifted by (dx, dy) with replicate-edge fill: out(x, y) = img(x - dx, y - dy).
GrayImage shift_image(const GrayImage& img, int dx, int dy);

/// Inner product of shift_image(img, dx, dy) with a pixel vector, without materializing the shift.
double shifted_dot(const GrayImage& img, int dx, int dy, std::span<const double> values);

DictionaryMatrix build_dictionary(const GrayImage& img, const TransformSet& ts);

/// Sum over j of tsf_j * shift_j(img).
GrayImage apply_tsf(const GrayImage& img, const Tsf& tsf, const TransformSet& ts);

/// ||W (p - A T)||^2 evaluated directly.
double smooth_objective(std::span<const double> probe, const DictionaryMatrix& A,
                        const WeightMatrix& W, std::span<const double> tsf);

/// Gradient of smooth_objective: 2 A^T W^2 (A T - p).
std::vector<double> smooth_gradient(std::span<const double> probe, const DictionaryMatrix& A,
                                    const WeightMatrix& W, std::span<const double> tsf);

/// Weighted least squares in Gram form: f(T) = T'GT - 2c'T + k.
struct QuadraticModel {
  Eigen::MatrixXd gram;    // A^T W^2 A
  Eigen::VectorXd linear;  // A^T W^2 p
  double constant = 0.0;   // p^T W^2 p

  double value(const Eigen::VectorXd& t) const;
};

QuadraticModel make_quadratic(std::span<const double> probe, const DictionaryMatrix& A, const WeightMatrix& W);

struct TsfSolution {
  Tsf tsf;
  double residual = 0.0;   // quadratic term at the returned T
  double objective = 0.0;  // residual + beta * ||T||_1
  double beta = 0.0;
  int iterations = 0;
  std::vector<double> trace;  // objective per accepted iterate, starting at the initial one
};

/// Non-negative lasso by FISTA with objective-increase restart, warm-started at `initial`
/// (zero when empty). Never returns an iterate worse than the initial one.
TsfSolution solve_quadratic(const QuadraticModel& model, double beta, const SolverConfig& cfg,
                            std::span<const double> initial = {});

/// Minimizes ||W(p - A T)||^2 + beta ||T||_1 subject to T >= 0.
TsfSolution solve_tsf(const GrayImage& probe, const DictionaryMatrix& A, const WeightMatrix& W,
                      const SolverConfig& cfg);

/// Per-gallery-image precomputation for the joint blur + illumination problem:
/// cross Gram blocks A_i^T W^2 A_j for the nine basis dictionaries.
class JointModel {
 public:
  JointModel(const BasisSet& basis, const TransformSet& ts, const WeightMatrix& W);

  const BasisSet& basis() const noexcept { return basis_; }
  const TransformSet& transforms() const noexcept { return ts_; }
  std::size_t num_transforms() const noexcept { return ts_.size(); }

  /// G_ij block of the stacked Gram.
  auto block(int i, int j) const {
    const auto n = static_cast<Eigen::Index>(ts_.size());
    return cross_gram_.block(i * n, j * n, n, n);
  }

  /// c_i = A_i^T W^2 p for every basis image, stacked.
  Eigen::VectorXd linear_terms(const GrayImage& probe) const;
  double probe_energy(const GrayImage& probe) const;
  const std::vector<double>& squared_weights() const noexcept { return w2_; }

 private:
  BasisSet basis_;
  TransformSet ts_;
  std::vector<double> w2_;
  Eigen::MatrixXd cross_gram_;
};

struct JointSolution {
  Tsf tsf;
  IllumCoeffs coeffs{};
  double beta = 0.0;
  double residual = 0.0;
  double objective = 0.0;
  std::vector<double> objective_trace;  // one entry per outer round
};

/// Alternating minimization of ||W(p - sum_i alpha_i A_i T)||^2 + beta ||T||_1, T >= 0.
JointSolution solve_joint(const GrayImage& probe, const JointModel& model, const SolverConfig& cfg);
JointSolution solve_joint(const GrayImage& probe, const BasisSet& basis, const TransformSet& ts,
                          const WeightMatrix& W, const SolverConfig& cfg);

/// Full joint objective evaluated directly from the basis images.
double joint_objective(const GrayImage& probe, const BasisSet& basis, const TransformSet& ts,
                       const WeightMatrix& W, const Tsf& tsf, const IllumCoeffs& coeffs, double beta);

/// Blur and relight a gallery image: apply_tsf(relight(harmonic_basis(g, normals), coeffs), tsf).
GrayImage transform_gallery(const GrayImage& g, const Tsf& tsf, const IllumCoeffs& coeffs,
                            const TransformSet& ts, const NormalMap& normals);

}  // namespace facerec
