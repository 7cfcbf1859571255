#include "facerec/tsf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "facerec/error.hpp"

namespace facerec {

TransformSet::TransformSet(int radius) : radius_(radius) {
  if (radius < 0) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("transform radius must be >= 0, got {}", radius));
  }
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) shifts_.push_back({dx, dy});
  }
}

std::size_t TransformSet::index_of(int dx, int dy) const {
  if (std::abs(dx) > radius_ || std::abs(dy) > radius_) {
    throw Error(ErrorCode::kOutOfBounds, fmt::format("translation ({}, {}) outside radius {}", dx, dy, radius_));
  }
  const int side = 2 * radius_ + 1;
  return static_cast<std::size_t>((dy + radius_) * side + dx + radius_);
}

Tsf Tsf::one_hot(const TransformSet& ts, std::size_t j) {
  Tsf out{std::vector<double>(ts.size(), 0.0)};
  out.weights.at(j) = 1.0;
  return out;
}

double Tsf::mass() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

GrayImage shift_image(const GrayImage& img, int dx, int dy) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out(x, y) = img.clamped(x - dx, y - dy);
  }
  return out;
}

double shifted_dot(const GrayImage& img, int dx, int dy, std::span<const double> values) {
  const int w = img.width();
  const int h = img.height();
  auto src = img.pixels();
  // Split each row into the clamped-left, interior and clamped-right runs.
  const int lo = std::clamp(dx, 0, w);
  const int hi = std::clamp(w + dx, lo, w);
  double acc = 0.0;
  for (int y = 0; y < h; ++y) {
    const int sy = std::clamp(y - dy, 0, h - 1);
    const double* row = src.data() + static_cast<std::size_t>(sy) * w;
    const double* val = values.data() + static_cast<std::size_t>(y) * w;
    double left = 0.0;
    for (int x = 0; x < lo; ++x) left += val[x];
    double mid = 0.0;
    for (int x = lo; x < hi; ++x) mid += row[x - dx] * val[x];
    double right = 0.0;
    for (int x = hi; x < w; ++x) right += val[x];
    acc += left * row[0] + mid + right * row[w - 1];
  }
  return acc;
}

DictionaryMatrix build_dictionary(const GrayImage& img, const TransformSet& ts) {
  if (2 * ts.radius() >= std::min(img.width(), img.height())) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("transform radius {} too large for a {}x{} image", ts.radius(), img.width(), img.height()));
  }
  DictionaryMatrix dict{img.width(), img.height(),
                        Eigen::MatrixXd(static_cast<Eigen::Index>(img.size()), static_cast<Eigen::Index>(ts.size()))};
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const auto [dx, dy] = ts[j];
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        dict.columns(static_cast<Eigen::Index>(y) * img.width() + x, static_cast<Eigen::Index>(j)) =
            img.clamped(x - dx, y - dy);
      }
    }
  }
  return dict;
}

GrayImage apply_tsf(const GrayImage& img, const Tsf& tsf, const TransformSet& ts) {
  if (tsf.weights.size() != ts.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("TSF has {} weights but the transform set has {}", tsf.weights.size(), ts.size()));
  }
  GrayImage out(img.width(), img.height());
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const double t = tsf.weights[j];
    if (t == 0.0) continue;
    const auto [dx, dy] = ts[j];
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) out(x, y) += t * img.clamped(x - dx, y - dy);
    }
  }
  return out;
}

namespace {

void check_problem(std::span<const double> probe, const DictionaryMatrix& A, const WeightMatrix& W,
                   std::size_t tsf_size) {
  if (static_cast<Eigen::Index>(probe.size()) != A.rows() || W.size() != probe.size() ||
      (tsf_size != 0 && static_cast<Eigen::Index>(tsf_size) != A.cols())) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("probe {} / dictionary {}x{} / weights {} disagree", probe.size(), A.rows(),
                            A.cols(), W.size()));
  }
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

}  // namespace

double smooth_objective(std::span<const double> probe, const DictionaryMatrix& A, const WeightMatrix& W,
                        std::span<const double> tsf) {
  check_problem(probe, A, W, tsf.size());
  const Eigen::VectorXd r = as_vector(probe) - A.columns * as_vector(tsf);
  return (r.array() * as_vector(W.diagonal()).array()).square().sum();
}

std::vector<double> smooth_gradient(std::span<const double> probe, const DictionaryMatrix& A,
                                    const WeightMatrix& W, std::span<const double> tsf) {
  check_problem(probe, A, W, tsf.size());
  const Eigen::VectorXd w = as_vector(W.diagonal());
  const Eigen::VectorXd r = (A.columns * as_vector(tsf) - as_vector(probe)).cwiseProduct(w).cwiseProduct(w);
  const Eigen::VectorXd g = 2.0 * (A.columns.transpose() * r);
  return {g.data(), g.data() + g.size()};
}

double QuadraticModel::value(const Eigen::VectorXd& t) const {
  return t.dot(gram * t) - 2.0 * linear.dot(t) + constant;
}

QuadraticModel make_quadratic(std::span<const double> probe, const DictionaryMatrix& A, const WeightMatrix& W) {
  check_problem(probe, A, W, 0);
  const Eigen::VectorXd w = as_vector(W.diagonal());
  const Eigen::MatrixXd weighted = w.asDiagonal() * A.columns;
  const Eigen::VectorXd wp = w.cwiseProduct(as_vector(probe));
  QuadraticModel model;
  model.gram = weighted.transpose() * weighted;
  model.linear = weighted.transpose() * wp;
  model.constant = wp.squaredNorm();
  return model;
}

namespace {

double largest_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(sym.rows()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 20; ++it) {
    const Eigen::VectorXd w = sym * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    lambda = v.dot(w);
    v = w / norm;
  }
  return lambda;
}

}  // namespace

TsfSolution solve_quadratic(const QuadraticModel& model, double beta, const SolverConfig& cfg,
                            std::span<const double> initial) {
  if (cfg.max_iters < 1 || !(cfg.rel_tol > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "solver needs max_iters >= 1 and rel_tol > 0");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("beta must be finite and >= 0, got {}", beta));
  }
  const Eigen::Index n = model.gram.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (!initial.empty()) {
    if (static_cast<Eigen::Index>(initial.size()) != n) {
      throw Error(ErrorCode::kDimensionMismatch, "initial TSF has the wrong length");
    }
    x = as_vector(initial).cwiseMax(0.0);
  }
  const Eigen::VectorXd& c = model.linear;
  // Smooth part from a cached product g = G t.
  auto smooth = [&](const Eigen::VectorXd& t, const Eigen::VectorXd& g) {
    return t.dot(g) - 2.0 * c.dot(t) + model.constant;
  };

  Eigen::VectorXd gx = model.gram * x;
  double fx = smooth(x, gx) + beta * x.sum();
  TsfSolution out;
  out.beta = beta;
  out.trace.push_back(fx);

  // Lipschitz constant of the smooth gradient 2(Gt - c). The power estimate is
  // raised by backtracking whenever the quadratic upper bound fails.
  double lipschitz = 2.0 * largest_eigenvalue(model.gram) * 1.05;
  if (lipschitz > 0.0) {
    Eigen::VectorXd y = x;
    Eigen::VectorXd gy = gx;
    Eigen::VectorXd z(n);
    Eigen::VectorXd gz(n);
    double t = 1.0;
    // Proximal step from (from, g_from); fills z, gz and returns F(z).
    auto prox_step = [&](const Eigen::VectorXd& from, const Eigen::VectorXd& g_from) {
      const Eigen::VectorXd grad = 2.0 * (g_from - c);
      const double smooth_from = smooth(from, g_from);
      for (;;) {
        const double step = 1.0 / lipschitz;
        z = ((from - step * grad).array() - beta * step).cwiseMax(0.0);
        gz.noalias() = model.gram * z;
        const double smooth_z = smooth(z, gz);
        const Eigen::VectorXd d = z - from;
        const double bound = smooth_from + grad.dot(d) + 0.5 * lipschitz * d.squaredNorm();
        if (smooth_z <= bound + 1e-12 * std::abs(bound) || lipschitz > 1e300) return smooth_z + beta * z.sum();
        lipschitz *= 2.0;
      }
    };

    for (int it = 0; it < cfg.max_iters; ++it) {
      double fz = prox_step(y, gy);
      if (fz > fx) {
        // Momentum overshot: restart from the current iterate.
        t = 1.0;
        fz = prox_step(x, gx);
        if (fz >= fx) break;
      }
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double momentum = (t - 1.0) / t_next;
      y = z + momentum * (z - x);
      gy = gz + momentum * (gz - gx);
      x.swap(z);
      gx.swap(gz);
      t = t_next;
      out.iterations = it + 1;
      out.trace.push_back(fz);
      const double change = fx - fz;
      const double previous = fx;
      fx = fz;
      if (change <= cfg.rel_tol * std::abs(previous)) break;
    }
  }

  out.tsf.weights.assign(x.data(), x.data() + n);
  out.objective = fx;
  out.residual = fx - beta * x.sum();
  return out;
}

TsfSolution solve_tsf(const GrayImage& probe, const DictionaryMatrix& A, const WeightMatrix& W,
                      const SolverConfig& cfg) {
  const auto p = probe.pixels();
  check_problem(p, A, W, 0);
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(p.begin(), p.end(), finite) || !A.columns.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "probe or dictionary contains non-finite values");
  }
  const QuadraticModel model = make_quadratic(p, A, W);
  const double beta = cfg.beta.value_or(kBetaScale * model.linear.cwiseAbs().maxCoeff());
  TsfSolution sol = solve_quadratic(model, beta, cfg);
  sol.residual = smooth_objective(p, A, W, sol.tsf.weights);
  sol.objective = sol.residual + beta * sol.tsf.mass();
  return sol;
}

JointModel::JointModel(const BasisSet& basis, const TransformSet& ts, const WeightMatrix& W)
    : basis_(basis), ts_(ts), w2_(W.squared()) {
  if (W.size() != basis.images()[0].size()) {
    throw Error(ErrorCode::kDimensionMismatch, "weights and basis images differ in size");
  }
  const auto n = static_cast<Eigen::Index>(ts.size());
  const Eigen::Map<const Eigen::VectorXd> w(W.diagonal().data(), static_cast<Eigen::Index>(W.size()));
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(W.size()), kNumHarmonics * n);
  for (int i = 0; i < kNumHarmonics; ++i) {
    stacked.middleCols(i * n, n) = w.asDiagonal() * build_dictionary(basis[i], ts).columns;
  }
  cross_gram_ = Eigen::MatrixXd::Zero(stacked.cols(), stacked.cols());
  cross_gram_.selfadjointView<Eigen::Lower>().rankUpdate(stacked.transpose());
  cross_gram_ = cross_gram_.selfadjointView<Eigen::Lower>();
}

Eigen::VectorXd JointModel::linear_terms(const GrayImage& probe) const {
  if (probe.size() != w2_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "probe size does not match the joint model");
  }
  std::vector<double> weighted(w2_.size());
  auto p = probe.pixels();
  for (std::size_t k = 0; k < weighted.size(); ++k) weighted[k] = w2_[k] * p[k];
  const auto n = static_cast<Eigen::Index>(ts_.size());
  Eigen::VectorXd c(kNumHarmonics * n);
  for (int i = 0; i < kNumHarmonics; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto [dx, dy] = ts_[static_cast<std::size_t>(j)];
      c(i * n + j) = shifted_dot(basis_[i], dx, dy, weighted);
    }
  }
  return c;
}

double JointModel::probe_energy(const GrayImage& probe) const {
  auto p = probe.pixels();
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) acc += w2_[k] * p[k] * p[k];
  return acc;
}

namespace {

using Mat9 = Eigen::Matrix<double, kNumHarmonics, kNumHarmonics>;
using Vec9 = Eigen::Matrix<double, kNumHarmonics, 1>;

// Normal equations of the illumination fit against the T-blurred basis.
void illumination_system(const JointModel& m, const Eigen::VectorXd& c, const Eigen::VectorXd& t, Mat9& h, Vec9& r) {
  const auto n = static_cast<Eigen::Index>(m.num_transforms());
  for (int i = 0; i < kNumHarmonics; ++i) {
    r(i) = c.segment(i * n, n).dot(t);
    for (int j = i; j < kNumHarmonics; ++j) {
      h(i, j) = t.dot(m.block(i, j) * t);
      h(j, i) = h(i, j);
    }
  }
}

double joint_value(double energy, const Mat9& h, const Vec9& r, const Vec9& alpha, double beta,
                   const Eigen::VectorXd& t) {
  return energy - 2.0 * alpha.dot(r) + alpha.dot(h * alpha) + beta * t.sum();
}

}  // namespace

JointSolution solve_joint(const GrayImage& probe, const JointModel& model, const SolverConfig& cfg) {
  if (cfg.outer_iters < 1) throw Error(ErrorCode::kInvalidArgument, "outer_iters must be >= 1");
  const auto p = probe.pixels();
  if (!std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::kNonFinite, "probe contains non-finite values");
  }
  const auto n = static_cast<Eigen::Index>(model.num_transforms());
  const Eigen::VectorXd c = model.linear_terms(probe);
  const double energy = model.probe_energy(probe);

  Eigen::VectorXd t = Eigen::VectorXd::Zero(n);
  t(static_cast<Eigen::Index>(model.transforms().identity_index())) = 1.0;
  Vec9 alpha = Vec9::Zero();
  std::optional<double> beta = cfg.beta;

  JointSolution out;
  Mat9 h;
  Vec9 r;
  for (int round = 0; round < cfg.outer_iters; ++round) {
    // Illumination step with the TSF held fixed.
    illumination_system(model, c, t, h, r);
    Mat9 damped = h;
    damped.diagonal().array() += kIlluminationDamping;
    const Vec9 candidate = damped.ldlt().solve(r);
    const double b = beta.value_or(0.0);
    if (round == 0 || joint_value(energy, h, r, candidate, b, t) <= joint_value(energy, h, r, alpha, b, t)) {
      alpha = candidate;
    }

    // Blur step on the dictionary of the relit image.
    QuadraticModel relit;
    relit.gram = Eigen::MatrixXd::Zero(n, n);
    relit.linear = Eigen::VectorXd::Zero(n);
    relit.constant = energy;
    for (int i = 0; i < kNumHarmonics; ++i) {
      if (alpha(i) == 0.0) continue;
      relit.linear += alpha(i) * c.segment(i * n, n);
      for (int j = 0; j < kNumHarmonics; ++j) {
        if (alpha(j) != 0.0) relit.gram += (alpha(i) * alpha(j)) * model.block(i, j);
      }
    }
    if (!beta) beta = kBetaScale * relit.linear.cwiseAbs().maxCoeff();
    const double before = joint_value(energy, h, r, alpha, *beta, t);
    const TsfSolution step = solve_quadratic(relit, *beta, cfg, {t.data(), static_cast<std::size_t>(n)});
    const Eigen::VectorXd candidate_t = Eigen::Map<const Eigen::VectorXd>(step.tsf.weights.data(), n);
    Mat9 h_next;
    Vec9 r_next;
    illumination_system(model, c, candidate_t, h_next, r_next);
    const double after = joint_value(energy, h_next, r_next, alpha, *beta, candidate_t);
    // Keep the old T when rounding makes the new one look worse under this evaluation.
    if (round == 0 || after <= before) {
      t = candidate_t;
      h = h_next;
      r = r_next;
      out.objective_trace.push_back(after);
    } else {
      out.objective_trace.push_back(before);
    }
  }

  out.tsf.weights.assign(t.data(), t.data() + n);
  for (int i = 0; i < kNumHarmonics; ++i) out.coeffs[static_cast<std::size_t>(i)] = alpha(i);
  out.beta = *beta;
  out.objective = out.objective_trace.back();
  out.residual = out.objective - out.beta * t.sum();
  return out;
}

JointSolution solve_joint(const GrayImage& probe, const BasisSet& basis, const TransformSet& ts,
                          const WeightMatrix& W, const SolverConfig& cfg) {
  if (probe.width() != basis.width() || probe.height() != basis.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "probe and basis differ in size");
  }
  return solve_joint(probe, JointModel(basis, ts, W), cfg);
}

double joint_objective(const GrayImage& probe, const BasisSet& basis, const TransformSet& ts,
                       const WeightMatrix& W, const Tsf& tsf, const IllumCoeffs& coeffs, double beta) {
  const GrayImage model = apply_tsf(relight_linear(basis, coeffs), tsf, ts);
  auto p = probe.pixels();
  auto q = model.pixels();
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = W[k] * (p[k] - q[k]);
    acc += d * d;
  }
  return acc + beta * tsf.mass();
}

GrayImage transform_gallery(const GrayImage& g, const Tsf& tsf, const IllumCoeffs& coeffs,
                            const TransformSet& ts, const NormalMap& normals) {
  return apply_tsf(relight(harmonic_basis(g, normals), coeffs), tsf, ts);
}

}  // namespace facerec
