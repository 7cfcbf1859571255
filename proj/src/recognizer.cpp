#include "facerec/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <fmt/format.h>

#include "facerec/error.hpp"
#include "facerec/fer.hpp"
#include "facerec/parallel.hpp"

namespace facerec {

const char* to_string(Pipeline p) {
  switch (p) {
    case Pipeline::kBrfr: return "brfr";
    case Pipeline::kBirfr: return "birfr";
    case Pipeline::kBiefr: return "biefr";
  }
  return "?";
}

Pipeline parse_pipeline(const std::string& name) {
  if (name == "brfr") return Pipeline::kBrfr;
  if (name == "birfr") return Pipeline::kBirfr;
  if (name == "biefr") return Pipeline::kBiefr;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown algorithm '{}' (brfr|birfr|biefr)", name));
}

struct Recognizer::EntryCache {
  std::once_flag chip_once;
  GrayImage chip;
  LbpDescriptor descriptor;  // of the untransformed chip
  std::once_flag gram_once;
  Eigen::MatrixXd gram;  // A^T W^2 A of the chip's own dictionary
  std::once_flag joint_once;
  std::unique_ptr<JointModel> joint;
};

Recognizer::Recognizer(std::vector<GalleryEntry> gallery, RecognizerConfig cfg)
    : gallery_(std::move(gallery)), cfg_(std::move(cfg)), transforms_(cfg_.tsf_radius) {
  if (gallery_.empty()) throw Error(ErrorCode::kEmptyGallery, "gallery has no entries");
  const int w = gallery_.front().chip.width();
  const int h = gallery_.front().chip.height();
  for (const GalleryEntry& e : gallery_) {
    if (e.class_id.empty()) throw Error(ErrorCode::kInvalidArgument, "gallery entry with an empty class id");
    if (e.chip.width() != w || e.chip.height() != h) {
      throw Error(ErrorCode::kDimensionMismatch, "gallery chips must share one size");
    }
    auto it = std::find(classes_.begin(), classes_.end(), e.class_id);
    class_of_entry_.push_back(static_cast<std::size_t>(it - classes_.begin()));
    if (it == classes_.end()) classes_.push_back(e.class_id);
  }
  if (2 * cfg_.tsf_radius >= std::min(w, h)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("transform radius {} too large for {}x{} chips",
                                                         cfg_.tsf_radius, w, h));
  }
  if (!cfg_.block_weights) cfg_.block_weights = default_weight_map(cfg_.blocks_x, cfg_.blocks_y);
  if (cfg_.block_weights->blocks_x() != cfg_.blocks_x || cfg_.block_weights->blocks_y() != cfg_.blocks_y) {
    throw Error(ErrorCode::kDimensionMismatch, "block weight map does not match the descriptor grid");
  }
  if (!cfg_.pixel_weights) cfg_.pixel_weights = cfg_.block_weights->pixel_weights(w, h);
  if (cfg_.pixel_weights->size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
    throw Error(ErrorCode::kDimensionMismatch, "pixel weights do not match the chip size");
  }
  if (!cfg_.normals) cfg_.normals = default_normal_map(w, h);
  if (cfg_.normals->width() != w || cfg_.normals->height() != h) {
    throw Error(ErrorCode::kDimensionMismatch, "normal map does not match the chip size");
  }
  if (!(cfg_.fer_strength >= 0.0 && cfg_.fer_strength <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fer_strength must lie in [0, 1]");
  }
  for (std::size_t i = 0; i < gallery_.size(); ++i) {
    plain_.push_back(std::make_unique<EntryCache>());
    neutral_.push_back(std::make_unique<EntryCache>());
  }
}

Recognizer::~Recognizer() = default;
Recognizer::Recognizer(Recognizer&&) noexcept = default;

const Recognizer::EntryCache& Recognizer::cache(std::size_t entry, bool neutral, Pipeline pipeline) const {
  EntryCache& c = neutral ? *neutral_[entry] : *plain_[entry];
  std::call_once(c.chip_once, [&] {
    c.chip = neutral ? neutralize(gallery_[entry].chip, cfg_.fer_strength) : gallery_[entry].chip;
    c.descriptor = extract_descriptor(c.chip, cfg_.blocks_x, cfg_.blocks_y);
  });
  if (pipeline == Pipeline::kBrfr) {
    std::call_once(c.gram_once, [&] {
      const Eigen::Map<const Eigen::VectorXd> w(cfg_.pixel_weights->diagonal().data(),
                                                static_cast<Eigen::Index>(cfg_.pixel_weights->size()));
      const Eigen::MatrixXd weighted = w.asDiagonal() * build_dictionary(c.chip, transforms_).columns;
      c.gram = weighted.transpose() * weighted;
    });
  } else {
    std::call_once(c.joint_once, [&] {
      c.joint = std::make_unique<JointModel>(harmonic_basis(c.chip, *cfg_.normals), transforms_, *cfg_.pixel_weights);
    });
  }
  return c;
}

void Recognizer::prepare(Pipeline pipeline) const {
  parallel_for(gallery_.size(), cfg_.threads,
               [&](std::size_t i) { cache(i, pipeline == Pipeline::kBiefr, pipeline); });
}

Recognizer::EntryScore Recognizer::score_entry(const GrayImage& probe, const LbpDescriptor& probe_desc,
                                               std::size_t entry, Pipeline pipeline) const {
  const bool neutral = pipeline == Pipeline::kBiefr;
  const EntryCache& c = cache(entry, neutral, pipeline);
  EntryScore score{};
  GrayImage transformed;
  if (pipeline == Pipeline::kBrfr) {
    const std::vector<double> w2 = cfg_.pixel_weights->squared();
    std::vector<double> weighted(w2.size());
    auto p = probe.pixels();
    QuadraticModel model;
    model.gram = c.gram;
    model.constant = 0.0;
    for (std::size_t k = 0; k < w2.size(); ++k) {
      weighted[k] = w2[k] * p[k];
      model.constant += weighted[k] * p[k];
    }
    model.linear.resize(static_cast<Eigen::Index>(transforms_.size()));
    for (std::size_t j = 0; j < transforms_.size(); ++j) {
      model.linear(static_cast<Eigen::Index>(j)) = shifted_dot(c.chip, transforms_[j].dx, transforms_[j].dy, weighted);
    }
    const double beta = cfg_.solver.beta.value_or(kBetaScale * model.linear.cwiseAbs().maxCoeff());
    TsfSolution sol = solve_quadratic(model, beta, cfg_.solver);
    score.residual = sol.residual;
    score.tsf = std::move(sol.tsf);
    score.trace = std::move(sol.trace);
    transformed = apply_tsf(c.chip, score.tsf, transforms_);
  } else {
    JointSolution sol = solve_joint(probe, *c.joint, cfg_.solver);
    score.residual = sol.residual;
    score.coeffs = sol.coeffs;
    score.tsf = std::move(sol.tsf);
    score.trace = std::move(sol.objective_trace);
    transformed = apply_tsf(relight(c.joint->basis(), score.coeffs), score.tsf, transforms_);
  }
  score.lbp_distance =
      descriptor_distance(probe_desc, extract_descriptor(transformed, cfg_.blocks_x, cfg_.blocks_y), *cfg_.block_weights);
  return score;
}

MatchResult Recognizer::recognize(const GrayImage& probe, Pipeline pipeline) const {
  const GrayImage& ref = gallery_.front().chip;
  if (probe.width() != ref.width() || probe.height() != ref.height()) {
    throw Error(ErrorCode::kDimensionMismatch, fmt::format("probe is {}x{} but gallery chips are {}x{}",
                                                           probe.width(), probe.height(), ref.width(), ref.height()));
  }
  const GrayImage query = pipeline == Pipeline::kBiefr ? neutralize(probe, cfg_.fer_strength) : probe;
  const LbpDescriptor query_desc = extract_descriptor(query, cfg_.blocks_x, cfg_.blocks_y);

  std::vector<EntryScore> scores(gallery_.size());
  parallel_for(gallery_.size(), cfg_.threads,
               [&](std::size_t i) { scores[i] = score_entry(query, query_desc, i, pipeline); });

  const bool by_lbp = cfg_.rule == DecisionRule::kLbpDistance;
  auto decision = [by_lbp](double lbp, double residual) { return by_lbp ? lbp : residual; };
  MatchResult result;
  result.mode = pipeline;
  result.per_class.resize(classes_.size());
  std::vector<bool> seen(classes_.size(), false);
  for (std::size_t i = 0; i < gallery_.size(); ++i) {
    const std::size_t k = class_of_entry_[i];
    const ClassScore& current = result.per_class[k];
    // A class keeps its best entry; ties keep the earlier one.
    if (seen[k] && !(decision(scores[i].lbp_distance, scores[i].residual) <
                     decision(current.lbp_distance, current.residual))) {
      continue;
    }
    seen[k] = true;
    result.per_class[k] = {classes_[k], scores[i].lbp_distance, scores[i].residual, scores[i].tsf, scores[i].coeffs, i,
                           scores[i].trace};
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < result.per_class.size(); ++k) {
    const ClassScore& a = result.per_class[k];
    const ClassScore& b = result.per_class[best];
    if (decision(a.lbp_distance, a.residual) < decision(b.lbp_distance, b.residual)) best = k;
  }
  result.best_class = classes_[best];
  return result;
}

}  // namespace facerec
