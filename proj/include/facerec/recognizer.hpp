#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "facerec/illum.hpp"
#include "facerec/image.hpp"
#include "facerec/lbp.hpp"
#include "facerec/tsf.hpp"

namespace facerec {

enum class Pipeline { kBrfr, kBirfr, kBiefr };
enum class DecisionRule { kLbpDistance, kResidual };

const char* to_string(Pipeline p);
Pipeline parse_pipeline(const std::string& name);

inline constexpr double kRecognizerRelTol = 1e-8;

struct RecognizerConfig {
  int tsf_radius = 5;
  SolverConfig solver{.beta = std::nullopt, .max_iters = 2000, .rel_tol = kRecognizerRelTol, .outer_iters = 9};
  int blocks_x = 8;
  int blocks_y = 8;
  /// Block weights for matching; the pixel weights W default to their broadcast.
  std::optional<BlockWeightMap> block_weights;
  std::optional<WeightMatrix> pixel_weights;
  DecisionRule rule = DecisionRule::kLbpDistance;
  double fer_strength = 1.0;
  /// Workers for per-entry evaluation inside one recognition call.
  int threads = 1;
  std::optional<NormalMap> normals;
};

struct GalleryEntry {
  std::string class_id;
  GrayImage chip;
};

struct ClassScore {
  std::string class_id;
  double lbp_distance = 0.0;
  double residual = 0.0;
  Tsf tsf;
  IllumCoeffs coeffs{};  // all zero for the blur-only pipeline
  std::size_t entry = 0;  // gallery entry that produced the class score
  std::vector<double> trace;  // solver objective trace (FISTA iterates or outer rounds)
};

struct MatchResult {
  std::string best_class;
  std::vector<ClassScore> per_class;  // fixed class order
  Pipeline mode = Pipeline::kBrfr;
};

/// Identifies probes against a read-only gallery. Per-entry dictionaries and bases
/// are built on first use and kept; recognition is safe to call concurrently.
class Recognizer {
 public:
  Recognizer(std::vector<GalleryEntry> gallery, RecognizerConfig cfg);
  ~Recognizer();
  Recognizer(Recognizer&&) noexcept;

  MatchResult recognize(const GrayImage& probe, Pipeline pipeline) const;
  MatchResult recognize_brfr(const GrayImage& probe) const { return recognize(probe, Pipeline::kBrfr); }
  MatchResult recognize_birfr(const GrayImage& probe) const { return recognize(probe, Pipeline::kBirfr); }
  MatchResult recognize_biefr(const GrayImage& probe) const { return recognize(probe, Pipeline::kBiefr); }

  const std::vector<GalleryEntry>& gallery() const noexcept { return gallery_; }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  const RecognizerConfig& config() const noexcept { return cfg_; }
  const BlockWeightMap& block_weights() const noexcept { return *cfg_.block_weights; }
  const WeightMatrix& pixel_weights() const noexcept { return *cfg_.pixel_weights; }
  const TransformSet& transforms() const noexcept { return transforms_; }
  const NormalMap& normals() const noexcept { return *cfg_.normals; }

  /// Builds every cache up front (otherwise done lazily).
  void prepare(Pipeline pipeline) const;

 private:
  struct EntryCache;
  struct EntryScore {
    double lbp_distance;
    double residual;
    Tsf tsf;
    IllumCoeffs coeffs;
    std::vector<double> trace;
  };

  const EntryCache& cache(std::size_t entry, bool neutral, Pipeline pipeline) const;
  EntryScore score_entry(const GrayImage& probe, const LbpDescriptor& probe_desc, std::size_t entry,
                         Pipeline pipeline) const;

  std::vector<GalleryEntry> gallery_;
  RecognizerConfig cfg_;
  TransformSet transforms_;
  std::vector<std::string> classes_;
  std::vector<std::size_t> class_of_entry_;
  std::vector<std::unique_ptr<EntryCache>> plain_;
  std::vector<std::unique_ptr<EntryCache>> neutral_;
};

}  // namespace facerec
