#include <facerec/bench.hpp>
#include <facerec/error.hpp>
#include <facerec/recognizer.hpp>
#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace facerec {
namespace {

constexpr int kSize = 32;

std::vector<GalleryEntry> gallery(int classes, std::uint64_t seed = 100) {
  std::vector<GalleryEntry> g;
  for (int c = 0; c < classes; ++c) {
    g.push_back({"c" + std::to_string(c), testing::textured_image(kSize, kSize, seed + static_cast<std::uint64_t>(c))});
  }
  return g;
}

RecognizerConfig small_config() {
  RecognizerConfig cfg;
  cfg.tsf_radius = 2;
  cfg.blocks_x = 4;
  cfg.blocks_y = 4;
  return cfg;
}

Tsf random_blur(const TransformSet& ts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Tsf t{std::vector<double>(ts.size(), 0.0)};
  for (int k = 0; k < 3; ++k) t.weights[rng() % ts.size()] += u(rng);
  const double m = t.mass();
  for (double& v : t.weights) v /= m;
  return t;
}

void expect_same_scores(const MatchResult& a, const MatchResult& b) {
  EXPECT_EQ(a.best_class, b.best_class);
  ASSERT_EQ(a.per_class.size(), b.per_class.size());
  for (std::size_t k = 0; k < a.per_class.size(); ++k) {
    EXPECT_EQ(a.per_class[k].class_id, b.per_class[k].class_id);
    EXPECT_EQ(a.per_class[k].lbp_distance, b.per_class[k].lbp_distance);
    EXPECT_EQ(a.per_class[k].residual, b.per_class[k].residual);
    EXPECT_EQ(a.per_class[k].tsf.weights, b.per_class[k].tsf.weights);
    EXPECT_EQ(a.per_class[k].coeffs, b.per_class[k].coeffs);
  }
}

TEST(Recognizer, ExactMemberIsIdentifiedWithZeroScores) {
  RecognizerConfig cfg = small_config();
  cfg.solver.beta = 0.0;
  cfg.solver.rel_tol = 1e-14;
  // Unstructured texture keeps the shift dictionary well conditioned.
  std::vector<GalleryEntry> g;
  for (int c = 0; c < 4; ++c) g.push_back({"c" + std::to_string(c), testing::random_image(kSize, kSize, 70 + static_cast<std::uint64_t>(c))});
  const Recognizer rec(g, cfg);
  const MatchResult r = rec.recognize_brfr(rec.gallery()[2].chip);
  EXPECT_EQ(r.best_class, "c2");
  EXPECT_EQ(r.per_class[2].lbp_distance, 0.0);
  EXPECT_LT(r.per_class[2].residual, 1e-8);
  for (double v : r.per_class[2].coeffs) EXPECT_EQ(v, 0.0);
}

TEST(Recognizer, BlurOnlyPipelineUndoesInSetBlur) {
  const Recognizer rec(gallery(5), small_config());
  for (int c = 0; c < 5; ++c) {
    const GrayImage probe = apply_tsf(rec.gallery()[static_cast<std::size_t>(c)].chip,
                                      random_blur(rec.transforms(), 10 + static_cast<std::uint64_t>(c)), rec.transforms());
    EXPECT_EQ(rec.recognize_brfr(probe).best_class, "c" + std::to_string(c));
  }
}

TEST(Recognizer, IlluminationPipelineUndoesBlurAndRelighting) {
  const Recognizer rec(gallery(5), small_config());
  for (int c = 0; c < 5; ++c) {
    IllumCoeffs a{};
    a[0] = 1.1 / kHarmonicC0;
    a[1] = 0.1 / kHarmonicC0;
    a[3] = -0.08 / kHarmonicC0;
    const GrayImage probe = transform_gallery(rec.gallery()[static_cast<std::size_t>(c)].chip,
                                              random_blur(rec.transforms(), 20 + static_cast<std::uint64_t>(c)), a,
                                              rec.transforms(), rec.normals());
    const MatchResult r = rec.recognize_birfr(probe);
    EXPECT_EQ(r.best_class, "c" + std::to_string(c));
    EXPECT_EQ(r.mode, Pipeline::kBirfr);
    for (const ClassScore& s : r.per_class) {
      for (std::size_t i = 1; i < s.trace.size(); ++i) EXPECT_LE(s.trace[i], s.trace[i - 1] + 1e-9);
    }
  }
}

TEST(Recognizer, EmptyGalleryIsAnError) {
  try {
    Recognizer rec({}, small_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyGallery);
  }
}

TEST(Recognizer, ProbeSizeMismatchIsAnError) {
  const Recognizer rec(gallery(2), small_config());
  EXPECT_THROW(rec.recognize_brfr(GrayImage(kSize + 2, kSize)), Error);
}

TEST(Recognizer, NormalMapMustMatchTheChip) {
  RecognizerConfig cfg = small_config();
  cfg.normals = default_normal_map(kSize, kSize + 1);
  EXPECT_THROW(Recognizer(gallery(2), cfg), Error);
}

TEST(Recognizer, TiesGoToTheFirstClass) {
  auto g = gallery(3);
  g[2].chip = g[1].chip;
  RecognizerConfig cfg = small_config();
  cfg.rule = DecisionRule::kResidual;
  const Recognizer rec(g, cfg);
  const MatchResult r = rec.recognize_brfr(g[1].chip);
  EXPECT_EQ(r.per_class[1].residual, r.per_class[2].residual);
  EXPECT_EQ(r.best_class, "c1");
}

TEST(Recognizer, ClassKeepsItsBestEntry) {
  auto g = gallery(3);
  g.push_back({"c0", g[2].chip});
  const Recognizer rec(g, small_config());
  ASSERT_EQ(rec.classes().size(), 3u);
  const MatchResult r = rec.recognize_brfr(g[2].chip);
  EXPECT_EQ(r.per_class[0].entry, 3u);
  EXPECT_EQ(r.best_class, "c0");
}

TEST(Recognizer, ExpressionPipelineAtStrengthZeroEqualsIlluminationPipeline) {
  RecognizerConfig cfg = small_config();
  cfg.fer_strength = 0.0;
  const Recognizer rec(gallery(3), cfg);
  const GrayImage probe = testing::textured_image(kSize, kSize, 101);
  expect_same_scores(rec.recognize_biefr(probe), rec.recognize_birfr(probe));
}

TEST(Recognizer, ExpressionPipelineIgnoresHighFrequencyPerturbation) {
  const Recognizer rec(gallery(4), small_config());
  for (int c = 0; c < 4; ++c) {
    const GrayImage probe = add_expression_perturbation(rec.gallery()[static_cast<std::size_t>(c)].chip, 0.1);
    EXPECT_EQ(rec.recognize_biefr(probe).best_class, "c" + std::to_string(c));
  }
}

TEST(Recognizer, ConstantProbeIsHandled) {
  const Recognizer rec(gallery(3), small_config());
  for (Pipeline p : {Pipeline::kBrfr, Pipeline::kBirfr, Pipeline::kBiefr}) {
    const MatchResult r = rec.recognize(GrayImage(kSize, kSize, 0.5), p);
    EXPECT_FALSE(r.best_class.empty());
    for (const ClassScore& s : r.per_class) {
      EXPECT_TRUE(std::isfinite(s.lbp_distance));
      EXPECT_TRUE(std::isfinite(s.residual));
    }
  }
}

TEST(Recognizer, ScalingBlockWeightsKeepsTheDecision) {
  RecognizerConfig cfg = small_config();
  const Recognizer base(gallery(4), cfg);
  cfg.block_weights = base.block_weights().scaled(3.0);
  const Recognizer scaled(gallery(4), cfg);
  for (int c = 0; c < 4; ++c) {
    const GrayImage probe = apply_tsf(base.gallery()[static_cast<std::size_t>(c)].chip,
                                      random_blur(base.transforms(), 40 + static_cast<std::uint64_t>(c)), base.transforms());
    const MatchResult a = base.recognize_brfr(probe);
    const MatchResult b = scaled.recognize_brfr(probe);
    EXPECT_EQ(a.best_class, b.best_class);
  }
}

TEST(Recognizer, ThreadCountDoesNotChangeScores) {
  RecognizerConfig one = small_config();
  RecognizerConfig four = small_config();
  four.threads = 4;
  const Recognizer a(gallery(5), one);
  const Recognizer b(gallery(5), four);
  const GrayImage probe = testing::textured_image(kSize, kSize, 55);
  for (Pipeline p : {Pipeline::kBrfr, Pipeline::kBirfr}) expect_same_scores(a.recognize(probe, p), b.recognize(probe, p));
}

TEST(Recognizer, PipelineNamesRoundTrip) {
  for (Pipeline p : {Pipeline::kBrfr, Pipeline::kBirfr, Pipeline::kBiefr}) EXPECT_EQ(parse_pipeline(to_string(p)), p);
  EXPECT_THROW(parse_pipeline("drbf"), Error);
}

}  // namespace
}  // namespace facerec
