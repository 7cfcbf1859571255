#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "facerec/detect.hpp"
#include "facerec/image.hpp"
#include "facerec/lbp.hpp"
#include "facerec/recognizer.hpp"

namespace facerec {

struct LabeledImage {
  std::string class_id;
  std::filesystem::path path;
  GrayImage chip;
};

struct LoadOptions {
  /// Unreadable images abort the load when set, otherwise they are skipped with a warning.
  bool strict = false;
  /// Crop every image to its first detection before resizing.
  std::optional<CascadeModel> cascade;
  DetectParams detect;
  int chip_size = kChipSize;
};

/// root/gallery/<class>/*.pgm and root/probe/<class>/*.pgm, classes sorted by name.
struct Dataset {
  std::vector<std::string> classes;
  std::vector<LabeledImage> gallery;
  std::vector<LabeledImage> probes;
  std::vector<std::string> warnings;

  std::vector<GalleryEntry> gallery_entries() const;
};

Dataset load_dataset(const std::filesystem::path& root, const LoadOptions& opts = {});

enum class TsfMode { kNone, kRandomLine, kRandomSparse };
const char* to_string(TsfMode mode);
TsfMode parse_tsf_mode(const std::string& name);

struct DegradeSpec {
  double gaussian_sigma = 4.0;  // 0 disables
  int tsf_radius = 3;
  TsfMode tsf_mode = TsfMode::kNone;
  bool relight = false;
  double fer_perturb = 0.0;
  std::uint64_t seed = 0;

  static DegradeSpec none() { return {0.0, 3, TsfMode::kNone, false, 0.0, 0}; }
};

/// Deterministic 64-bit generator with portable uniform draws.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform(double lo = 0.0, double hi = 1.0);
  std::size_t below(std::size_t n);

 private:
  std::uint64_t state_;
};

/// Mixes a base seed with an index into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Random blur kernel on the (2k+1)^2 translation grid, weights summing to 1.
Tsf random_tsf(TsfMode mode, int radius, SplitRng& rng);

/// TSF blur, Gaussian blur, random relighting, then the high-frequency perturbation.
GrayImage degrade(const GrayImage& img, const DegradeSpec& spec);

/// Alternating +a/-a checkerboard aligned to 2x2 blocks: energy only in the HH band.
GrayImage add_expression_perturbation(const GrayImage& img, double amplitude);

/// Learns block weights from per-block nearest-neighbour recognition rates on blurred probes.
BlockWeightMap train_block_weights(const Dataset& data, double sigma = 4.0, int blocks_x = 8, int blocks_y = 8);

/// Rate -> level rule used by train_block_weights (exposed for testing).
BlockWeightMap weights_from_rates(const std::vector<double>& rates, int blocks_x, int blocks_y);

struct ClassTally {
  std::string class_id;
  int total = 0;
  int correct = 0;
  double rate() const { return total ? 100.0 * correct / total : 0.0; }
  bool operator==(const ClassTally&) const = default;
};

struct EvalReport {
  std::vector<ClassTally> per_class;
  std::map<std::pair<std::string, std::string>, int> confusion;  // (true, predicted) for misses
  double mean_seconds = 0.0;
  int skipped = 0;
  std::vector<std::pair<std::string, std::string>> config;

  int total() const;
  int correct() const;
  double rate() const;
};

struct BenchConfig {
  RecognizerConfig recognizer;
  std::optional<DegradeSpec> degrade;  // applied to each probe with a per-probe seed
  bool scramble_labels = false;
  std::uint64_t seed = 0;
  int threads = 1;
};

EvalReport run_benchmark(const Dataset& data, Pipeline pipeline, const BenchConfig& cfg);

std::string report_csv(const EvalReport& report);
EvalReport parse_report_csv(const std::string& csv);
void print_report(const EvalReport& report, std::ostream& out);

struct SynthOptions {
  int classes = 20;
  int gallery_per_class = 1;
  int probes_per_class = 10;
  std::uint64_t seed = 7;
  int size = kChipSize;
  /// Amplitude of the per-image smooth variation around each class template.
  double variation = 0.02;
};

/// Class template: smooth random texture with class-specific eye/mouth band structure.
GrayImage synth_face(int class_index, const SynthOptions& opts);
GrayImage synth_sample(int class_index, int sample_index, const SynthOptions& opts);

/// Writes root/gallery/<class>/*.pgm and root/probe/<class>/*.pgm.
void make_synth(const std::filesystem::path& root, const SynthOptions& opts);

}  // namespace facerec
