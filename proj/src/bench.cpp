#include "facerec/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include "path_format.hpp"

#include "facerec/error.hpp"
#include "facerec/fer.hpp"
#include "facerec/illum.hpp"
#include "facerec/parallel.hpp"
#include "facerec/tsf.hpp"

namespace facerec {

namespace fs = std::filesystem;

std::vector<GalleryEntry> Dataset::gallery_entries() const {
  std::vector<GalleryEntry> out;
  out.reserve(gallery.size());
  for (const LabeledImage& img : gallery) out.push_back({img.class_id, img.chip});
  return out;
}

namespace {

std::vector<std::string> sorted_subdirs(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

GrayImage to_chip(const GrayImage& img, const LoadOptions& opts) {
  if (opts.cascade) {
    const auto boxes = detect_faces(img, *opts.cascade, opts.detect);
    if (boxes.empty()) throw Error(ErrorCode::kDataset, "no face detected");
    return crop_chip(img, boxes.front(), opts.chip_size);
  }
  if (img.width() == opts.chip_size && img.height() == opts.chip_size) return img;
  return resize_bilinear(img, opts.chip_size, opts.chip_size);
}

void load_split(const fs::path& dir, const std::vector<std::string>& classes, const LoadOptions& opts,
                std::vector<LabeledImage>& out, std::vector<std::string>& warnings) {
  for (const std::string& cls : classes) {
    for (const fs::path& file : sorted_images(dir / cls)) {
      try {
        out.push_back({cls, file, to_chip(load_image(file), opts)});
      } catch (const Error& e) {
        if (opts.strict) throw;
        warnings.push_back(fmt::format("skipped {}: {}", file, e.what()));
      }
    }
  }
}

}  // namespace

Dataset load_dataset(const fs::path& root, const LoadOptions& opts) {
  const fs::path gallery_dir = root / "gallery";
  const fs::path probe_dir = root / "probe";
  if (!fs::is_directory(gallery_dir)) {
    throw Error(ErrorCode::kDataset, fmt::format("missing gallery directory {}", gallery_dir));
  }
  Dataset data;
  data.classes = sorted_subdirs(gallery_dir);
  if (data.classes.empty()) throw Error(ErrorCode::kDataset, fmt::format("{} has no class folders", gallery_dir));
  std::vector<std::string> probe_classes;
  if (fs::is_directory(probe_dir)) probe_classes = sorted_subdirs(probe_dir);
  for (const std::string& cls : probe_classes) {
    if (!std::binary_search(data.classes.begin(), data.classes.end(), cls)) {
      throw Error(ErrorCode::kDataset, fmt::format("probe class '{}' has no gallery folder", cls));
    }
  }
  load_split(gallery_dir, data.classes, opts, data.gallery, data.warnings);
  for (const std::string& cls : data.classes) {
    const bool present = std::any_of(data.gallery.begin(), data.gallery.end(),
                                     [&](const LabeledImage& img) { return img.class_id == cls; });
    if (!present) throw Error(ErrorCode::kDataset, fmt::format("gallery class '{}' has no readable images", cls));
  }
  load_split(probe_dir, probe_classes, opts, data.probes, data.warnings);
  return data;
}

const char* to_string(TsfMode mode) {
  switch (mode) {
    case TsfMode::kNone: return "none";
    case TsfMode::kRandomLine: return "random-line";
    case TsfMode::kRandomSparse: return "random-sparse";
  }
  return "?";
}

TsfMode parse_tsf_mode(const std::string& name) {
  if (name == "none") return TsfMode::kNone;
  if (name == "random-line") return TsfMode::kRandomLine;
  if (name == "random-sparse") return TsfMode::kRandomSparse;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown TSF mode '{}'", name));
}

std::uint64_t SplitRng::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double SplitRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(next() >> 11) * 0x1.0p-53);
}

std::size_t SplitRng::below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  SplitRng rng(seed ^ (0xD1B54A32D192ED03ull * (index + 1)));
  return rng.next();
}

Tsf random_tsf(TsfMode mode, int radius, SplitRng& rng) {
  const TransformSet ts(radius);
  Tsf tsf{std::vector<double>(ts.size(), 0.0)};
  switch (mode) {
    case TsfMode::kNone:
      tsf.weights[ts.identity_index()] = 1.0;
      return tsf;
    case TsfMode::kRandomLine: {
      // Camera-shake style streak through the origin.
      const double angle = rng.uniform(0.0, std::numbers::pi);
      const double length = rng.uniform(1.0, std::max(1.0, 2.0 * radius));
      const int samples = 4 * radius + 1;
      for (int s = 0; s < samples; ++s) {
        const double u = samples > 1 ? -0.5 + static_cast<double>(s) / (samples - 1) : 0.0;
        const int dx = std::clamp(static_cast<int>(std::lround(u * length * std::cos(angle))), -radius, radius);
        const int dy = std::clamp(static_cast<int>(std::lround(u * length * std::sin(angle))), -radius, radius);
        tsf.weights[ts.index_of(dx, dy)] += 1.0;
      }
      break;
    }
    case TsfMode::kRandomSparse: {
      const int count = 2 + static_cast<int>(rng.below(3));
      for (int k = 0; k < count; ++k) tsf.weights[rng.below(ts.size())] += rng.uniform(0.2, 1.0);
      break;
    }
  }
  const double total = tsf.mass();
  for (double& w : tsf.weights) w /= total;
  return tsf;
}

GrayImage add_expression_perturbation(const GrayImage& img, double amplitude) {
  GrayImage out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out(x, y) += ((x + y) % 2 == 0 ? amplitude : -amplitude);
  }
  return out;
}

GrayImage degrade(const GrayImage& img, const DegradeSpec& spec) {
  SplitRng rng(spec.seed);
  GrayImage out = img;
  if (spec.tsf_mode != TsfMode::kNone) {
    const TransformSet ts(spec.tsf_radius);
    out = apply_tsf(out, random_tsf(spec.tsf_mode, spec.tsf_radius, rng), ts);
  }
  if (spec.gaussian_sigma > 0.0) out = convolve(out, gaussian_kernel(spec.gaussian_sigma));
  if (spec.relight) {
    IllumCoeffs alpha{};
    alpha[0] = rng.uniform(0.8, 1.2) / kHarmonicC0;
    for (int i = 1; i < kNumHarmonics; ++i) alpha[static_cast<std::size_t>(i)] = rng.uniform(-0.15, 0.15) / kHarmonicC0;
    out = relight(harmonic_basis(out, default_normal_map(out.width(), out.height())), alpha);
  }
  if (spec.fer_perturb > 0.0) out = add_expression_perturbation(out, spec.fer_perturb);
  return out;
}

BlockWeightMap weights_from_rates(const std::vector<double>& rates, int blocks_x, int blocks_y) {
  const std::size_t n = rates.size();
  std::vector<double> levels(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // Fraction of blocks strictly worse; ties share the lower level.
    const auto below = std::count_if(rates.begin(), rates.end(), [&](double r) { return r < rates[i]; });
    const double q = static_cast<double>(below) / static_cast<double>(n);
    levels[i] = q >= 0.75 ? 4.0 : q >= 0.5 ? 2.0 : q >= 0.25 ? 1.0 : 0.0;
  }
  if (std::all_of(levels.begin(), levels.end(), [](double l) { return l == 0.0; })) {
    levels[static_cast<std::size_t>(std::max_element(rates.begin(), rates.end()) - rates.begin())] = 1.0;
  }
  return BlockWeightMap(blocks_x, blocks_y, std::move(levels));
}

BlockWeightMap train_block_weights(const Dataset& data, double sigma, int blocks_x, int blocks_y) {
  if (data.classes.size() < 2) {
    throw Error(ErrorCode::kDataset, "weight training needs at least two classes");
  }
  if (data.probes.empty()) throw Error(ErrorCode::kDataset, "weight training needs probe images");
  std::vector<LbpDescriptor> gallery;
  for (const LabeledImage& g : data.gallery) gallery.push_back(extract_descriptor(g.chip, blocks_x, blocks_y));
  const Kernel2D blur = gaussian_kernel(sigma);
  std::vector<LbpDescriptor> probes;
  for (const LabeledImage& p : data.probes) probes.push_back(extract_descriptor(convolve(p.chip, blur), blocks_x, blocks_y));

  std::vector<double> rates(static_cast<std::size_t>(blocks_x * blocks_y), 0.0);
  for (int by = 0; by < blocks_y; ++by) {
    for (int bx = 0; bx < blocks_x; ++bx) {
      int correct = 0;
      for (std::size_t i = 0; i < probes.size(); ++i) {
        std::size_t best = 0;
        double best_distance = block_distance(probes[i], gallery[0], bx, by);
        for (std::size_t g = 1; g < gallery.size(); ++g) {
          const double d = block_distance(probes[i], gallery[g], bx, by);
          if (d < best_distance) {
            best_distance = d;
            best = g;
          }
        }
        correct += data.gallery[best].class_id == data.probes[i].class_id ? 1 : 0;
      }
      rates[static_cast<std::size_t>(by * blocks_x + bx)] = static_cast<double>(correct) / probes.size();
    }
  }
  return weights_from_rates(rates, blocks_x, blocks_y);
}

int EvalReport::total() const {
  int t = 0;
  for (const ClassTally& c : per_class) t += c.total;
  return t;
}

int EvalReport::correct() const {
  int t = 0;
  for (const ClassTally& c : per_class) t += c.correct;
  return t;
}

double EvalReport::rate() const {
  const int t = total();
  return t ? 100.0 * correct() / t : 0.0;
}

EvalReport run_benchmark(const Dataset& data, Pipeline pipeline, const BenchConfig& cfg) {
  RecognizerConfig rcfg = cfg.recognizer;
  rcfg.threads = 1;
  const Recognizer recognizer(data.gallery_entries(), rcfg);
  recognizer.prepare(pipeline);

  struct Outcome {
    std::string truth;
    std::string predicted;
    double seconds = 0.0;
  };
  std::vector<Outcome> outcomes(data.probes.size());
  parallel_for(data.probes.size(), cfg.threads, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    GrayImage probe = data.probes[i].chip;
    if (cfg.degrade) {
      DegradeSpec spec = *cfg.degrade;
      spec.seed = derive_seed(cfg.degrade->seed ^ cfg.seed, i);
      probe = degrade(probe, spec);
    }
    const MatchResult match = recognizer.recognize(probe, pipeline);
    outcomes[i].predicted = match.best_class;
    outcomes[i].truth = data.probes[i].class_id;
    if (cfg.scramble_labels) {
      SplitRng rng(derive_seed(cfg.seed, i + 0x5eed));
      outcomes[i].truth = data.classes[rng.below(data.classes.size())];
    }
    outcomes[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  EvalReport report;
  for (const std::string& cls : data.classes) report.per_class.push_back({cls, 0, 0});
  double seconds = 0.0;
  for (const Outcome& o : outcomes) {
    auto it = std::find_if(report.per_class.begin(), report.per_class.end(),
                           [&](const ClassTally& t) { return t.class_id == o.truth; });
    ++it->total;
    if (o.predicted == o.truth) {
      ++it->correct;
    } else {
      ++report.confusion[{o.truth, o.predicted}];
    }
    seconds += o.seconds;
  }
  std::erase_if(report.per_class, [](const ClassTally& t) { return t.total == 0; });
  report.mean_seconds = outcomes.empty() ? 0.0 : seconds / outcomes.size();
  report.skipped = static_cast<int>(data.warnings.size());
  const RecognizerConfig& used = recognizer.config();
  report.config = {
      {"algo", to_string(pipeline)},
      {"tsf_radius", std::to_string(used.tsf_radius)},
      {"beta", used.solver.beta ? fmt::format("{:g}", *used.solver.beta) : "auto"},
      {"outer_iters", std::to_string(used.solver.outer_iters)},
      {"blocks", fmt::format("{}x{}", used.blocks_x, used.blocks_y)},
      {"decision", used.rule == DecisionRule::kLbpDistance ? "lbp" : "residual"},
      {"fer_strength", fmt::format("{:g}", used.fer_strength)},
      {"seed", std::to_string(cfg.seed)},
  };
  if (cfg.degrade) {
    report.config.push_back({"degrade", fmt::format("sigma={:g} tsf={}:{} relight={} fer_perturb={:g}",
                                                    cfg.degrade->gaussian_sigma, to_string(cfg.degrade->tsf_mode),
                                                    cfg.degrade->tsf_radius, cfg.degrade->relight ? "on" : "off",
                                                    cfg.degrade->fer_perturb)});
  }
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "class,total,correct,rate\n";
  for (const ClassTally& t : report.per_class) {
    out += fmt::format("{},{},{},{:.3f}\n", t.class_id, t.total, t.correct, t.rate());
  }
  out += fmt::format("__overall__,{},{},{:.3f}\n", report.total(), report.correct(), report.rate());
  return out;
}

EvalReport parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "class,total,correct,rate") {
    throw Error(ErrorCode::kSyntax, "report CSV must start with 'class,total,correct,rate'");
  }
  EvalReport report;
  bool have_overall = false;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw Error(ErrorCode::kSyntax, fmt::format("line {}: expected 4 columns", line_no));
    ClassTally t;
    try {
      t = {cells[0], std::stoi(cells[1]), std::stoi(cells[2])};
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSyntax, fmt::format("line {}: bad count", line_no));
    }
    if (fmt::format("{:.3f}", t.rate()) != cells[3]) {
      throw Error(ErrorCode::kValidation, fmt::format("line {}: rate {} disagrees with counts", line_no, cells[3]));
    }
    if (t.class_id == "__overall__") {
      have_overall = true;
      if (t.total != report.total() || t.correct != report.correct()) {
        throw Error(ErrorCode::kValidation, "overall row disagrees with the per-class rows");
      }
    } else {
      report.per_class.push_back(t);
    }
  }
  if (!have_overall) throw Error(ErrorCode::kSyntax, "report CSV lacks the __overall__ row");
  return report;
}

void print_report(const EvalReport& report, std::ostream& out) {
  std::size_t width = 7;
  for (const ClassTally& t : report.per_class) width = std::max(width, t.class_id.size());
  out << fmt::format("{:<{}}  {:>6}  {:>7}  {:>8}\n", "class", width, "total", "correct", "rate(%)");
  for (const ClassTally& t : report.per_class) {
    out << fmt::format("{:<{}}  {:>6}  {:>7}  {:>8.3f}\n", t.class_id, width, t.total, t.correct, t.rate());
  }
  out << fmt::format("{:<{}}  {:>6}  {:>7}  {:>8.3f}\n", "overall", width, report.total(), report.correct(),
                     report.rate());
  out << fmt::format("mean time per probe: {:.4f} s\n", report.mean_seconds);
  if (report.skipped) out << fmt::format("skipped images: {}\n", report.skipped);
  if (!report.confusion.empty()) {
    out << "confusions (true -> predicted: count):\n";
    for (const auto& [pair, count] : report.confusion) {
      out << fmt::format("  {} -> {}: {}\n", pair.first, pair.second, count);
    }
  }
  for (const auto& [key, value] : report.config) out << fmt::format("# {} = {}\n", key, value);
}

namespace {

void add_blob(GrayImage& img, double cx, double cy, double sx, double sy, double amplitude) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double u = (x - cx) / sx;
      const double v = (y - cy) / sy;
      img(x, y) += amplitude * std::exp(-0.5 * (u * u + v * v));
    }
  }
}

}  // namespace

GrayImage synth_face(int class_index, const SynthOptions& opts) {
  SplitRng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(class_index)));
  const double s = opts.size / 64.0;
  GrayImage img(opts.size, opts.size, 0.5);
  // Smooth identity texture.
  for (int k = 0; k < 14; ++k) {
    const double sigma = rng.uniform(3.0, 8.0) * s;
    add_blob(img, rng.uniform(0, opts.size), rng.uniform(0, opts.size), sigma, sigma, rng.uniform(-0.25, 0.25));
  }
  // Eye band: two dark eyes at class-specific spacing plus a class-specific ripple.
  const double eye_y = rng.uniform(20.0, 26.0) * s;
  const double spacing = rng.uniform(9.0, 15.0) * s;
  const double eye_size = rng.uniform(2.0, 4.0) * s;
  add_blob(img, 0.5 * opts.size - spacing, eye_y, eye_size * 1.4, eye_size, -0.3);
  add_blob(img, 0.5 * opts.size + spacing, eye_y, eye_size * 1.4, eye_size, -0.3);
  const double freq = rng.uniform(0.08, 0.25);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int y = static_cast<int>(13 * s); y < static_cast<int>(30 * s); ++y) {
    for (int x = 0; x < opts.size; ++x) img(x, y) += 0.06 * std::sin(freq * x / s + phase);
  }
  // Mouth.
  add_blob(img, 0.5 * opts.size, rng.uniform(44.0, 50.0) * s, rng.uniform(5.0, 10.0) * s, 1.8 * s, -0.2);
  for (double& v : img.pixels()) v = std::clamp(v, 0.05, 0.95);
  return img;
}

GrayImage synth_sample(int class_index, int sample_index, const SynthOptions& opts) {
  GrayImage img = synth_face(class_index, opts);
  SplitRng rng(derive_seed(opts.seed ^ 0xA5A5A5A5ull,
                           static_cast<std::uint64_t>(class_index) * 1000003ull + static_cast<std::uint64_t>(sample_index)));
  for (int k = 0; k < 4; ++k) {
    const double sigma = rng.uniform(6.0, 12.0) * opts.size / 64.0;
    add_blob(img, rng.uniform(0, opts.size), rng.uniform(0, opts.size), sigma, sigma,
             rng.uniform(-opts.variation, opts.variation));
  }
  for (double& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

void make_synth(const fs::path& root, const SynthOptions& opts) {
  if (opts.classes < 1 || opts.gallery_per_class < 1 || opts.probes_per_class < 0) {
    throw Error(ErrorCode::kInvalidArgument, "make-synth needs >= 1 class and >= 1 gallery image per class");
  }
  const int digits = std::max(2, static_cast<int>(std::to_string(opts.classes).size()));
  for (int c = 0; c < opts.classes; ++c) {
    const std::string name = fmt::format("s{:0{}}", c + 1, digits);
    fs::create_directories(root / "gallery" / name);
    fs::create_directories(root / "probe" / name);
    int sample = 0;
    for (int g = 0; g < opts.gallery_per_class; ++g) {
      save_image(synth_sample(c, sample++, opts), root / "gallery" / name / fmt::format("g{:02}.pgm", g));
    }
    for (int p = 0; p < opts.probes_per_class; ++p) {
      save_image(synth_sample(c, sample++, opts), root / "probe" / name / fmt::format("p{:02}.pgm", p));
    }
  }
}

}  // namespace facerec
