#include "facerec/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "facerec/bench.hpp"
#include "facerec/detect.hpp"
#include "facerec/error.hpp"
#include "facerec/recognizer.hpp"

namespace facerec {

namespace {

struct Options {
  // Global.
  int threads = 1;
  std::uint64_t seed = 0;
  bool verbose = false;
  // Recognizer.
  std::string algo = "birfr";
  int tsf_radius = 5;
  std::optional<double> beta;
  int max_iters = SolverConfig{}.max_iters;
  double rel_tol = kRecognizerRelTol;
  int outer_iters = SolverConfig{}.outer_iters;
  double fer_strength = 1.0;
  int blocks = 8;
  std::string decision = "lbp";
  std::string weights_file;
  std::string normals_file;
  // Dataset loading.
  bool strict = false;
  std::string cascade_file;
  // Degradation.
  double sigma = 4.0;
  std::string tsf_mode = "none";
  int blur_radius = 3;
  bool relight = false;
  double fer_perturb = 0.0;
  // Detection.
  double scale_step = DetectParams{}.scale_step;
  int stride = DetectParams{}.window_stride;
  double min_overlap = DetectParams{}.min_overlap;
};

RecognizerConfig recognizer_config(const Options& o) {
  RecognizerConfig cfg;
  cfg.tsf_radius = o.tsf_radius;
  cfg.solver.beta = o.beta;
  cfg.solver.max_iters = o.max_iters;
  cfg.solver.rel_tol = o.rel_tol;
  cfg.solver.outer_iters = o.outer_iters;
  cfg.fer_strength = o.fer_strength;
  cfg.blocks_x = o.blocks;
  cfg.blocks_y = o.blocks;
  if (o.decision == "lbp") {
    cfg.rule = DecisionRule::kLbpDistance;
  } else if (o.decision == "residual") {
    cfg.rule = DecisionRule::kResidual;
  } else {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown decision rule '{}' (lbp|residual)", o.decision));
  }
  if (!o.weights_file.empty()) {
    cfg.block_weights = load_weight_map(o.weights_file);
    cfg.blocks_x = cfg.block_weights->blocks_x();
    cfg.blocks_y = cfg.block_weights->blocks_y();
  }
  if (!o.normals_file.empty()) cfg.normals = load_normal_map(o.normals_file);
  cfg.threads = o.threads;
  return cfg;
}

DegradeSpec degrade_spec(const Options& o) {
  DegradeSpec spec;
  spec.gaussian_sigma = o.sigma;
  spec.tsf_mode = parse_tsf_mode(o.tsf_mode);
  spec.tsf_radius = o.blur_radius;
  spec.relight = o.relight;
  spec.fer_perturb = o.fer_perturb;
  spec.seed = o.seed;
  return spec;
}

LoadOptions load_options(const Options& o) {
  LoadOptions opts;
  opts.strict = o.strict;
  if (!o.cascade_file.empty()) opts.cascade = load_cascade(o.cascade_file);
  opts.detect = {o.scale_step, o.stride, o.min_overlap};
  return opts;
}

void print_match(const MatchResult& m, const std::string& format, bool verbose, std::ostream& out) {
  if (format == "json") {
    nlohmann::json j;
    j["best_class"] = m.best_class;
    j["mode"] = to_string(m.mode);
    for (const ClassScore& c : m.per_class) {
      j["per_class"].push_back({{"class", c.class_id},
                                {"lbp_distance", c.lbp_distance},
                                {"residual", c.residual},
                                {"tsf_mass", c.tsf.mass()},
                                {"coeffs", c.coeffs},
                                {"tsf", c.tsf.weights}});
    }
    out << j.dump(2) << '\n';
    return;
  }
  if (format == "csv") {
    out << "class,lbp_distance,residual,tsf_mass\n";
    for (const ClassScore& c : m.per_class) {
      out << fmt::format("{},{:.9g},{:.9g},{:.9g}\n", c.class_id, c.lbp_distance, c.residual, c.tsf.mass());
    }
    out << fmt::format("best,{}\n", m.best_class);
    return;
  }
  out << fmt::format("{:<12} {:>14} {:>14} {:>10}\n", "class", "lbp_distance", "residual", "tsf_mass");
  for (const ClassScore& c : m.per_class) {
    out << fmt::format("{:<12} {:>14.4f} {:>14.6g} {:>10.4f}{}\n", c.class_id, c.lbp_distance, c.residual,
                       c.tsf.mass(), c.class_id == m.best_class ? "  <= best" : "");
    if (verbose) {
      out << "  objective trace:";
      for (double v : c.trace) out << fmt::format(" {:.9g}", v);
      out << '\n';
    }
  }
  out << fmt::format("best: {} ({})\n", m.best_class, to_string(m.mode));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Blur, illumination and expression robust face identification"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read options from a 'key = value' file");
  Options o;

  app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "Random seed");
  app.add_flag("--verbose", o.verbose, "Print solver diagnostics");
  app.add_option("--algo", o.algo, "Pipeline: brfr, birfr or biefr")->check(CLI::IsMember({"brfr", "birfr", "biefr"}));
  app.add_option("--tsf-radius", o.tsf_radius, "Translation radius k of the TSF (N_T = (2k+1)^2)")->check(CLI::NonNegativeNumber);
  app.add_option("--beta", o.beta, "L1 penalty (default: scale-aware)");
  app.add_option("--max-iters", o.max_iters, "FISTA iteration cap")->check(CLI::PositiveNumber);
  app.add_option("--rel-tol", o.rel_tol, "FISTA relative objective tolerance");
  app.add_option("--outer-iters", o.outer_iters, "Alternating rounds of the joint solver")->check(CLI::PositiveNumber);
  app.add_option("--fer-strength", o.fer_strength, "Detail attenuation for expression removal")->check(CLI::Range(0.0, 1.0));
  app.add_option("--blocks", o.blocks, "LBP grid (blocks per side)")->check(CLI::PositiveNumber);
  app.add_option("--decision", o.decision, "Decision rule: lbp or residual");
  app.add_option("--weights", o.weights_file, "Block weight grid file");
  app.add_option("--normals", o.normals_file, "Normal map file (default: built-in frontal cap)");
  app.add_flag("--strict", o.strict, "Fail on unreadable images instead of skipping");
  app.add_option("--cascade", o.cascade_file, "Detector cascade file");
  app.add_option("--sigma", o.sigma, "Gaussian blur sigma (0 disables)")->check(CLI::NonNegativeNumber);
  app.add_option("--tsf-mode", o.tsf_mode, "Random TSF blur: none, random-line, random-sparse");
  app.add_option("--blur-radius", o.blur_radius, "Radius of the random TSF blur")->check(CLI::NonNegativeNumber);
  app.add_flag("--relight", o.relight, "Apply random relighting");
  app.add_option("--fer-perturb", o.fer_perturb, "Amplitude of the HH-band perturbation")->check(CLI::NonNegativeNumber);
  app.add_option("--scale-step", o.scale_step, "Detector scale step");
  app.add_option("--stride", o.stride, "Detector window stride at base scale");
  app.add_option("--min-overlap", o.min_overlap, "IoU needed to merge detections");

  std::string probe_path, gallery_dir, format = "table";
  auto* identify = app.add_subcommand("identify", "Identify one probe image against a gallery");
  identify->add_option("probe", probe_path, "Probe PGM")->required();
  identify->add_option("--gallery", gallery_dir, "Dataset root or gallery directory")->required();
  identify->add_option("--format", format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));

  std::string bench_root, csv_path;
  bool degrade_probes = false, scramble = false;
  auto* bench = app.add_subcommand("bench", "Recognition rate over a gallery/probe dataset");
  bench->add_option("root", bench_root, "Dataset root")->required();
  bench->add_option("--csv", csv_path, "Write the CSV report here");
  bench->add_flag("--degrade", degrade_probes, "Degrade probes using the degradation options");
  bench->add_flag("--scramble", scramble, "Replace probe labels with random classes (sanity check)");

  std::string in_path, out_path;
  auto* degrade_cmd = app.add_subcommand("degrade", "Synthetically degrade one image");
  degrade_cmd->add_option("input", in_path)->required();
  degrade_cmd->add_option("output", out_path)->required();

  std::string detect_path, crop_dir;
  auto* detect = app.add_subcommand("detect", "Run the cascade detector on an image");
  detect->add_option("image", detect_path)->required();
  detect->add_option("--crop-dir", crop_dir, "Write 64x64 chips of each detection here");

  std::string train_root, weights_out;
  auto* train = app.add_subcommand("train-weights", "Learn block weights from a dataset");
  train->add_option("root", train_root)->required();
  train->add_option("--out", weights_out, "Write the weight grid here");

  std::string synth_root;
  SynthOptions synth;
  auto* make = app.add_subcommand("make-synth", "Write the procedural synthetic corpus");
  make->add_option("output", synth_root)->required();
  make->add_option("--classes", synth.classes)->check(CLI::PositiveNumber);
  make->add_option("--gallery-per-class", synth.gallery_per_class)->check(CLI::PositiveNumber);
  make->add_option("--probes-per-class", synth.probes_per_class)->check(CLI::NonNegativeNumber);
  make->add_option("--variation", synth.variation)->check(CLI::NonNegativeNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (o.tsf_mode != "none" && o.tsf_mode != "random-line" && o.tsf_mode != "random-sparse") {
      err << "error: unknown --tsf-mode '" << o.tsf_mode << "'\n";
      return kExitUsage;
    }
    if (identify->parsed()) {
      const auto root = std::filesystem::path(gallery_dir);
      Dataset data = std::filesystem::is_directory(root / "gallery")
                         ? load_dataset(root, load_options(o))
                         : load_dataset(root.parent_path(), load_options(o));
      LoadOptions lo = load_options(o);
      GrayImage probe = load_image(probe_path);
      if (lo.cascade) {
        const auto boxes = detect_faces(probe, *lo.cascade, lo.detect);
        if (boxes.empty()) throw Error(ErrorCode::kDataset, "no face detected in the probe");
        probe = crop_chip(probe, boxes.front(), lo.chip_size);
      } else if (probe.width() != lo.chip_size || probe.height() != lo.chip_size) {
        probe = resize_bilinear(probe, lo.chip_size, lo.chip_size);
      }
      const Recognizer recognizer(data.gallery_entries(), recognizer_config(o));
      const MatchResult match = recognizer.recognize(probe, parse_pipeline(o.algo));
      print_match(match, format, o.verbose, out);
    } else if (bench->parsed()) {
      const Dataset data = load_dataset(bench_root, load_options(o));
      for (const auto& w : data.warnings) err << "warning: " << w << '\n';
      BenchConfig cfg;
      cfg.recognizer = recognizer_config(o);
      cfg.threads = o.threads;
      cfg.seed = o.seed;
      cfg.scramble_labels = scramble;
      if (degrade_probes) cfg.degrade = degrade_spec(o);
      const EvalReport report = run_benchmark(data, parse_pipeline(o.algo), cfg);
      print_report(report, out);
      if (!csv_path.empty()) {
        std::ofstream csv(csv_path, std::ios::binary);
        if (!csv) throw Error(ErrorCode::kUnwritablePath, fmt::format("cannot write {}", csv_path));
        csv << report_csv(report);
      }
    } else if (degrade_cmd->parsed()) {
      save_image(degrade(load_image(in_path), degrade_spec(o)), out_path);
    } else if (detect->parsed()) {
      if (o.cascade_file.empty()) {
        err << "error: detect requires --cascade\n";
        return kExitUsage;
      }
      const GrayImage img = load_image(detect_path);
      const CascadeModel model = load_cascade(o.cascade_file);
      const auto boxes = detect_faces(img, model, {o.scale_step, o.stride, o.min_overlap});
      out << "x,y,w,h,scale\n";
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        const Box& b = boxes[i];
        out << fmt::format("{:.2f},{:.2f},{:.2f},{:.2f},{:.4f}\n", b.x, b.y, b.w, b.h, b.scale);
        if (!crop_dir.empty()) {
          std::filesystem::create_directories(crop_dir);
          save_image(crop_chip(img, b), std::filesystem::path(crop_dir) / fmt::format("face{:03}.pgm", i));
        }
      }
    } else if (train->parsed()) {
      const Dataset data = load_dataset(train_root, load_options(o));
      const BlockWeightMap map = train_block_weights(data, o.sigma, o.blocks, o.blocks);
      for (int by = 0; by < map.blocks_y(); ++by) {
        for (int bx = 0; bx < map.blocks_x(); ++bx) out << (bx ? " " : "") << map.at(bx, by);
        out << '\n';
      }
      if (!weights_out.empty()) save_weight_map(map, weights_out);
    } else if (make->parsed()) {
      synth.seed = o.seed;
      make_synth(synth_root, synth);
      out << fmt::format("wrote {} classes to {}\n", synth.classes, synth_root);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace facerec
