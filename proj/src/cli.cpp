#include "stereoconf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stereoconf/ensemble.hpp"
#include "stereoconf/errors.hpp"
#include "stereoconf/io.hpp"
#include "stereoconf/loss.hpp"
#include "stereoconf/metrics.hpp"
#include "stereoconf/toymodel.hpp"

namespace stereoconf::cli {

namespace fs = std::filesystem;

namespace {

struct LossFlags {
  double k = 4.0;
  double a = 5.0;
  double gamma = 0.0;
  double c_min = kDefaultMinConfidence;

  loss::FocusedLossParams params() const { return {k, a, gamma, c_min}; }
};

void add_loss_flags(CLI::App* cmd, LossFlags& f) {
  cmd->add_option("--k", f.k, "Confidence-to-scale slope")->capture_default_str();
  cmd->add_option("--a", f.a, "Scale intercept (a >= k + 1)")->capture_default_str();
  cmd->add_option("--gamma", f.gamma, "Confidence prior exponent")->capture_default_str();
  cmd->add_option("--c-min", f.c_min, "Lower confidence clamp")->capture_default_str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void print_summary(std::ostream& os, const std::string& name, const metrics::EvalReport& r) {
  if (!name.empty()) os << name << ": ";
  os << "epe " << io::format_number(r.epe);
  for (const auto& [t, rate] : r.error_rates) {
    os << "  " << io::format_number(t) << "px " << io::format_number(rate);
  }
  if (r.auc) {
    os << "  auc " << io::format_number(*r.auc) << "  auc_opt " << io::format_number(*r.auc_opt)
       << "  ratio " << io::format_number(*r.ratio);
  }
  os << "  n_valid " << r.n_valid << '\n';
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string pred, gt, conf, out;
  double theta = 1.0;
  std::vector<double> thresholds = {1.0, 3.0, 5.0};
};

std::vector<std::string> sorted_files(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

int cmd_eval(const EvalArgs& args) {
  if (!fs::is_directory(args.pred)) {
    const auto pred = io::load_disparity(args.pred);
    const auto gt = io::load_disparity(args.gt);
    std::optional<ConfidenceMap> conf;
    if (!args.conf.empty()) conf = io::load_confidence(args.conf);
    const auto report = metrics::evaluate(pred, gt, conf ? &*conf : nullptr, args.theta,
                                          args.thresholds);
    write_json(args.out, io::to_json(report));
    print_summary(std::cout, "", report);
    return kOk;
  }

  if (!fs::is_directory(args.gt)) throw IoError("--gt must be a directory when --pred is one");
  if (!args.conf.empty() && !fs::is_directory(args.conf)) {
    throw IoError("--conf must be a directory when --pred is one");
  }
  std::vector<metrics::EvalReport> reports;
  std::vector<double> full_density;
  nlohmann::json images = nlohmann::json::array();
  for (const auto& name : sorted_files(args.pred)) {
    const auto pred = io::load_disparity(fs::path(args.pred) / name);
    const auto gt = io::load_disparity(fs::path(args.gt) / name);
    std::optional<ConfidenceMap> conf;
    if (!args.conf.empty()) conf = io::load_confidence(fs::path(args.conf) / name);
    reports.push_back(
        metrics::evaluate(pred, gt, conf ? &*conf : nullptr, args.theta, args.thresholds));
    full_density.push_back(metrics::error_rate(pred, gt, args.theta));
    auto j = io::to_json(reports.back());
    j["name"] = name;
    images.push_back(j);
    print_summary(std::cout, name, reports.back());
  }
  if (reports.empty()) throw IoError("no images in " + args.pred);
  const auto total = metrics::aggregate(reports, full_density);
  print_summary(std::cout, "aggregate", total);
  write_json(args.out, {{"aggregate", io::to_json(total)}, {"images", images}});
  return kOk;
}

// ---------------------------------------------------------------------------
// roc

struct RocArgs {
  std::string pred, gt, conf, out;
  double theta = 1.0;
  std::vector<double> densities;
};

int cmd_roc(const RocArgs& args) {
  const auto pred = io::load_disparity(args.pred);
  const auto gt = io::load_disparity(args.gt);
  const auto conf = io::load_confidence(args.conf);
  const auto curve = metrics::sparsification(pred, gt, conf, args.theta, args.densities);
  if (args.out.empty()) {
    io::write_sparsification_csv(curve, std::cout);
  } else {
    std::ostringstream os;
    io::write_sparsification_csv(curve, os);
    write_text(args.out, os.str());
    std::cout << "auc " << io::format_number(metrics::auc(curve)) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// ensemble

struct EnsembleArgs {
  std::string primary, conf, baseline, out;
  double fraction = 0.15;
};

int cmd_ensemble(const EnsembleArgs& args) {
  const auto primary = io::load_disparity(args.primary);
  const auto conf = io::load_confidence(args.conf);
  const auto baseline = io::load_disparity(args.baseline);
  const auto merged = ensemble::conf_guided_ensemble(primary, conf, baseline, {args.fraction});
  if (fs::path(args.out).extension() == ".png") {
    io::write_file(args.out, io::encode_kitti_disparity(merged));
  } else {
    io::write_pfm(merged, args.out);
  }
  std::size_t changed = 0;
  for (std::size_t i = 0; i < merged.size(); ++i) changed += merged.value(i) != primary.value(i);
  std::cout << "replaced " << changed << " of " << primary.count_valid() << " valid pixels\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// loss-scan / opt-conf / auc-opt

struct LossScanArgs {
  LossFlags loss;
  std::vector<double> residuals = {10.0, 0.1};
  std::size_t points = 101;
  std::string out_dir = ".";
};

int cmd_loss_scan(const LossScanArgs& args) {
  const auto params = args.loss.params();
  params.validate();
  fs::create_directories(args.out_dir);
  for (double r : args.residuals) {
    const auto scan = loss::loss_scan(r, params, args.points);
    std::ostringstream os;
    io::write_loss_scan_csv(scan, os);
    const auto path = fs::path(args.out_dir) / ("loss_scan_gamma" + io::format_number(params.gamma) +
                                                "_r" + io::format_number(r) + ".csv");
    write_text(path, os.str());
    std::cout << path.string() << ": optimal c " << io::format_number(loss::optimal_confidence(r, params))
              << '\n';
  }
  return kOk;
}

int cmd_opt_conf(double residual, const LossFlags& flags) {
  std::cout << io::format_number(loss::optimal_confidence(residual, flags.params())) << '\n';
  return kOk;
}

int cmd_auc_opt(double epsilon) {
  std::cout << io::format_number(metrics::auc_opt(epsilon)) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// train-toy

struct TrainArgs {
  toy::SceneConfig scene;
  toy::TrainConfig train;
  std::string loss = "focused";
  std::string out_dir;
};

int cmd_train_toy(TrainArgs args) {
  const auto mode = args.loss == "l1" ? toy::LossMode::plain_l1 : toy::LossMode::focused;
  args.scene.seed = args.train.seed;
  const auto scene = toy::gen_synthetic_scene(args.scene);
  const auto result = toy::train(args.train, scene, mode);
  const auto& r = result.report;

  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  auto j = toy::to_json(r);
  j["gamma"] = args.train.loss_params.gamma;
  j["seed"] = args.train.seed;
  j["confidence_auc"] = metrics::auc(metrics::sparsification(r.prediction, scene.observed, r.confidence));
  write_json(dir / "report.json", j);
  io::write_pfm(r.prediction, dir / "prediction.pfm");
  io::write_pfm(r.confidence, dir / "confidence.pfm");
  io::write_confidence_png(r.confidence, dir / "confidence.png");
  io::write_pfm(scene.gt, dir / "gt.pfm");
  io::write_pfm(scene.observed, dir / "observed.pfm");

  std::cout << to_string(mode) << " loss " << io::format_number(r.initial_loss) << " -> "
            << io::format_number(r.final_loss) << ", clean epe " << io::format_number(r.clean_epe)
            << ", mean confidence clean " << io::format_number(r.mean_conf_clean)
            << " / corrupted " << io::format_number(r.mean_conf_corrupted) << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Confidence-aware disparity evaluation and focused-L1 loss tools", "stereoconf"};
  app.require_subcommand(1);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Disparity and confidence metrics as JSON");
  c_eval->add_option("--pred", eval.pred, "Predicted disparity (PFM/PNG file or directory)")->required();
  c_eval->add_option("--gt", eval.gt, "Ground-truth disparity (file or directory)")->required();
  c_eval->add_option("--conf", eval.conf, "Confidence map (file or directory)");
  c_eval->add_option("--theta", eval.theta, "Correctness threshold for the ROC, px")->capture_default_str();
  c_eval->add_option("--thresholds", eval.thresholds, "Error-rate thresholds, px")
      ->delimiter(',')
      ->capture_default_str();
  c_eval->add_option("--out", eval.out, "Output JSON path")->required();

  RocArgs roc;
  auto* c_roc = app.add_subcommand("roc", "Sparsification curve as CSV");
  c_roc->add_option("--pred", roc.pred, "Predicted disparity")->required();
  c_roc->add_option("--gt", roc.gt, "Ground-truth disparity")->required();
  c_roc->add_option("--conf", roc.conf, "Confidence map")->required();
  c_roc->add_option("--theta", roc.theta, "Correctness threshold, px")->capture_default_str();
  c_roc->add_option("--densities", roc.densities, "Densities in (0,1], increasing, ending at 1")
      ->delimiter(',');
  c_roc->add_option("--out", roc.out, "Output CSV path (stdout if omitted)");

  EnsembleArgs ens;
  auto* c_ens = app.add_subcommand("ensemble", "Replace least-confident pixels with a baseline");
  c_ens->add_option("--primary", ens.primary, "Primary disparity")->required();
  c_ens->add_option("--conf", ens.conf, "Confidence of the primary")->required();
  c_ens->add_option("--baseline", ens.baseline, "Baseline disparity")->required();
  c_ens->add_option("--fraction", ens.fraction, "Fraction of valid pixels to replace")
      ->capture_default_str();
  c_ens->add_option("--out", ens.out, "Output disparity (.pfm, or .png for KITTI format)")->required();

  LossScanArgs scan;
  auto* c_scan = app.add_subcommand("loss-scan", "Pixel loss against confidence as CSV");
  add_loss_flags(c_scan, scan.loss);
  c_scan->add_option("--residual", scan.residuals, "Absolute residual(s), px")
      ->delimiter(',')
      ->capture_default_str();
  c_scan->add_option("--points", scan.points, "Grid points over [c_min, 1]")->capture_default_str();
  c_scan->add_option("--out-dir", scan.out_dir, "Directory for the CSV files")->capture_default_str();

  double opt_residual = 0.0;
  LossFlags opt_flags;
  opt_flags.gamma = 1.0;
  auto* c_opt = app.add_subcommand("opt-conf", "Loss-minimizing confidence for a residual");
  c_opt->add_option("--residual", opt_residual, "Absolute residual, px")->required();
  add_loss_flags(c_opt, opt_flags);

  double epsilon = 0.0;
  auto* c_auc = app.add_subcommand("auc-opt", "Optimal AUC for a full-density error rate");
  c_auc->add_option("--epsilon", epsilon, "Full-density error rate in [0,1]")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train-toy", "Train the per-pixel toy model on a synthetic scene");
  c_train->add_option("--gamma", tr.train.loss_params.gamma, "Confidence prior exponent")
      ->capture_default_str();
  c_train->add_option("--k", tr.train.loss_params.k, "Confidence-to-scale slope")->capture_default_str();
  c_train->add_option("--a", tr.train.loss_params.a, "Scale intercept")->capture_default_str();
  c_train->add_option("--seed", tr.train.seed, "Scene and training seed")->capture_default_str();
  c_train->add_option("--loss", tr.loss, "Training loss")
      ->check(CLI::IsMember({"focused", "l1"}))
      ->capture_default_str();
  c_train->add_option("--iterations", tr.train.iterations, "Adam iterations")->capture_default_str();
  c_train->add_option("--batch", tr.train.batch_pixels, "Pixels per minibatch")->capture_default_str();
  c_train->add_option("--lr", tr.train.learning_rate, "Initial learning rate")->capture_default_str();
  c_train->add_option("--weight-decay", tr.train.weight_decay, "L1 weight penalty")->capture_default_str();
  c_train->add_option("--hidden", tr.train.hidden, "Hidden layer width")->capture_default_str();
  c_train->add_option("--width", tr.scene.width, "Scene width")->capture_default_str();
  c_train->add_option("--height", tr.scene.height, "Scene height")->capture_default_str();
  c_train->add_option("--outlier-frac", tr.scene.outlier_frac, "Corrupted pixel fraction")
      ->capture_default_str();
  c_train->add_option("--noise", tr.scene.noise_sigma, "Observation noise sigma, px")
      ->capture_default_str();
  c_train->add_option("--outlier-magnitude", tr.scene.outlier_magnitude, "Minimum outlier offset, px")
      ->capture_default_str();
  c_train->add_option("--out-dir", tr.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidationError;
  }

  try {
    if (*c_eval) return cmd_eval(eval);
    if (*c_roc) return cmd_roc(roc);
    if (*c_ens) return cmd_ensemble(ens);
    if (*c_scan) return cmd_loss_scan(scan);
    if (*c_opt) return cmd_opt_conf(opt_residual, opt_flags);
    if (*c_auc) return cmd_auc_opt(epsilon);
    if (*c_train) return cmd_train_toy(tr);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  }
  return kValidationError;
}

}  // namespace stereoconf::cli
