#include "synocc/cli.hpp"

#include "synocc/augment.hpp"
#include "synocc/camera.hpp"
#include "synocc/config.hpp"
#include "synocc/gradcheck.hpp"
#include "synocc/heatmap.hpp"
#include "synocc/image.hpp"
#include "synocc/metrics.hpp"
#include "synocc/parallel.hpp"
#include "synocc/rng.hpp"
#include "synocc/training.hpp"
#include "synocc/voc.hpp"

#include "CLI11.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace synocc {

namespace {

namespace fs = std::filesystem;

// Bad flag values caught after parsing; maps to the usage exit code.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// %.17g round-trips doubles; used in CSV outputs.
std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

// Shared by every subcommand: config file, seed and thread overrides.
struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file (default: $SYNOCC_CONFIG)");
    seed_opt = app->add_option("--seed", seed, "Random seed");
    threads_opt = app->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  }

  RunConfig load() const {
    RunConfig config = load_run_config(config_path.empty() ? std::nullopt
                                                           : std::optional<fs::path>(config_path));
    if (seed_opt->count()) config.seed = seed;
    if (threads_opt->count()) config.thread_count = threads;
    return config;
  }
};

// The thread count never changes outputs, so it is left out of the echoed config; output
// directories stay byte-identical across --threads.
void echo_config(const fs::path& dir, const RunConfig& config) {
  nlohmann::json j = config.to_json();
  j.erase("thread_count");
  write_effective_config(dir, j);
}

// ---------------------------------------------------------------- ingest-voc

struct IngestArgs {
  CommonFlags common;
  std::string voc_root;
  std::string out_dir;
  std::string split = "trainval";
  int min_area = 500;
  bool keep_difficult = false;
  bool keep_truncated = false;
};

int cmd_ingest_voc(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig config = a.common.load();
  BuildOptions options;
  options.dataset_root = a.voc_root;
  options.out_dir = a.out_dir;
  options.split = a.split;
  options.threads = config.thread_count;
  options.rules.min_area_px = a.min_area;
  options.rules.exclude_difficult = !a.keep_difficult;
  options.rules.exclude_truncated = !a.keep_truncated;
  options.rules.validate();

  const BuildResult result = build_library(options);
  const FilterBreakdown& b = result.breakdown;
  out << "images: " << result.images << '\n'
      << "annotated objects: " << b.annotated << '\n'
      << "missing from mask: " << b.missing_mask << '\n'
      << "extracted: " << b.extracted << '\n'
      << "after class filter: " << b.after_class << '\n'
      << "after difficult filter: " << b.after_difficult << '\n'
      << "after truncated filter: " << b.after_truncated << '\n'
      << "after area filter (>= " << options.rules.min_area_px << " px): " << b.after_area << '\n';
  for (const auto& [subset, count] : result.subset_counts) {
    out << "retained in " << subset << ": " << count << '\n';
  }
  out << "retained: " << result.library.size() << '\n';
  if (!result.warnings.empty()) {
    err << result.warnings.size() << " warning(s)\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(result.warnings.size(), 10); ++i) {
      err << "  " << result.warnings[i] << '\n';
    }
  }
  echo_config(a.out_dir, config);
  return kExitOk;
}

// ---------------------------------------------------------------- augment

struct AugmentArgs {
  CommonFlags common;
  std::string library;
  std::string images;
  std::string boxes;
  std::string out_dir;
  double p_occ = 0.5;
  CLI::Option* p_occ_opt = nullptr;
};

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  static const std::set<std::string> kExt = {".png", ".jpg", ".jpeg", ".PNG", ".JPG", ".JPEG"};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && kExt.count(entry.path().extension().string())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_augment(const AugmentArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig config = a.common.load();
  if (a.p_occ_opt->count()) config.p_occ = a.p_occ;
  config.validate();
  const AugmentConfig aug = config.augment_config();
  const CropOptions crop_options = config.crop_options();

  const OccluderLibrary library =
      config.p_occ > 0 ? load_library(a.library) : OccluderLibrary{};
  const auto detections = read_detections(a.boxes);
  const std::vector<fs::path> frames = list_images(a.images);

  const fs::path out_dir = a.out_dir;
  fs::create_directories(out_dir / "crops");

  struct FrameResult {
    bool skipped = false;
    std::string log_line;
    std::vector<std::string> warnings;
  };
  std::vector<FrameResult> results(frames.size());
  parallel_for(frames.size(), config.thread_count, [&](std::size_t i) {
    const std::string frame_id = frames[i].stem().string();
    FrameResult& r = results[i];
    const auto det = detections.find(frame_id);
    if (det == detections.end()) {
      r.skipped = true;
      return;
    }
    const Image image = read_color_image(frames[i]);
    const CropTransform crop = crop_camera(
        det->second.box, CameraIntrinsics::centered(config.focal_length, image.width(), image.height()),
        crop_options);
    const AugParams params = sample_params(aug, library.size(), config.seed, frame_id);
    const GeometricResult geo = geometric_augment(image, std::nullopt, params, crop);
    OcclusionResult occ = occlude_frame(geo.image, library, params, frame_id);
    const Image final_image = appearance_augment(occ.image, params);
    write_png(out_dir / "crops" / (frame_id + ".png"), final_image);

    nlohmann::json line = to_json(occ.record);
    line["crop_scale"] = geo.crop.s;
    r.log_line = line.dump();
    r.warnings = std::move(occ.warnings);
  });

  std::ostringstream log;
  std::vector<std::string> skipped;
  std::size_t written = 0, occluded = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (results[i].skipped) {
      skipped.push_back(frames[i].stem().string());
      continue;
    }
    ++written;
    log << results[i].log_line << '\n';
    if (nlohmann::json::parse(results[i].log_line).at("params").at("occlude").get<bool>()) ++occluded;
    for (const auto& w : results[i].warnings) err << "warning: " << w << '\n';
  }
  write_text(out_dir / "occlusion_log.jsonl", log.str());
  echo_config(out_dir, config);

  out << "frames: " << frames.size() << '\n'
      << "written: " << written << '\n'
      << "occluded: " << occluded << '\n'
      << "skipped (no box): " << skipped.size() << '\n';
  for (const auto& id : skipped) err << "skipped frame without box: " << id << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  CommonFlags common;
  int trials = 100;
  double tolerance = 1e-4;
  bool inject_bug = false;
  std::string dump = "gradcheck_failure.json";
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  if (a.trials < 1) throw UsageError("--trials must be at least 1");
  const RunConfig config = a.common.load();
  GradcheckOptions options;
  options.trials = a.trials;
  options.seed = config.seed;
  options.tolerance = a.tolerance;
  options.inject_bug = a.inject_bug;
  options.threads = config.thread_count;
  const GradcheckReport report = run_gradcheck(options);

  nlohmann::json failures = nlohmann::json::array();
  for (const auto& s : report.suites) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-14s trials=%-4d max_rel_error=%.3e  %s", s.name.c_str(),
                  s.trials, s.max_rel_error, s.passed ? "ok" : "FAILED");
    out << buf << '\n';
    if (!s.passed) failures.push_back(s.worst_case);
  }
  if (report.passed()) return kExitOk;
  write_text(a.dump, failures.dump(2) + "\n");
  for (const auto& f : failures) {
    err << "failing case: suite=" << f.value("suite", "") << " trial=" << f.value("trial", -1)
        << " entry=" << f.value("entry", 0) << " analytic=" << f.value("analytic", 0.0)
        << " numeric=" << f.value("numeric", 0.0) << '\n';
  }
  err << "inputs written to " << a.dump << '\n';
  return kExitFailure;
}

// ---------------------------------------------------------------- train-toy

struct TrainArgs {
  CommonFlags common;
  std::string out_dir = "toy_run";
  int steps = 0;
  CLI::Option* steps_opt = nullptr;
  bool learn_c = false;
  double c_true = 1.0;
  CLI::Option* c_true_opt = nullptr;
};

nlohmann::json pose_json(const Pose3D& p) {
  nlohmann::json joints = nlohmann::json::array();
  for (const auto& v : p.joints) joints.push_back({v.x(), v.y(), v.z()});
  return joints;
}

std::string loss_curve_csv(const TrainReport& report) {
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < report.loss_curve.size(); ++i) {
    csv += std::to_string(i) + "," + exact(report.loss_curve[i]) + "\n";
  }
  return csv;
}

nlohmann::json report_json(const TrainReport& report) {
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& preds : report.snapshot_predictions) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& p : preds) per.push_back(pose_json(p));
    snaps.push_back(per);
  }
  nlohmann::json ensemble = nlohmann::json::array();
  for (const auto& p : report.ensemble_predictions) ensemble.push_back(pose_json(p));
  return {{"initial_loss", report.initial_loss},
          {"final_loss", report.final_loss},
          {"loss_ratio", report.final_loss / report.initial_loss},
          {"final_c", report.final_c},
          {"steps", report.loss_curve.size()},
          {"snapshot_steps", report.snapshot_steps},
          {"snapshot_predictions", snaps},
          {"ensemble_predictions", ensemble},
          {"ensemble_loss", report.ensemble_loss}};
}

int cmd_train_toy(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig config = a.common.load();
  if (a.steps_opt->count()) config.steps = a.steps;
  if (a.learn_c) config.learn_c = true;
  if (a.c_true_opt->count()) config.c_true = a.c_true;
  config.validate();

  const std::vector<ToySample> samples = make_synthetic_samples(config.synthetic_options());
  TrainReport report;
  try {
    report = toy_train(config.toy_config(), samples);
  } catch (const DivergenceError& e) {
    err << "diverged at step " << e.step() << ": " << e.what() << '\n';
    return kExitFailure;
  }
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  write_text(dir / "train_report.json", report_json(report).dump(2) + "\n");
  write_text(dir / "loss_curve.csv", loss_curve_csv(report));
  echo_config(dir, config);

  out << "initial loss: " << fixed(report.initial_loss, 4) << " mm\n"
      << "final loss: " << fixed(report.final_loss, 4) << " mm\n"
      << "loss ratio: " << fixed(report.final_loss / report.initial_loss, 4) << '\n'
      << "ensemble loss: " << fixed(report.ensemble_loss, 4) << " mm\n"
      << "c = " << fixed(report.final_c, 4) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- mpjpe

struct MpjpeArgs {
  std::string pred;
  std::string gt;
  std::string tta_flipped;
  std::vector<std::string> ensemble;
  std::string report = "mpjpe_report.csv";
  std::string flip_map = "h36m17";
};

std::map<std::string, PoseRecord> by_frame(const std::vector<PoseRecord>& records,
                                           const std::string& source) {
  std::map<std::string, PoseRecord> m;
  for (const auto& r : records) {
    if (!m.emplace(r.frame_id, r).second) {
      throw std::runtime_error(source + ": duplicate frame_id " + r.frame_id);
    }
  }
  return m;
}

// Lists every frame_id present in one file but not the other; true when the sets agree.
bool check_frames(const std::map<std::string, PoseRecord>& a, const std::string& a_name,
                  const std::map<std::string, PoseRecord>& b, const std::string& b_name,
                  std::ostream& err) {
  bool ok = true;
  for (const auto& [id, _] : a) {
    if (!b.count(id)) {
      err << "frame_id " << id << " in " << a_name << " but not in " << b_name << '\n';
      ok = false;
    }
  }
  for (const auto& [id, _] : b) {
    if (!a.count(id)) {
      err << "frame_id " << id << " in " << b_name << " but not in " << a_name << '\n';
      ok = false;
    }
  }
  return ok;
}

JointFlipMap make_flip_map(const std::string& name, int joints) {
  if (name == "h36m17") return JointFlipMap::h36m17();
  if (name == "identity") return JointFlipMap::identity(joints);
  throw UsageError("unknown --flip-map '" + name + "' (expected h36m17 or identity)");
}

int score_mpjpe(const MpjpeArgs& a, ActionReport* result, std::ostream& out, std::ostream& err) {
  const auto gt = by_frame(read_pose_jsonl(a.gt), a.gt);
  auto pred = by_frame(read_pose_jsonl(a.pred), a.pred);
  if (!check_frames(pred, a.pred, gt, a.gt, err)) return kExitFailure;

  if (!a.tta_flipped.empty()) {
    const auto flipped = by_frame(read_pose_jsonl(a.tta_flipped), a.tta_flipped);
    if (!check_frames(flipped, a.tta_flipped, gt, a.gt, err)) return kExitFailure;
    for (auto& [id, rec] : pred) {
      const JointFlipMap map = make_flip_map(a.flip_map, rec.pose.size());
      rec.pose = tta_average(rec.pose, flipped.at(id).pose, map);
    }
  }
  if (!a.ensemble.empty()) {
    std::vector<std::map<std::string, PoseRecord>> members;
    for (const auto& path : a.ensemble) {
      members.push_back(by_frame(read_pose_jsonl(path), path));
      if (!check_frames(members.back(), path, gt, a.gt, err)) return kExitFailure;
    }
    for (auto& [id, rec] : pred) {
      std::vector<Pose3D> poses{rec.pose};
      for (const auto& m : members) poses.push_back(m.at(id).pose);
      rec.pose = ensemble_average(poses);
    }
  }

  std::vector<EvalRecord> records;
  for (const auto& [id, g] : gt) records.push_back({id, g.action, pred.at(id).pose, g.pose});
  *result = per_action_report(records);
  (void)out;
  return kExitOk;
}

int cmd_mpjpe(const MpjpeArgs& a, std::ostream& out, std::ostream& err) {
  ActionReport report;
  if (const int rc = score_mpjpe(a, &report, out, err); rc != kExitOk) return rc;
  write_report_csv(a.report, report);
  for (const auto& row : report.actions) {
    out << row.action << ": " << fixed(row.mpjpe_mm, 3) << " mm (" << row.frames << " frames)\n";
  }
  out << "overall MPJPE: " << fixed(report.frame_weighted_mm, 3) << " mm\n"
      << "overall MPJPE (action-weighted): " << fixed(report.action_weighted_mm, 3) << " mm\n";
  return kExitOk;
}

// ---------------------------------------------------------------- sweep-pocc

struct SweepArgs {
  CommonFlags common;
  std::string values;
  std::string out_csv = "pocc_sweep.csv";
  std::string out_dir;
  std::vector<std::string> pred_files;
  std::string gt;
};

// Keeps each token verbatim so the CSV echoes it exactly.
std::vector<std::pair<std::string, double>> parse_pocc_list(const std::string& text) {
  std::vector<std::pair<std::string, double>> values;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto b = token.find_first_not_of(" \t");
    const auto e = token.find_last_not_of(" \t");
    if (b == std::string::npos) throw UsageError("empty entry in --p-occ-values");
    token = token.substr(b, e - b + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw UsageError("not a number in --p-occ-values: '" + token + "'");
    }
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError("p_occ outside [0, 1]: " + token);
    values.emplace_back(token, v);
  }
  if (text.empty() || text.back() == ',') throw UsageError("empty entry in --p-occ-values");
  return values;
}

// Occlusion enters the toy through visibility: joints whose 2D location falls under a
// sampled occluder footprint (square of side scale * crop) lose their image evidence.
std::vector<ToySample> occlude_toy_samples(std::vector<ToySample> samples, const RunConfig& config,
                                           double p_occ) {
  AugmentConfig aug = config.augment_config();
  aug.occlusion.p_occ = p_occ;
  aug.geometric = GeometricConfig::disabled();
  aug.appearance = AppearanceConfig::disabled();
  for (auto& s : samples) {
    const AugParams params = sample_params(aug, 1, config.seed, s.id);
    if (!params.occlude) continue;
    for (std::size_t j = 0; j < s.image_xy.size(); ++j) {
      for (std::size_t o = 0; o < params.positions.size(); ++o) {
        const double half = 0.5 * params.scales[o] * config.out_size;
        const Eigen::Vector2d d = (s.image_xy[j] - params.positions[o]).cwiseAbs();
        if (d.x() <= half && d.y() <= half) s.visible[j] = false;
      }
    }
  }
  return samples;
}

int cmd_sweep_pocc(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  const auto values = parse_pocc_list(a.values);
  const bool external = !a.pred_files.empty();
  if (external && a.gt.empty()) throw UsageError("--pred-files requires --gt");
  if (external && a.pred_files.size() != values.size()) {
    throw UsageError("--pred-files needs one file per p_occ value");
  }
  RunConfig config = a.common.load();
  config.validate();

  std::string csv = external ? "p_occ,mpjpe_mm\n" : "p_occ,final_loss_mm,hidden_joints\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& [token, p] = values[i];
    if (external) {
      MpjpeArgs m;
      m.pred = a.pred_files[i];
      m.gt = a.gt;
      ActionReport report;
      if (const int rc = score_mpjpe(m, &report, out, err); rc != kExitOk) return rc;
      csv += token + "," + exact(report.frame_weighted_mm) + "\n";
      continue;
    }
    const auto samples =
        occlude_toy_samples(make_synthetic_samples(config.synthetic_options()), config, p);
    std::size_t hidden = 0;
    for (const auto& s : samples) hidden += static_cast<std::size_t>(std::count(s.visible.begin(), s.visible.end(), false));
    TrainReport report;
    try {
      report = toy_train(config.toy_config(), samples);
    } catch (const DivergenceError& e) {
      err << "p_occ " << token << ": diverged at step " << e.step() << '\n';
      return kExitFailure;
    }
    csv += token + "," + exact(report.final_loss) + "," + std::to_string(hidden) + "\n";
  }
  write_text(a.out_csv, csv);
  if (!a.out_dir.empty()) echo_config(a.out_dir, config);
  out << csv;
  return kExitOk;
}

// ---------------------------------------------------------------- decode

struct DecodeArgs {
  CommonFlags common;
  std::string input;
  double scale = 1.0;
  double c = 1.0;
};

int cmd_decode(const DecodeArgs& a, std::ostream& out, std::ostream&) {
  const RunConfig config = a.common.load();
  const BackboneOutput backbone = read_backbone_output(a.input);
  const CoordinateGrid grid = CoordinateGrid::make(config.grid_spec());
  const DecodedPose decoded = decode(backbone, config.J, config.D, grid);
  const FrameGeometry geometry{config.focal_length, a.scale, static_cast<double>(config.out_size),
                               static_cast<double>(config.out_size)};
  const Pose3D pose = predict_pose(backbone, a.c, geometry, grid, {config.J, config.D}, 0);
  nlohmann::json xy = nlohmann::json::array();
  for (const auto& p : decoded.xy) xy.push_back({p.x(), p.y()});
  out << nlohmann::json{{"xy", xy}, {"dz", decoded.dz}, {"zstar", decoded.zstar},
                        {"joints", pose_json(pose)}}
             .dump()
      << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic occlusion augmentation and volumetric 3D pose geometry", "synocc"};
  app.require_subcommand(1);
  std::function<int()> action;

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest-voc", "Build the occluder library from Pascal VOC");
  ingest.common.attach(ingest_cmd);
  ingest_cmd->add_option("--voc-root", ingest.voc_root, "VOC dataset root (contains Annotations/)")->required();
  ingest_cmd->add_option("--out", ingest.out_dir, "Output library directory")->required();
  ingest_cmd->add_option("--split", ingest.split, "Segmentation split list");
  ingest_cmd->add_option("--min-area", ingest.min_area, "Minimum mask area in pixels");
  ingest_cmd->add_flag("--keep-difficult", ingest.keep_difficult, "Keep objects flagged difficult");
  ingest_cmd->add_flag("--keep-truncated", ingest.keep_truncated, "Keep objects flagged truncated");
  ingest_cmd->callback([&] { action = [&] { return cmd_ingest_voc(ingest, out, err); }; });

  AugmentArgs augment;
  auto* augment_cmd = app.add_subcommand("augment", "Crop and augment frames");
  augment.common.attach(augment_cmd);
  augment_cmd->add_option("--library", augment.library, "Occluder library directory")->required();
  augment_cmd->add_option("--images", augment.images, "Directory of input frames")->required();
  augment_cmd->add_option("--boxes", augment.boxes, "Detections JSONL")->required();
  augment_cmd->add_option("--out", augment.out_dir, "Output directory")->required();
  augment.p_occ_opt = augment_cmd->add_option("--p-occ", augment.p_occ, "Per-frame occlusion probability")
                          ->check(CLI::Range(0.0, 1.0));
  augment_cmd->callback([&] { action = [&] { return cmd_augment(augment, out, err); }; });

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad.common.attach(grad_cmd);
  grad_cmd->add_option("--trials", grad.trials, "Random instances per suite");
  grad_cmd->add_option("--tolerance", grad.tolerance, "Maximum relative error");
  grad_cmd->add_option("--dump", grad.dump, "Where failing inputs are written");
  grad_cmd->add_flag("--inject-bug", grad.inject_bug)->group("");
  grad_cmd->callback([&] { action = [&] { return cmd_gradcheck(grad, out, err); }; });

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-toy", "Toy end-to-end training on synthetic targets");
  train.common.attach(train_cmd);
  train_cmd->add_option("--out", train.out_dir, "Output directory");
  train.steps_opt = train_cmd->add_option("--steps", train.steps, "Gradient steps")->check(CLI::PositiveNumber);
  train_cmd->add_flag("--learn-c", train.learn_c, "Learn the focal correction c");
  train.c_true_opt = train_cmd->add_option("--c-true", train.c_true, "Planted focal correction")
                         ->check(CLI::PositiveNumber);
  train_cmd->callback([&] { action = [&] { return cmd_train_toy(train, out, err); }; });

  MpjpeArgs mp;
  auto* mp_cmd = app.add_subcommand("mpjpe", "Score predictions against ground truth");
  mp_cmd->add_option("--pred", mp.pred, "Prediction pose JSONL")->required();
  mp_cmd->add_option("--gt", mp.gt, "Ground-truth pose JSONL")->required();
  mp_cmd->add_option("--tta-flipped", mp.tta_flipped, "Predictions made on mirrored inputs");
  mp_cmd->add_option("--ensemble", mp.ensemble, "Further prediction files averaged with --pred");
  mp_cmd->add_option("--report", mp.report, "Per-action CSV output");
  mp_cmd->add_option("--flip-map", mp.flip_map, "Joint pairing for TTA: h36m17 or identity");
  mp_cmd->callback([&] { action = [&] { return cmd_mpjpe(mp, out, err); }; });

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-pocc", "Occlusion probability sweep");
  sweep.common.attach(sweep_cmd);
  sweep_cmd->add_option("--p-occ-values", sweep.values, "Comma-separated values in [0, 1]")->required();
  sweep_cmd->add_option("--out", sweep.out_csv, "CSV output");
  sweep_cmd->add_option("--out-dir", sweep.out_dir, "Directory for effective_config.json");
  sweep_cmd->add_option("--pred-files", sweep.pred_files, "One prediction file per value")->delimiter(',');
  sweep_cmd->add_option("--gt", sweep.gt, "Ground truth for --pred-files");
  sweep_cmd->callback([&] { action = [&] { return cmd_sweep_pocc(sweep, out, err); }; });

  DecodeArgs dec;
  auto* dec_cmd = app.add_subcommand("decode", "Decode one backbone output tensor to a pose");
  dec.common.attach(dec_cmd);
  dec_cmd->add_option("--input", dec.input, "Backbone tensor file")->required();
  dec_cmd->add_option("--scale", dec.scale, "Crop scale s")->check(CLI::PositiveNumber);
  dec_cmd->add_option("--c", dec.c, "Focal correction")->check(CLI::PositiveNumber);
  dec_cmd->callback([&] { action = [&] { return cmd_decode(dec, out, err); }; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace synocc
