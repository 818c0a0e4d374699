// dseg: command-line front end for the detect-and-segment pipeline.
//
// Every subcommand accepts --config FILE (a JSON object whose keys are the
// subcommand's long flag names); flags given on the command line win. The
// resolved settings are written as resolved_config.json next to the outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dseg/data/manifest.hpp"
#include "dseg/data/split.hpp"
#include "dseg/data/synth.hpp"
#include "dseg/detpost.hpp"
#include "dseg/harness/config.hpp"
#include "dseg/harness/pipeline.hpp"
#include "dseg/harness/report.hpp"
#include "dseg/nn/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dseg;

namespace {

// Exit statuses.
constexpr int ok = 0;
constexpr int bad_input = 1;
constexpr int runtime_failure = 2;

fs::path default_output_dir() {
  if (const char* env = std::getenv("DSEG_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

/// Splices the keys of a --config JSON file into the argument list as
/// --key=value, skipping keys already given as flags.
std::vector<std::string> merge_config_file(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path) return args;
  std::ifstream in(*path);
  if (!in) throw load_error("cannot open config file " + *path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw load_error("config file " + *path + ": " + e.what());
  }
  if (!j.is_object()) throw invalid_input("config file " + *path + " must hold a JSON object");
  auto given = [&](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (const auto& [key, v] : j.items()) {
    const std::string flag = "--" + key;
    if (key == "config" || given(flag)) continue;
    if (v.is_array()) {
      for (const auto& e : v) args.push_back(flag + "=" + scalar(e));
    } else {
      args.push_back(flag + "=" + scalar(v));
    }
  }
  return args;
}

/// Long-name -> value of every option of `sub`, including defaults.
json resolved_options(const CLI::App& sub) {
  json out = json::object();
  for (const CLI::Option* o : sub.get_options()) {
    const std::string name = o->get_lnames().empty() ? o->get_name() : o->get_lnames().front();
    if (name == "help" || name == "config" || name == "--help") continue;
    std::vector<std::string> vals = o->count() > 0 ? o->results() : std::vector<std::string>{};
    if (vals.empty()) {
      const auto d = o->get_default_str();
      if (d.empty()) continue;
      vals.push_back(d);
    }
    auto conv = [](const std::string& s) -> json {
      try {
        auto v = json::parse(s);
        if (v.is_number() || v.is_boolean()) return v;
      } catch (const json::exception&) {
      }
      return s;
    };
    if (vals.size() == 1) {
      out[name] = conv(vals[0]);
    } else {
      json arr = json::array();
      for (const auto& v : vals) arr.push_back(conv(v));
      out[name] = std::move(arr);
    }
  }
  return out;
}

void write_json(const fs::path& p, const json& j) { data::write_file_atomic(p, j.dump(2) + "\n"); }

void write_bytes_atomic(const fs::path& p, const std::string& bytes) { data::write_file_atomic(p, bytes); }

// ---------------------------------------------------------------------------
// Shared option groups

struct TrainFlags {
  nn::TrainConfig cfg;
  std::string params_file;  // JSON TrainConfig overlay (e.g. a search's best_config.json)

  void add(CLI::App* sub) {
    sub->add_option("--epochs", cfg.max_epochs, "Maximum training epochs")->capture_default_str();
    sub->add_option("--batch-size", cfg.batch_size, "Mini-batch size")->capture_default_str();
    sub->add_option("--lr", cfg.initial_lr, "Initial learning rate")->capture_default_str();
    sub->add_option("--lr-decay", cfg.lr_decay, "Per-epoch learning-rate factor")->capture_default_str();
    sub->add_option("--weight-decay", cfg.weight_decay, "Decoupled weight decay")->capture_default_str();
    sub->add_option("--patience", cfg.early_stop_patience, "Early-stopping patience (epochs)")->capture_default_str();
    sub->add_option("--early-stopping", cfg.early_stopping, "Enable early stopping")->capture_default_str();
    sub->add_option("--beta1", cfg.adam_beta1, "Adam first-moment decay")->capture_default_str();
    sub->add_option("--params", params_file, "JSON training config to start from (flags override)");
  }

  /// Starting point is the params file if any; explicitly given flags win.
  nn::TrainConfig resolve(const CLI::App* sub, const nn::TrainConfig& defaults) const {
    nn::TrainConfig c = defaults;
    if (!params_file.empty()) {
      std::ifstream in(params_file);
      if (!in) throw load_error("cannot open " + params_file);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw load_error(params_file + ": " + e.what());
      }
      if (j.contains("best_config")) j = j.at("best_config");
      c = harness::train_config_from_json(j, c);
    }
    auto given = [&](const char* n) { return sub->get_option(n)->count() > 0; };
    if (given("--epochs")) c.max_epochs = cfg.max_epochs;
    if (given("--batch-size")) c.batch_size = cfg.batch_size;
    if (given("--lr")) c.initial_lr = cfg.initial_lr;
    if (given("--lr-decay")) c.lr_decay = cfg.lr_decay;
    if (given("--weight-decay")) c.weight_decay = cfg.weight_decay;
    if (given("--patience")) c.early_stop_patience = cfg.early_stop_patience;
    if (given("--early-stopping")) c.early_stopping = cfg.early_stopping;
    if (given("--beta1")) c.adam_beta1 = cfg.adam_beta1;
    c.validate();
    return c;
  }
};

struct SplitInput {
  std::string manifest;
  std::string split;

  void add(CLI::App* sub, bool split_required) {
    sub->add_option("--manifest", manifest, "Dataset manifest (JSON)")->required();
    auto* o = sub->add_option("--split", split, "FoldAssignment JSON from `split`");
    if (split_required) o->required();
  }

  std::optional<data::FoldAssignment> load_split() const {
    if (split.empty()) return std::nullopt;
    std::ifstream in(split);
    if (!in) throw load_error("cannot open split " + split);
    try {
      return data::fold_assignment_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw load_error("split " + split + ": " + e.what());
    }
  }
};

harness::Indices all_indices(std::size_t n) {
  harness::Indices idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

harness::ExperimentSettings desk_settings_with(int seg_base, int seg_depth, int input_size, const std::string& variant) {
  auto s = harness::desk_settings();
  s.segmenter.base_channels = seg_base;
  s.segmenter.depth = seg_depth;
  s.segmenter.input_size = input_size;
  s.segmenter.variant = nn::parse_segmenter_variant(variant);
  s.post.output_size = input_size;
  return s;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Detect-and-segment wound segmentation: data, training, evaluation and reports"};
  app.require_subcommand(1);
  fs::path out_dir = default_output_dir();
  std::uint64_t seed = 0;
  int jobs = 1;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-o,--output", out_dir, "Output directory (default: $DSEG_OUTPUT_DIR or .)")->capture_default_str();
    sub->add_option("--seed", seed, "Master seed")->capture_default_str();
    sub->add_option("--config", "JSON file with the same keys as the flags");
  };

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset (PNGs + manifest.json)");
  common(gen);
  int g_patients = 30, g_images = 0, g_size = 0;
  std::string g_shift = "in_distribution";
  gen->add_option("--patients", g_patients, "Number of patients")->capture_default_str();
  gen->add_option("--images", g_images, "Images per patient (default: 8-12 at random)");
  gen->add_option("--image-size", g_size, "Image side in pixels (default: from the shift preset)");
  gen->add_option("--shift", g_shift, "in_distribution | ood_small_wounds | ood_cluttered_background")->capture_default_str();

  // split
  auto* spl = app.add_subcommand("split", "Patient-level holdout + stratified k-fold assignment");
  common(spl);
  std::string s_manifest;
  double s_test = 0.1;
  int s_folds = 5, s_restarts = 200;
  spl->add_option("--manifest", s_manifest, "Dataset manifest")->required();
  spl->add_option("--test-fraction", s_test, "Share of patients held out for testing")->capture_default_str();
  spl->add_option("--folds", s_folds, "Number of cross-validation folds")->capture_default_str();
  spl->add_option("--restarts", s_restarts, "Random partitions tried for stratification")->capture_default_str();

  // model shape flags shared by training, search and evaluation commands
  int seg_base = 4, seg_depth = 3, input_size = 32;
  std::string variant = "unet_lite";
  auto seg_flags = [&](CLI::App* sub) {
    sub->add_option("--variant", variant, "unet_lite | convnet_lite")->capture_default_str();
    sub->add_option("--base-channels", seg_base, "Segmenter width")->capture_default_str();
    sub->add_option("--depth", seg_depth, "Segmenter depth")->capture_default_str();
    sub->add_option("--input-size", input_size, "Segmenter input / crop size")->capture_default_str();
  };

  // train-detector
  auto* tdet = app.add_subcommand("train-detector", "Train the wound detector");
  common(tdet);
  SplitInput td_in;
  td_in.add(tdet, false);
  TrainFlags td_train;
  td_train.cfg = harness::desk_detector_train();
  td_train.add(tdet);
  nn::DetectorConfig det_cfg = harness::desk_settings().detector;
  tdet->add_option("--stride", det_cfg.stride, "Output stride (power of two)")->capture_default_str();
  tdet->add_option("--det-channels", det_cfg.base_channels, "Detector width")->capture_default_str();
  tdet->add_option("--context-layers", det_cfg.context_layers, "Convs at output resolution")->capture_default_str();

  // train-segmenter
  auto* tseg = app.add_subcommand("train-segmenter", "Train a segmenter on crops or full images");
  common(tseg);
  SplitInput ts_in;
  ts_in.add(tseg, false);
  TrainFlags ts_train;
  ts_train.cfg = harness::desk_settings().base_train;
  ts_train.add(tseg);
  seg_flags(tseg);
  std::string mode_str = "crop";
  tseg->add_option("--mode", mode_str, "crop (Manual/Automatic) | full (None)")->capture_default_str();

  // search
  auto* srch = app.add_subcommand("search", "Random hyperparameter search with k-fold cross-validation");
  common(srch);
  SplitInput sr_in;
  sr_in.add(srch, true);
  seg_flags(srch);
  int budget = 20;
  srch->add_option("--mode", mode_str, "crop | full")->capture_default_str();
  srch->add_option("--budget", budget, "Number of trials")->capture_default_str();
  srch->add_option("--jobs", jobs, "Parallel trials")->capture_default_str();
  int sr_epochs = harness::desk_settings().base_train.max_epochs;
  srch->add_option("--epochs", sr_epochs, "Epoch budget per trial")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate one condition on a test set, write a RunReport");
  common(ev);
  SplitInput ev_in;
  ev_in.add(ev, false);
  std::string condition = "automatic", det_path, dataset_label;
  std::vector<std::string> seg_paths;
  ev->add_option("--condition", condition, "manual | none | automatic")->capture_default_str();
  ev->add_option("--segmenter", seg_paths, "Segmenter checkpoint(s); several make replicas")->required();
  ev->add_option("--detector", det_path, "Detector checkpoint (automatic only)");
  ev->add_option("--dataset", dataset_label, "Label recorded in the report");
  ev->add_option("--jobs", jobs, "Parallel replicas")->capture_default_str();

  // ablate
  auto* abl = app.add_subcommand("ablate", "Retrain on nested subsets of the training images");
  common(abl);
  SplitInput ab_in;
  ab_in.add(abl, true);
  seg_flags(abl);
  std::string crop_params, full_params;
  std::vector<double> fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int ab_replicas = 1;
  abl->add_option("--detector", det_path, "Detector checkpoint")->required();
  abl->add_option("--crop-params", crop_params, "Training config JSON for the crop model");
  abl->add_option("--full-params", full_params, "Training config JSON for the full-image model");
  abl->add_option("--fractions", fractions, "Shares of training images removed")->capture_default_str();
  abl->add_option("--replicas", ab_replicas, "Models per fraction and mode")->capture_default_str();
  abl->add_option("--jobs", jobs, "Parallel replicas")->capture_default_str();

  // infer
  auto* inf = app.add_subcommand("infer", "Segment one image with a detector + segmenter");
  common(inf);
  std::string image_path, inf_seg;
  inf->add_option("--image", image_path, "Input PNG")->required();
  inf->add_option("--detector", det_path, "Detector checkpoint")->required();
  inf->add_option("--segmenter", inf_seg, "Segmenter checkpoint (crop mode)")->required();

  // report
  auto* rep = app.add_subcommand("report", "Render tables and plots from RunReport JSON files");
  common(rep);
  std::vector<std::string> report_paths;
  rep->add_option("reports", report_paths, "RunReport JSON files")->required();

  // pipeline (the whole experiment from one seed)
  auto* pipe = app.add_subcommand("pipeline", "Run generate, split, search, final test, OOD test and ablation");
  common(pipe);
  int p_budget = harness::PipelineConfig{}.search_budget, p_replicas = harness::PipelineConfig{}.replicas;
  pipe->add_option("--budget", p_budget, "Search trials per input mode")->capture_default_str();
  pipe->add_option("--replicas", p_replicas, "Final models per input mode")->capture_default_str();
  pipe->add_option("--jobs", jobs, "Parallel trials / replicas")->capture_default_str();

  auto args = merge_config_file(std::vector<std::string>(argv + 1, argv + argc));
  std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : bad_input;
  }

  CLI::App* used = app.get_subcommands().front();
  fs::create_directories(out_dir);
  write_json(out_dir / "resolved_config.json", json{{"command", used->get_name()}, {"options", resolved_options(*used)}});
  auto log = [](const std::string& m) { std::cerr << m << "\n"; };

  if (used == gen) {
    auto cfg = data::SynthConfig::preset(data::parse_distribution_shift(g_shift));
    cfg.n_patients = g_patients;
    if (g_images > 0) cfg.images_per_patient_range = {g_images, g_images};
    if (g_size > 0) cfg.image_size = g_size;
    cfg.validate();
    const auto recs = data::generate_synthetic(cfg, seed);
    data::write_dataset(out_dir, recs);
    log("wrote " + std::to_string(recs.size()) + " records to " + out_dir.string());
    return ok;
  }

  if (used == spl) {
    const auto recs = data::load_manifest(s_manifest);
    const auto fa = data::make_split(recs, s_test, s_folds, seed, s_restarts);
    write_json(out_dir / "split.json", data::to_json(fa));
    log("objective " + std::to_string(fa.objective));
    return ok;
  }

  if (used == tdet) {
    const auto recs = data::load_manifest(td_in.manifest);
    const auto fa = td_in.load_split();
    const auto train_idx = fa ? data::training_indices(recs, *fa) : all_indices(recs.size());
    auto s = harness::desk_settings();
    s.detector = det_cfg;
    auto cfg = td_train.resolve(tdet, harness::desk_detector_train());
    cfg.seed = seed;
    const auto [fit, mon] = harness::monitor_split(train_idx, seed);
    nn::TrainHistory hist;
    const auto det = harness::train_detector_on(recs, fit, mon, cfg, s, &hist);
    write_bytes_atomic(out_dir / "detector.ckpt", nn::encode(det, seed));
    json h{{"best_epoch", hist.best_epoch}, {"best_val_loss", hist.best_val_loss}, {"stopped_early", hist.stopped_early},
           {"train_config", harness::to_json(cfg)}};
    if (fa) h["test_ap50"] = harness::detector_ap(det, recs, data::test_indices(recs, *fa), s.post);
    write_json(out_dir / "detector_history.json", h);
    return ok;
  }

  if (used == tseg) {
    const auto recs = data::load_manifest(ts_in.manifest);
    const auto fa = ts_in.load_split();
    const auto train_idx = fa ? data::training_indices(recs, *fa) : all_indices(recs.size());
    auto s = desk_settings_with(seg_base, seg_depth, input_size, variant);
    s.validate();
    const auto mode = mode_str == "crop" ? harness::InputMode::crop
                      : mode_str == "full" ? harness::InputMode::full
                                           : throw invalid_input("--mode must be crop or full");
    auto cfg = ts_train.resolve(tseg, s.base_train);
    cfg.seed = seed;
    const auto [fit, mon] = harness::monitor_split(train_idx, seed);
    nn::TrainHistory hist;
    const auto train = harness::segmenter_samples(recs, fit, mode, s.post);
    const auto val = harness::segmenter_samples(recs, mon, mode, s.post);
    auto res = nn::train_segmenter<float>(train, val, s.segmenter, cfg, s.augment);
    write_bytes_atomic(out_dir / "segmenter.ckpt", nn::encode(res.model, seed, res.history.class_weight));
    write_json(out_dir / "segmenter_history.json",
               {{"mode", mode_str},
                {"best_epoch", res.history.best_epoch},
                {"best_val_loss", res.history.best_val_loss},
                {"class_weight", res.history.class_weight},
                {"train_config", harness::to_json(cfg)}});
    return ok;
  }

  if (used == srch) {
    const auto recs = data::load_manifest(sr_in.manifest);
    const auto fa = *sr_in.load_split();
    auto s = desk_settings_with(seg_base, seg_depth, input_size, variant);
    s.base_train.max_epochs = sr_epochs;
    s.jobs = jobs;
    s.validate();
    const auto mode = mode_str == "crop" ? harness::InputMode::crop
                      : mode_str == "full" ? harness::InputMode::full
                                           : throw invalid_input("--mode must be crop or full");
    const auto res = harness::search_mode(recs, fa, mode, harness::HyperSpace{}, s, budget, seed);
    write_json(out_dir / "trials.json", harness::to_json(res));
    write_json(out_dir / "best_config.json", harness::to_json(res.best));
    return ok;
  }

  if (used == ev) {
    const auto recs = data::load_manifest(ev_in.manifest);
    const auto fa = ev_in.load_split();
    const auto idx = fa ? data::test_indices(recs, *fa) : all_indices(recs.size());
    const auto c = harness::parse_condition(condition);
    std::vector<nn::SegmenterModel> models;
    for (const auto& p : seg_paths) models.push_back(nn::load_segmenter(p).first);
    auto s = harness::desk_settings();
    s.segmenter = models.front().config();
    s.post.output_size = s.segmenter.input_size;
    s.jobs = jobs;
    std::optional<nn::DetectorModel> det;
    harness::DetectFn detect;
    if (c == harness::Condition::automatic) {
      if (det_path.empty()) throw invalid_input("--detector is required for the automatic condition");
      det = nn::load_detector(det_path).first;
      detect = harness::detect_fn(*det);
    }
    auto report = harness::new_run_report("eval", dataset_label.empty() ? fs::path(ev_in.manifest).parent_path().filename().string()
                                                                          : dataset_label);
    report["config"] = {{"segmenters", seg_paths}, {"detector", det_path}, {"postprocess", harness::to_json(s.post)}};
    report["seeds"] = {{"seed", seed}};
    report["conditions"].push_back(
        harness::to_json(harness::evaluate_condition(models, recs, idx, c, det ? &detect : nullptr, s)));
    write_json(out_dir / "report.json", report);
    std::cout << "mean MCC " << report["conditions"][0]["mean"]["mcc"].get<double>() << "\n";
    return ok;
  }

  if (used == abl) {
    const auto recs = data::load_manifest(ab_in.manifest);
    const auto fa = *ab_in.load_split();
    auto s = desk_settings_with(seg_base, seg_depth, input_size, variant);
    s.jobs = jobs;
    s.validate();
    auto load_cfg = [&](const std::string& path) {
      if (path.empty()) return s.base_train;
      std::ifstream in(path);
      if (!in) throw load_error("cannot open " + path);
      auto j = json::parse(in);
      if (j.contains("best_config")) j = j.at("best_config");
      return harness::train_config_from_json(j, s.base_train);
    };
    const auto det = nn::load_detector(det_path).first;
    const harness::DetectFn detect = harness::detect_fn(det);
    harness::AblationSpec spec;
    spec.fractions = fractions;
    spec.replicas = ab_replicas;
    const auto pts = harness::ablation(recs, data::training_indices(recs, fa), data::test_indices(recs, fa),
                                       {{harness::InputMode::crop, load_cfg(crop_params)},
                                        {harness::InputMode::full, load_cfg(full_params)}},
                                       s, spec, derive_seed(seed, {7}), derive_seed(seed, {6}), &detect);
    auto report = harness::new_run_report("ablation", fs::path(ab_in.manifest).parent_path().filename().string());
    report["config"] = {{"settings", harness::to_json(s)}, {"detector", det_path}};
    report["seeds"] = {{"seed", seed}};
    report["ablation"] = harness::to_json(pts);
    write_json(out_dir / "ablation.json", report);
    data::write_file_atomic(out_dir / "ablation.svg", harness::render_ablation_svg(report["ablation"]));
    return ok;
  }

  if (used == inf) {
    const auto image = load_image_png(image_path);
    const auto det = nn::load_detector(det_path).first;
    const auto seg = nn::load_segmenter(inf_seg).first;
    detpost::PostprocessParams post;
    post.output_size = seg.config().input_size;
    const auto [mask, diag] = detpost::ds_infer(image, det, seg, post);
    const auto stem = fs::path(image_path).stem().string();
    fs::create_directories(out_dir);
    save_mask_png(out_dir / (stem + "_mask.png"), mask);
    json boxes = json::array();
    for (const auto& d : diag.boxes)
      boxes.push_back({{"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}}, {"confidence", d.confidence}});
    write_json(out_dir / (stem + "_diagnostics.json"), {{"raw_detections", diag.raw_detections},
                                                         {"box_count", diag.box_count},
                                                         {"fallback", diag.fallback},
                                                         {"boxes", boxes}});
    return ok;
  }

  if (used == rep) {
    std::vector<json> tables;
    for (const auto& p : report_paths) {
      std::ifstream in(p);
      if (!in) throw load_error("cannot open report " + p);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw load_error(p + ": " + e.what());
      }
      if (!j.contains("metadata") || !j.contains("kind")) throw load_error(p + " is not a RunReport");
      if (j.contains("ablation") && j.at("ablation").is_array()) {
        const auto svg = out_dir / (fs::path(p).stem().string() + "_ablation.svg");
        data::write_file_atomic(svg, harness::render_ablation_svg(j.at("ablation")));
      }
      tables.push_back(std::move(j));
    }
    const auto text = harness::render_table(harness::merge_by_dataset(tables));
    data::write_file_atomic(out_dir / "table.txt", text);
    std::cout << text;
    return ok;
  }

  if (used == pipe) {
    harness::PipelineConfig cfg;
    cfg.seed = seed;
    cfg.search_budget = p_budget;
    cfg.replicas = p_replicas;
    cfg.settings.jobs = jobs;
    const auto res = harness::run_pipeline(cfg, log);
    write_json(out_dir / "experiment.json", res.experiment);
    write_json(out_dir / "ood.json", res.ood);
    write_json(out_dir / "ablation.json", res.ablation);
    data::write_file_atomic(out_dir / "table.txt", harness::render_table({res.experiment, res.ood}));
    data::write_file_atomic(out_dir / "ablation.svg", harness::render_ablation_svg(res.ablation.at("ablation")));
    std::cout << harness::render_table({res.experiment, res.ood});
    return ok;
  }
  return bad_input;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bad_input;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return runtime_failure;
  }
}
