#pragma once

#include <functional>
#include <string>

#include <json.hpp>

#include "dseg/data/synth.hpp"
#include "dseg/harness/config.hpp"
#include "dseg/harness/report.hpp"

// End-to-end experiment at desk scale: generate, split, search per input
// mode, retrain, test under all three conditions, test out of distribution,
// ablate training-set size. Every random choice derives from one seed.

namespace dseg::harness {

/// Small models and budgets that keep a full run within minutes on one core.
inline ExperimentSettings desk_settings() {
  ExperimentSettings s;
  s.segmenter.depth = 3;
  s.segmenter.base_channels = 4;
  s.segmenter.input_size = 32;
  s.post.output_size = 32;
  s.detector.stride = 8;
  s.detector.base_channels = 16;
  s.detector.context_layers = 3;
  s.base_train.max_epochs = 15;
  return s;
}

inline nn::TrainConfig desk_detector_train() {
  nn::TrainConfig c;
  c.batch_size = 8;
  c.initial_lr = 3e-3;
  c.lr_decay = 0.97;
  c.max_epochs = 100;
  c.early_stop_patience = 25;
  return c;
}

struct PipelineConfig {
  std::uint64_t seed = 2024;
  data::SynthConfig synth;
  data::SynthConfig ood = [] {
    auto c = data::SynthConfig::preset(data::DistributionShift::ood_small_wounds);
    c.n_patients = 10;
    c.patient_prefix = "Q";
    return c;
  }();
  double test_fraction = 0.1;
  int folds = 5;
  int split_restarts = 200;
  int search_budget = 4;
  HyperSpace space;
  ExperimentSettings settings = desk_settings();
  nn::TrainConfig detector_train = desk_detector_train();
  int replicas = 5;
  AblationSpec ablation;
  bool with_ood = true;
  bool with_ablation = true;

  void validate() const {
    synth.validate();
    ood.validate();
    settings.validate();
    detector_train.validate();
    if (!(test_fraction > 0 && test_fraction < 1)) throw invalid_input("test_fraction must be in (0,1)");
    if (folds < 2) throw invalid_input("folds must be >= 2");
    if (search_budget < 1) throw invalid_input("search_budget must be >= 1");
    if (replicas < 1) throw invalid_input("replicas must be >= 1");
  }
};

inline json to_json(const PipelineConfig& c) {
  json fr = json::array();
  for (double f : c.ablation.fractions) fr.push_back(f);
  json conds = json::array();
  for (auto k : c.ablation.conditions) conds.push_back(to_string(k));
  return {{"seed", c.seed},
          {"synth", to_json(c.synth)},
          {"ood", to_json(c.ood)},
          {"test_fraction", c.test_fraction},
          {"folds", c.folds},
          {"split_restarts", c.split_restarts},
          {"search_budget", c.search_budget},
          {"settings", to_json(c.settings)},
          {"detector_train", to_json(c.detector_train)},
          {"replicas", c.replicas},
          {"ablation", {{"fractions", fr}, {"conditions", conds}, {"replicas", c.ablation.replicas}}},
          {"with_ood", c.with_ood},
          {"with_ablation", c.with_ablation}};
}

struct PipelineSeeds {
  std::uint64_t data, ood_data, split, detector, search_crop, search_full, final_train, ablation;

  explicit PipelineSeeds(std::uint64_t s)
      : data(derive_seed(s, {1})),
        ood_data(derive_seed(s, {2})),
        split(derive_seed(s, {3})),
        detector(derive_seed(s, {4})),
        search_crop(derive_seed(s, {5, 0})),
        search_full(derive_seed(s, {5, 1})),
        final_train(derive_seed(s, {6})),
        ablation(derive_seed(s, {7})) {}
};

inline json to_json(const PipelineSeeds& s) {
  return {{"data", s.data},         {"ood_data", s.ood_data},       {"split", s.split},
          {"detector", s.detector}, {"search_crop", s.search_crop}, {"search_full", s.search_full},
          {"final_train", s.final_train}, {"ablation", s.ablation}};
}

/// Random search for one input mode. Crop-mode configs are scored under
/// Manual so the choice does not depend on detector quality.
inline SearchResult search_mode(const Records& recs, const data::FoldAssignment& folds, InputMode mode,
                                const HyperSpace& space, const ExperimentSettings& s, int budget, std::uint64_t seed) {
  const Condition scored = mode == InputMode::crop ? Condition::manual : Condition::none;
  ExperimentSettings inner = s;
  inner.jobs = 1;  // parallelism lives at the trial level
  return random_search(
      budget, [&](Rng& rng) { return sample_segmentation(space.segmentation, s.base_train, rng); }, seed,
      [&](const Trial& t) { return cross_validate(recs, folds, t.config, inner, scored).mean_mcc; }, s.jobs);
}

struct PipelineResult {
  json experiment;  // in-distribution test, all three conditions
  json ood;         // out-of-distribution test (empty if disabled)
  json ablation;    // training-set size series (empty if disabled)
  double detector_ap50 = 0;
};

using ProgressFn = std::function<void(const std::string&)>;

inline json significance_and_conditions(json report, const std::vector<ConditionReport>& conds) {
  for (const auto& c : conds) report["conditions"].push_back(to_json(c));
  report["significance"] = significance_table(report);
  return report;
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  auto say = [&](const std::string& m) {
    if (progress) progress(m);
  };
  const PipelineSeeds seeds(cfg.seed);
  const auto& s = cfg.settings;

  say("generating data");
  const auto recs = data::generate_synthetic(cfg.synth, seeds.data);
  const auto folds = data::make_split(recs, cfg.test_fraction, cfg.folds, seeds.split, cfg.split_restarts);
  const auto train_idx = data::training_indices(recs, folds);
  const auto test_idx = data::test_indices(recs, folds);

  say("training detector");
  nn::TrainConfig dcfg = cfg.detector_train;
  dcfg.seed = seeds.detector;
  const auto [det_fit, det_mon] = monitor_split(train_idx, seeds.detector);
  nn::TrainHistory det_hist;
  const auto detector = train_detector_on(recs, det_fit, det_mon, dcfg, s, &det_hist);
  const DetectFn detect = detect_fn(detector);
  PipelineResult out;
  out.detector_ap50 = detector_ap(detector, recs, test_idx, s.post);

  say("searching crop-mode configs");
  const auto search_crop = search_mode(recs, folds, InputMode::crop, cfg.space, s, cfg.search_budget, seeds.search_crop);
  say("searching full-image configs");
  const auto search_full = search_mode(recs, folds, InputMode::full, cfg.space, s, cfg.search_budget, seeds.search_full);

  say("final training");
  const auto crop_models = train_replicas(recs, train_idx, InputMode::crop, search_crop.best, s, cfg.replicas, seeds.final_train);
  const auto full_models = train_replicas(recs, train_idx, InputMode::full, search_full.best, s, cfg.replicas, seeds.final_train);
  const std::vector<ConditionReport> in_dist{
      evaluate_condition(crop_models, recs, test_idx, Condition::manual, nullptr, s),
      evaluate_condition(full_models, recs, test_idx, Condition::none, nullptr, s),
      evaluate_condition(crop_models, recs, test_idx, Condition::automatic, &detect, s)};

  json exp = new_run_report("experiment", data::to_string(cfg.synth.distribution_shift));
  exp["config"] = to_json(cfg);
  exp["seeds"] = to_json(seeds);
  exp["split"] = to_json(folds);
  exp["search"] = {{"crop", to_json(search_crop)}, {"full", to_json(search_full)}};
  exp["detector"] = {{"ap50", out.detector_ap50},
                     {"best_epoch", det_hist.best_epoch},
                     {"epochs_run", det_hist.epochs.size()},
                     {"best_val_loss", det_hist.best_val_loss}};
  out.experiment = significance_and_conditions(std::move(exp), in_dist);

  if (cfg.with_ood) {
    say("out-of-distribution test");
    const auto ood = data::generate_synthetic(cfg.ood, seeds.ood_data);
    Indices all(ood.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const std::vector<ConditionReport> shifted{
        evaluate_condition(crop_models, ood, all, Condition::manual, nullptr, s),
        evaluate_condition(full_models, ood, all, Condition::none, nullptr, s),
        evaluate_condition(crop_models, ood, all, Condition::automatic, &detect, s)};
    json rep = new_run_report("experiment", data::to_string(cfg.ood.distribution_shift));
    rep["config"] = to_json(cfg);
    rep["seeds"] = to_json(seeds);
    out.ood = significance_and_conditions(std::move(rep), shifted);
  }

  if (cfg.with_ablation) {
    say("ablation");
    const auto pts = ablation(recs, train_idx, test_idx,
                              {{InputMode::crop, search_crop.best}, {InputMode::full, search_full.best}}, s, cfg.ablation,
                              seeds.ablation, seeds.final_train, &detect);
    json rep = new_run_report("ablation", data::to_string(cfg.synth.distribution_shift));
    rep["config"] = to_json(cfg);
    rep["seeds"] = to_json(seeds);
    rep["ablation"] = to_json(pts);
    out.ablation = std::move(rep);
  }
  return out;
}

/// Condition mean MCC from a report, or throws if the condition is absent.
inline double report_mcc(const json& report, Condition c) {
  for (const auto& k : report.at("conditions"))
    if (k.at("condition").get<std::string>() == to_string(c)) return k.at("mean").at("mcc").get<double>();
  throw invalid_input("report has no condition " + to_string(c));
}

}  // namespace dseg::harness
