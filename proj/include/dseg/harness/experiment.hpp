#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dseg/core/error.hpp"
#include "dseg/core/random.hpp"
#include "dseg/data/augment.hpp"
#include "dseg/data/manifest.hpp"
#include "dseg/data/split.hpp"
#include "dseg/detpost.hpp"
#include "dseg/harness/stats.hpp"
#include "dseg/metrics.hpp"
#include "dseg/nn/detector.hpp"
#include "dseg/nn/train.hpp"

namespace dseg::harness {

using data::DatasetRecord;
using Records = std::vector<DatasetRecord>;
using Indices = std::vector<std::size_t>;

enum class Condition { manual, none, automatic };

inline std::string to_string(Condition c) {
  switch (c) {
    case Condition::manual: return "manual";
    case Condition::none: return "none";
    case Condition::automatic: return "automatic";
  }
  return "?";
}

inline Condition parse_condition(const std::string& s) {
  if (s == "manual" || s == "Manual") return Condition::manual;
  if (s == "none" || s == "None") return Condition::none;
  if (s == "automatic" || s == "Automatic") return Condition::automatic;
  throw invalid_input("unknown condition '" + s + "'");
}

/// What the segmenter is trained on: box crops (Manual and Automatic share
/// these models) or whole images.
enum class InputMode { crop, full };

inline InputMode input_mode(Condition c) { return c == Condition::none ? InputMode::full : InputMode::crop; }
inline std::string to_string(InputMode m) { return m == InputMode::crop ? "crop" : "full"; }

struct ExperimentSettings {
  nn::SegmenterConfig segmenter;
  nn::DetectorConfig detector;
  detpost::PostprocessParams post;
  data::AugmentParams augment;
  nn::TrainConfig base_train;  // epoch budget and fixed fields for searched configs
  int jobs = 1;

  void validate() const {
    post.validate();
    augment.validate();
    base_train.validate();
    if (segmenter.input_size != post.output_size)
      throw invalid_input("segmenter input_size (" + std::to_string(segmenter.input_size) + ") must equal output_size (" +
                          std::to_string(post.output_size) + ")");
    if (jobs < 1) throw invalid_input("jobs must be >= 1");
  }
};

/// Runs fn(i) for i in [0,n) on up to `jobs` threads. Results must be written
/// by index; the first exception (lowest index) is rethrown.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Condition preprocessing and evaluation

/// Segmenter training pairs for the given records: one per ground-truth box
/// (enlarged, cropped, padded, resized) in crop mode, one per image in full
/// mode.
inline std::vector<nn::SegSample> segmenter_samples(const Records& recs, std::span<const std::size_t> idx, InputMode mode,
                                                    const detpost::PostprocessParams& post) {
  std::vector<nn::SegSample> out;
  for (auto i : idx) {
    const auto& r = recs.at(i);
    if (mode == InputMode::full) {
      auto [img, geom] = detpost::full_image_crop(r.image, post.output_size);
      out.push_back({std::move(img), apply_geometry(r.mask, geom)});
    } else {
      for (const auto& b : r.gt_boxes) {
        auto [img, geom] = detpost::build_crop(r.image, b, post);
        out.push_back({std::move(img), apply_geometry(r.mask, geom)});
      }
    }
  }
  return out;
}

inline std::vector<Detection> ground_truth_detections(const DatasetRecord& r) {
  std::vector<Detection> d;
  for (const auto& b : r.gt_boxes) d.push_back({b, 1.0});
  return d;
}

using SegmentFn = std::function<std::vector<ProbabilityMap>(std::span<const Image* const>)>;
using DetectFn = std::function<std::vector<Detection>(const Image&)>;

inline SegmentFn segment_fn(const nn::SegmenterModel& m) {
  return [&m](std::span<const Image* const> batch) { return m.predict(batch); };
}
inline DetectFn detect_fn(const nn::DetectorModel& d) {
  return [&d](const Image& img) { return nn::detect(d, img); };
}

/// Full-image prediction for one record under a condition. Automatic needs
/// `detect`; Manual uses the record's ground-truth boxes at confidence 1.
inline std::pair<Mask, detpost::Diagnostics> predict_condition(const DatasetRecord& r, Condition c,
                                                               const SegmentFn& segment, const DetectFn* detect,
                                                               const detpost::PostprocessParams& post) {
  switch (c) {
    case Condition::none: {
      std::vector<std::pair<Image, CropGeometry>> crops{detpost::full_image_crop(r.image, post.output_size)};
      detpost::Diagnostics d;
      d.fallback = false;
      return {detpost::segment_crops(r.image, std::span<const std::pair<Image, CropGeometry>>(crops), segment), d};
    }
    case Condition::manual:
      return detpost::ds_infer(
          r.image, [&r](const Image&) { return ground_truth_detections(r); }, segment, post);
    case Condition::automatic:
      if (!detect || !*detect) throw invalid_input("automatic condition needs a detector");
      return detpost::ds_infer(r.image, *detect, segment, post);
  }
  throw invalid_input("bad condition");
}

struct ImageResult {
  std::string image;
  std::string patient;
  metrics::PixelMetrics metrics;
  bool fallback = false;
  int boxes = 0;
};

inline std::vector<ImageResult> evaluate(const Records& recs, std::span<const std::size_t> idx, Condition c,
                                         const SegmentFn& segment, const DetectFn* detect,
                                         const detpost::PostprocessParams& post) {
  std::vector<ImageResult> out;
  out.reserve(idx.size());
  for (auto i : idx) {
    const auto& r = recs.at(i);
    auto [pred, diag] = predict_condition(r, c, segment, detect, post);
    out.push_back({r.image_ref, r.patient_id, metrics::pixel_metrics(pred, r.mask), diag.fallback, diag.box_count});
  }
  return out;
}

inline metrics::PixelMetrics mean_metrics(std::span<const ImageResult> results) {
  metrics::PixelMetrics m{0, 0, 0};
  if (results.empty()) return m;
  for (const auto& r : results) {
    m.mcc += r.metrics.mcc;
    m.dice += r.metrics.dice;
    m.iou += r.metrics.iou;
  }
  const double n = static_cast<double>(results.size());
  return {m.mcc / n, m.dice / n, m.iou / n};
}

// ---------------------------------------------------------------------------
// Training helpers

inline nn::SegmenterModel train_segmenter_on(const Records& recs, std::span<const std::size_t> train_idx,
                                             std::span<const std::size_t> val_idx, InputMode mode,
                                             const nn::TrainConfig& cfg, const ExperimentSettings& s,
                                             nn::TrainHistory* history = nullptr) {
  const auto train = segmenter_samples(recs, train_idx, mode, s.post);
  const auto val = segmenter_samples(recs, val_idx, mode, s.post);
  auto res = nn::train_segmenter<float>(train, val, s.segmenter, cfg, s.augment);
  if (history) *history = res.history;
  return std::move(res.model);
}

inline std::vector<nn::DetSample> detector_samples(const Records& recs, std::span<const std::size_t> idx) {
  std::vector<nn::DetSample> out;
  for (auto i : idx) out.push_back({recs.at(i).image, recs.at(i).gt_boxes});
  return out;
}

inline nn::DetectorModel train_detector_on(const Records& recs, std::span<const std::size_t> train_idx,
                                           std::span<const std::size_t> val_idx, const nn::TrainConfig& cfg,
                                           const ExperimentSettings& s, nn::TrainHistory* history = nullptr) {
  const auto train = detector_samples(recs, train_idx);
  const auto val = detector_samples(recs, val_idx);
  data::AugmentParams aug = s.augment;
  auto res = nn::train_detector<float>(train, val, s.detector, cfg, aug);
  if (history) *history = res.history;
  return std::move(res.model);
}

/// AP at the given IoU over the images, using every per-cell detection
/// after greedy suppression.
inline double detector_ap(const nn::DetectorModel& det, const Records& recs, std::span<const std::size_t> idx,
                          const detpost::PostprocessParams& post, double iou = 0.5) {
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<Box>> gts;
  for (auto i : idx) {
    auto all = nn::detect(det, recs.at(i).image);
    std::erase_if(all, [](const Detection& d) { return !d.box.valid(); });
    dets.push_back(detpost::nms(all, post.nms_iou));
    gts.push_back(recs.at(i).gt_boxes);
  }
  return metrics::average_precision(std::span<const std::vector<Detection>>(dets),
                                    std::span<const std::vector<Box>>(gts), iou);
}

/// Seeded 10% (at least one image) early-stopping monitor slice.
inline std::pair<Indices, Indices> monitor_split(const Indices& idx, std::uint64_t seed, double fraction = 0.1) {
  if (idx.size() < 2) throw invalid_input("need at least two training images to reserve a monitor slice");
  Indices perm = idx;
  Rng rng(derive_seed(seed, {0x3017}));
  shuffle(perm, rng);
  const auto n_mon = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * perm.size() - 1e-9)), 1,
                                             perm.size() - 1);
  Indices mon(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_mon));
  Indices train(perm.begin() + static_cast<std::ptrdiff_t>(n_mon), perm.end());
  std::sort(mon.begin(), mon.end());
  std::sort(train.begin(), train.end());
  return {train, mon};
}

// ---------------------------------------------------------------------------
// Cross-validation and search

/// Trains one predictor per fold; returns per-image predictions' mean MCC.
using FoldTrainer = std::function<SegmentFn(const Indices& train, const Indices& val, int fold)>;

struct CvResult {
  std::vector<double> fold_mcc;
  double mean_mcc = 0;
};

inline CvResult cross_validate_with(const Records& recs, const data::FoldAssignment& folds, Condition c,
                                    const FoldTrainer& trainer, const DetectFn* detect,
                                    const detpost::PostprocessParams& post) {
  CvResult out;
  for (int f = 0; f < folds.k; ++f) {
    const auto view = data::fold_view(recs, folds, f);
    if (view.train.empty() || view.val.empty()) throw invalid_input("fold " + std::to_string(f) + " is empty");
    SegmentFn seg;
    try {
      seg = trainer(view.train, view.val, f);
    } catch (const training_error& e) {
      throw training_error(std::string(e.what()) + " in fold " + std::to_string(f), e.epoch);
    }
    const auto res = evaluate(recs, view.val, c, seg, detect, post);
    out.fold_mcc.push_back(mean_metrics(res).mcc);
  }
  double s = 0;
  for (double v : out.fold_mcc) s += v;
  out.mean_mcc = s / static_cast<double>(out.fold_mcc.size());
  return out;
}

/// Mean validation MCC over the k folds for one training config; fold f's
/// model trains with seed derive_seed(cfg.seed, {f}).
inline CvResult cross_validate(const Records& recs, const data::FoldAssignment& folds, const nn::TrainConfig& cfg,
                               const ExperimentSettings& s, Condition c, const DetectFn* detect = nullptr) {
  std::vector<nn::SegmenterModel> keep;  // keeps each fold model alive while it is evaluated
  FoldTrainer trainer = [&](const Indices& tr, const Indices& va, int f) -> SegmentFn {
    nn::TrainConfig fc = cfg;
    fc.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(f)});
    auto model = std::make_shared<nn::SegmenterModel>(train_segmenter_on(recs, tr, va, input_mode(c), fc, s));
    return [model](std::span<const Image* const> b) { return model->predict(b); };
  };
  return cross_validate_with(recs, folds, c, trainer, detect, s.post);
}

struct Trial {
  int index = 0;
  nn::TrainConfig config;
  std::optional<double> score;
  std::string error;
};

struct SearchResult {
  int best_index = -1;
  nn::TrainConfig best;
  std::vector<Trial> trials;
};

using ConfigSampler = std::function<nn::TrainConfig(Rng&)>;
using TrialScorer = std::function<double(const Trial&)>;

/// Samples `budget` configs from one seeded stream (so the draws do not
/// depend on execution order), scores them, possibly in parallel, and keeps
/// the highest score; ties go to the earliest trial.
inline SearchResult random_search(int budget, const ConfigSampler& sample, std::uint64_t master_seed,
                                  const TrialScorer& score, int jobs = 1) {
  if (budget < 1) throw invalid_input("search budget must be >= 1");
  SearchResult out;
  Rng rng(derive_seed(master_seed, {0x5ea7c4}));
  for (int t = 0; t < budget; ++t) {
    Trial tr;
    tr.index = t;
    tr.config = sample(rng);
    tr.config.seed = derive_seed(master_seed, {static_cast<std::uint64_t>(t)});
    out.trials.push_back(tr);
  }
  parallel_for(out.trials.size(), jobs, [&](std::size_t i) {
    auto& tr = out.trials[i];
    try {
      const double v = score(tr);
      if (!std::isfinite(v)) throw numeric_error("non-finite score");
      tr.score = v;
    } catch (const std::exception& e) {
      tr.error = e.what();
    }
  });
  std::string causes;
  for (const auto& tr : out.trials) {
    if (!tr.score) {
      causes += "\n  trial " + std::to_string(tr.index) + ": " + tr.error;
      continue;
    }
    if (out.best_index < 0 || *tr.score > *out.trials[static_cast<std::size_t>(out.best_index)].score) {
      out.best_index = tr.index;
      out.best = tr.config;
    }
  }
  if (out.best_index < 0) throw search_error("all " + std::to_string(budget) + " trials failed:" + causes);
  return out;
}

// ---------------------------------------------------------------------------
// Final training, testing and ablation

struct ConditionReport {
  Condition condition = Condition::none;
  std::string variant;
  std::vector<std::vector<ImageResult>> per_replica;
  std::vector<metrics::PixelMetrics> replica_means;
  metrics::PixelMetrics mean{0, 0, 0};
  metrics::PixelMetrics stdev{0, 0, 0};
};

inline void aggregate(ConditionReport& r) {
  r.replica_means.clear();
  for (const auto& rep : r.per_replica) r.replica_means.push_back(mean_metrics(rep));
  const double n = static_cast<double>(r.replica_means.size());
  metrics::PixelMetrics m{0, 0, 0}, sd{0, 0, 0};
  for (const auto& v : r.replica_means) {
    m.mcc += v.mcc / n;
    m.dice += v.dice / n;
    m.iou += v.iou / n;
  }
  if (r.replica_means.size() > 1) {
    for (const auto& v : r.replica_means) {
      sd.mcc += (v.mcc - m.mcc) * (v.mcc - m.mcc);
      sd.dice += (v.dice - m.dice) * (v.dice - m.dice);
      sd.iou += (v.iou - m.iou) * (v.iou - m.iou);
    }
    sd = {std::sqrt(sd.mcc / (n - 1)), std::sqrt(sd.dice / (n - 1)), std::sqrt(sd.iou / (n - 1))};
  }
  r.mean = m;
  r.stdev = sd;
}

inline std::vector<double> replica_mcc(const ConditionReport& r) {
  std::vector<double> v;
  for (const auto& m : r.replica_means) v.push_back(m.mcc);
  return v;
}

/// Trains `replicas` segmenters on the merged training images, each with the
/// fixed seeded monitor slice for early stopping and its own training seed.
inline std::vector<nn::SegmenterModel> train_replicas(const Records& recs, const Indices& train_idx, InputMode mode,
                                                      const nn::TrainConfig& cfg, const ExperimentSettings& s,
                                                      int replicas, std::uint64_t seed) {
  if (replicas < 1) throw invalid_input("replicas must be >= 1");
  const auto [fit_idx, mon_idx] = monitor_split(train_idx, seed);
  std::vector<std::optional<nn::SegmenterModel>> slots(static_cast<std::size_t>(replicas));
  parallel_for(slots.size(), s.jobs, [&](std::size_t r) {
    nn::TrainConfig rc = cfg;
    rc.seed = derive_seed(seed, {static_cast<std::uint64_t>(r), 0x7e91});
    slots[r] = train_segmenter_on(recs, fit_idx, mon_idx, mode, rc, s);
  });
  std::vector<nn::SegmenterModel> out;
  for (auto& m : slots) out.push_back(std::move(*m));
  return out;
}

inline ConditionReport evaluate_condition(const std::vector<nn::SegmenterModel>& models, const Records& recs,
                                          const Indices& test_idx, Condition c, const DetectFn* detect,
                                          const ExperimentSettings& s) {
  ConditionReport rep;
  rep.condition = c;
  rep.variant = nn::to_string(s.segmenter.variant);
  rep.per_replica.resize(models.size());
  parallel_for(models.size(), s.jobs, [&](std::size_t r) {
    rep.per_replica[r] = evaluate(recs, test_idx, c, segment_fn(models[r]), detect, s.post);
  });
  aggregate(rep);
  return rep;
}

/// Retrain on train+val and test; for Manual/Automatic the crop-trained
/// models are shared, so callers wanting both should train once and call
/// evaluate_condition twice.
inline ConditionReport final_train_and_test(const Records& recs, const Indices& train_idx, const Indices& test_idx,
                                            Condition c, const nn::TrainConfig& cfg, const ExperimentSettings& s,
                                            int replicas, std::uint64_t seed, const DetectFn* detect = nullptr) {
  const auto models = train_replicas(recs, train_idx, input_mode(c), cfg, s, replicas, seed);
  return evaluate_condition(models, recs, test_idx, c, detect, s);
}

/// Nested removal: one seeded permutation; fraction f removes its first
/// lround(f * N) entries, so smaller removals are prefixes of larger ones.
inline Indices removed_at(const Indices& train_idx, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0 && fraction < 1)) throw invalid_input("removal fraction must be in [0,1)");
  Indices perm = train_idx;
  Rng rng(derive_seed(seed, {0xab1a}));
  shuffle(perm, rng);
  const auto n = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(perm.size())));
  Indices out(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(out.begin(), out.end());
  return out;
}

inline Indices remaining_after(const Indices& train_idx, double fraction, std::uint64_t seed) {
  const auto rem = removed_at(train_idx, fraction, seed);
  Indices out;
  for (auto i : train_idx)
    if (!std::binary_search(rem.begin(), rem.end(), i)) out.push_back(i);
  if (out.size() < 2) throw invalid_input("training set is (nearly) empty after removing " + std::to_string(fraction));
  return out;
}

struct AblationPoint {
  double fraction = 0;
  std::size_t n_train = 0;
  std::map<Condition, ConditionReport> results;
};

struct AblationSpec {
  std::vector<double> fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<Condition> conditions{Condition::none, Condition::automatic};
  int replicas = 1;
};

/// `configs` holds the fixed best training config per input mode; the
/// detector stays fixed. Removal uses `seed`; model training reuses the
/// final-training seed so fraction 0 reproduces final_train_and_test.
inline std::vector<AblationPoint> ablation(const Records& recs, const Indices& train_idx, const Indices& test_idx,
                                           const std::map<InputMode, nn::TrainConfig>& configs,
                                           const ExperimentSettings& s, const AblationSpec& spec, std::uint64_t seed,
                                           std::uint64_t train_seed, const DetectFn* detect) {
  std::vector<AblationPoint> out;
  for (double f : spec.fractions) {
    AblationPoint pt;
    pt.fraction = f;
    const auto kept = remaining_after(train_idx, f, seed);
    pt.n_train = kept.size();
    std::map<InputMode, std::vector<nn::SegmenterModel>> models;
    for (auto c : spec.conditions) {
      const auto mode = input_mode(c);
      if (!models.count(mode))
        models[mode] = train_replicas(recs, kept, mode, configs.at(mode), s, spec.replicas, train_seed);
      pt.results[c] = evaluate_condition(models[mode], recs, test_idx, c, detect, s);
    }
    out.push_back(std::move(pt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Significance

struct Comparison {
  std::string a, b;
  std::optional<stats::ShapiroWilkResult> normality_a, normality_b;
  double u = 0;
  double p = 1;
  bool exact = false;
  double alpha = 0.05;
  int m = 1;
  bool significant = false;
};

inline std::optional<stats::ShapiroWilkResult> try_shapiro(std::span<const double> v) {
  try {
    return stats::shapiro_wilk(v);
  } catch (const validation_error&) {
    return std::nullopt;
  } catch (const degenerate_sample&) {
    return std::nullopt;
  }
}

/// All pairwise Mann-Whitney comparisons with a Bonferroni threshold
/// alpha/m (m defaults to the number of pairs).
inline std::vector<Comparison> compare_conditions(const std::vector<std::pair<std::string, std::vector<double>>>& samples,
                                                  double alpha = 0.05, int m = 0) {
  if (samples.size() < 2) throw invalid_input("compare_conditions needs at least two samples");
  const int pairs = static_cast<int>(samples.size() * (samples.size() - 1) / 2);
  if (m <= 0) m = pairs;
  std::vector<Comparison> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      Comparison c;
      c.a = samples[i].first;
      c.b = samples[j].first;
      c.normality_a = try_shapiro(samples[i].second);
      c.normality_b = try_shapiro(samples[j].second);
      const auto mw = stats::mann_whitney_u(samples[i].second, samples[j].second);
      c.u = mw.u;
      c.p = mw.p;
      c.exact = mw.exact;
      c.alpha = alpha;
      c.m = m;
      c.significant = stats::bonferroni_significant(mw.p, alpha, m);
      out.push_back(c);
    }
  return out;
}

}  // namespace dseg::harness
