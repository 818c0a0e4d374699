#pragma once

#include <string>

#include <json.hpp>

#include "dseg/data/synth.hpp"
#include "dseg/harness/experiment.hpp"
#include "dseg/harness/hyper.hpp"
#include "dseg/nn/checkpoint.hpp"

// JSON round trips for every configuration struct. Readers overlay the keys
// present onto a base value, so partial config files are fine; unknown keys
// are rejected to catch typos.

namespace dseg::harness {

using nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw invalid_input(std::string(what) + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw invalid_input(std::string("unknown key '") + k + "' in " + what);
  }
}

template <typename T>
void overlay(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace detail

inline json to_json(const data::SynthConfig& c) {
  return {{"image_size", c.image_size},
          {"n_patients", c.n_patients},
          {"images_per_patient", {c.images_per_patient_range.first, c.images_per_patient_range.second}},
          {"wounds_per_image", {c.wounds_per_image_range.first, c.wounds_per_image_range.second}},
          {"coverage", {c.coverage_range.first, c.coverage_range.second}},
          {"distribution_shift", data::to_string(c.distribution_shift)},
          {"distractors", {c.distractors_range.first, c.distractors_range.second}},
          {"patient_prefix", c.patient_prefix}};
}

/// A "distribution_shift" key first resets to that preset, then the other
/// keys apply on top.
inline data::SynthConfig synth_config_from_json(const json& j, data::SynthConfig c = {}) {
  detail::reject_unknown(j, {"image_size", "n_patients", "images_per_patient", "wounds_per_image", "coverage",
                             "distribution_shift", "distractors", "patient_prefix"},
                         "synth config");
  if (j.contains("distribution_shift"))
    c = data::SynthConfig::preset(data::parse_distribution_shift(j.at("distribution_shift").get<std::string>()));
  detail::overlay(j, "image_size", c.image_size);
  detail::overlay(j, "n_patients", c.n_patients);
  detail::overlay(j, "images_per_patient", c.images_per_patient_range);
  detail::overlay(j, "wounds_per_image", c.wounds_per_image_range);
  detail::overlay(j, "coverage", c.coverage_range);
  detail::overlay(j, "distractors", c.distractors_range);
  detail::overlay(j, "patient_prefix", c.patient_prefix);
  c.validate();
  return c;
}

inline json to_json(const detpost::PostprocessParams& p) {
  return {{"confidence_threshold", p.confidence_threshold},
          {"area_factor", p.area_factor},
          {"nms_iou", p.nms_iou},
          {"output_size", p.output_size}};
}

inline detpost::PostprocessParams postprocess_from_json(const json& j, detpost::PostprocessParams p = {}) {
  detail::reject_unknown(j, {"confidence_threshold", "area_factor", "nms_iou", "output_size"}, "postprocess config");
  detail::overlay(j, "confidence_threshold", p.confidence_threshold);
  detail::overlay(j, "area_factor", p.area_factor);
  detail::overlay(j, "nms_iou", p.nms_iou);
  detail::overlay(j, "output_size", p.output_size);
  p.validate();
  return p;
}

inline json to_json(const data::AugmentParams& a) {
  return {{"p_hflip", a.p_hflip},
          {"p_vflip", a.p_vflip},
          {"brightness_delta_max", a.brightness_delta_max},
          {"scale_min", a.scale_min},
          {"scale_max", a.scale_max}};
}

inline data::AugmentParams augment_from_json(const json& j, data::AugmentParams a = {}) {
  detail::reject_unknown(j, {"p_hflip", "p_vflip", "brightness_delta_max", "scale_min", "scale_max"}, "augment config");
  detail::overlay(j, "p_hflip", a.p_hflip);
  detail::overlay(j, "p_vflip", a.p_vflip);
  detail::overlay(j, "brightness_delta_max", a.brightness_delta_max);
  detail::overlay(j, "scale_min", a.scale_min);
  detail::overlay(j, "scale_max", a.scale_max);
  a.validate();
  return a;
}

inline nn::SegmenterConfig segmenter_from_json(const json& j, nn::SegmenterConfig c = {}) {
  detail::reject_unknown(j, {"variant", "depth", "base_channels", "input_size"}, "segmenter config");
  if (j.contains("variant")) c.variant = nn::parse_segmenter_variant(j.at("variant").get<std::string>());
  detail::overlay(j, "depth", c.depth);
  detail::overlay(j, "base_channels", c.base_channels);
  detail::overlay(j, "input_size", c.input_size);
  return c;
}

inline nn::DetectorConfig detector_from_json(const json& j, nn::DetectorConfig c = {}) {
  detail::reject_unknown(j, {"stride", "base_channels", "context_layers"}, "detector config");
  detail::overlay(j, "stride", c.stride);
  detail::overlay(j, "base_channels", c.base_channels);
  detail::overlay(j, "context_layers", c.context_layers);
  return c;
}

inline json to_json(const ExperimentSettings& s) {
  return {{"segmenter", nn::to_json(s.segmenter)},
          {"detector", nn::to_json(s.detector)},
          {"postprocess", to_json(s.post)},
          {"augment", to_json(s.augment)},
          {"train", to_json(s.base_train)}};
}

/// `jobs` is a scheduling knob, not part of the experiment, so it is neither
/// written nor read here.
inline ExperimentSettings settings_from_json(const json& j, ExperimentSettings s = {}) {
  detail::reject_unknown(j, {"segmenter", "detector", "postprocess", "augment", "train"}, "experiment settings");
  if (j.contains("segmenter")) s.segmenter = segmenter_from_json(j.at("segmenter"), s.segmenter);
  if (j.contains("detector")) s.detector = detector_from_json(j.at("detector"), s.detector);
  if (j.contains("postprocess")) s.post = postprocess_from_json(j.at("postprocess"), s.post);
  if (j.contains("augment")) s.augment = augment_from_json(j.at("augment"), s.augment);
  if (j.contains("train")) s.base_train = train_config_from_json(j.at("train"), s.base_train);
  s.validate();
  return s;
}

}  // namespace dseg::harness
