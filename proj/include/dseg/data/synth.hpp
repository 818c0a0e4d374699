#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "dseg/core/error.hpp"
#include "dseg/core/random.hpp"
#include "dseg/core/raster.hpp"
#include "dseg/data/manifest.hpp"

namespace dseg::data {

enum class DistributionShift { in_distribution, ood_small_wounds, ood_cluttered_background };

inline std::string to_string(DistributionShift s) {
  switch (s) {
    case DistributionShift::in_distribution: return "in_distribution";
    case DistributionShift::ood_small_wounds: return "ood_small_wounds";
    case DistributionShift::ood_cluttered_background: return "ood_cluttered_background";
  }
  return "?";
}

inline DistributionShift parse_distribution_shift(const std::string& s) {
  if (s == "in_distribution") return DistributionShift::in_distribution;
  if (s == "ood_small_wounds") return DistributionShift::ood_small_wounds;
  if (s == "ood_cluttered_background") return DistributionShift::ood_cluttered_background;
  throw invalid_input("unknown distribution shift '" + s + "'");
}

struct SynthConfig {
  int image_size = 64;
  int n_patients = 30;
  std::pair<int, int> images_per_patient_range{8, 12};
  std::pair<int, int> wounds_per_image_range{1, 2};
  std::pair<double, double> coverage_range{0.015, 0.10};
  DistributionShift distribution_shift = DistributionShift::in_distribution;
  std::pair<int, int> distractors_range{1, 3};
  std::string patient_prefix = "P";

  void validate() const {
    if (image_size < 32) throw invalid_input("image_size must be >= 32");
    if (n_patients < 1) throw invalid_input("n_patients must be >= 1");
    auto ordered = [](std::pair<int, int> r, int lo) { return r.first >= lo && r.first <= r.second; };
    if (!ordered(images_per_patient_range, 1)) throw invalid_input("images_per_patient_range must be 1 <= lo <= hi");
    if (!ordered(wounds_per_image_range, 1)) throw invalid_input("wounds_per_image_range must be 1 <= lo <= hi");
    if (!ordered(distractors_range, 0)) throw invalid_input("distractors_range must be 0 <= lo <= hi");
    if (!(coverage_range.first > 0 && coverage_range.first <= coverage_range.second && coverage_range.second < 1))
      throw invalid_input("coverage_range must satisfy 0 < lo <= hi < 1");
  }

  static SynthConfig preset(DistributionShift s) {
    SynthConfig c;
    c.distribution_shift = s;
    if (s == DistributionShift::ood_small_wounds) {
      c.image_size = 128;
      c.coverage_range = {0.004, 0.02};
    } else if (s == DistributionShift::ood_cluttered_background) {
      c.distractors_range = {4, 7};
    }
    return c;
  }
};

namespace synth_detail {

using Rgb = std::array<float, 3>;

/// Smooth noise in [-1,1]: random lattice values every `cell` pixels,
/// bilinearly interpolated.
inline std::vector<float> value_noise(int h, int w, double cell, Rng& rng) {
  const int gh = static_cast<int>(std::ceil(h / cell)) + 2, gw = static_cast<int>(std::ceil(w / cell)) + 2;
  std::vector<float> lattice(static_cast<std::size_t>(gh) * gw);
  for (auto& v : lattice) v = static_cast<float>(uniform(rng, -1.0, 1.0));
  std::vector<float> out(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    const double fy = (r + 0.5) / cell;
    const int y0 = static_cast<int>(fy);
    const double ty = fy - y0;
    for (int c = 0; c < w; ++c) {
      const double fx = (c + 0.5) / cell;
      const int x0 = static_cast<int>(fx);
      const double tx = fx - x0;
      auto L = [&](int y, int x) { return lattice[static_cast<std::size_t>(y) * gw + x]; };
      const double top = L(y0, x0) * (1 - tx) + L(y0, x0 + 1) * tx;
      const double bot = L(y0 + 1, x0) * (1 - tx) + L(y0 + 1, x0 + 1) * tx;
      out[static_cast<std::size_t>(r) * w + c] = static_cast<float>(top * (1 - ty) + bot * ty);
    }
  }
  return out;
}

struct Ellipse {
  double cx, cy, a, b, theta;

  /// Normalised radius of the pixel centre (r,c); <= 1 means inside.
  [[nodiscard]] double rho(int r, int c) const {
    const double dx = c + 0.5 - cx, dy = r + 0.5 - cy;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double u = dx * ct + dy * st, v = -dx * st + dy * ct;
    return std::sqrt(u * u / (a * a) + v * v / (b * b));
  }
  [[nodiscard]] Ellipse grown(double by) const { return {cx, cy, a + by, b + by, theta}; }
};

inline Mask rasterize_ellipse(const Ellipse& e, int size) {
  Mask m(size, size, 0);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) m.at(r, c) = e.rho(r, c) <= 1.0 ? 1 : 0;
  return m;
}

struct PatientTraits {
  Rgb skin;
  double limb_aspect;
  double limb_theta;
  Rgb wound;
};

inline PatientTraits draw_patient(Rng& rng) {
  PatientTraits t;
  const double tone = uniform(rng, 0.45, 1.0);
  t.skin = {static_cast<float>(0.92 * tone + 0.04), static_cast<float>(0.70 * tone + 0.04),
            static_cast<float>(0.56 * tone + 0.05)};
  t.limb_aspect = uniform(rng, 0.55, 0.95);
  t.limb_theta = uniform(rng, 0.0, 3.141592653589793);
  t.wound = {static_cast<float>(uniform(rng, 0.55, 0.78)), static_cast<float>(uniform(rng, 0.10, 0.22)),
             static_cast<float>(uniform(rng, 0.10, 0.20))};
  return t;
}

inline void blend(Image& img, int r, int c, const Rgb& col, float alpha) {
  for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = img.at(r, c, ch) * (1 - alpha) + col[ch] * alpha;
}

inline Rgb jitter(const Rgb& base, float amount, Rng& rng) {
  Rgb out;
  for (int ch = 0; ch < 3; ++ch) out[ch] = std::clamp(base[ch] + static_cast<float>(uniform(rng, -amount, amount)), 0.0f, 1.0f);
  return out;
}

/// Wound ellipses with total pixel area inside the coverage band, each
/// (grown by a margin) strictly inside the skin and apart from the others.
inline std::vector<Ellipse> place_wounds(const Mask& skin, const SynthConfig& cfg, int n_wounds, Rng& rng, Mask& mask) {
  const int s = cfg.image_size;
  const double px = 1.0 / (double(s) * s);
  const double lo = cfg.coverage_range.first - px, hi = cfg.coverage_range.second + px;
  for (int attempt = 0; attempt < 400; ++attempt) {
    const double target = uniform(rng, cfg.coverage_range.first, cfg.coverage_range.second) * s * s;
    std::vector<double> share(n_wounds);
    double tot = 0;
    for (auto& v : share) tot += (v = uniform(rng, 0.5, 1.0));
    std::vector<Ellipse> placed;
    Mask m(s, s, 0);
    bool ok = true;
    for (int k = 0; k < n_wounds && ok; ++k) {
      const double area = target * share[k] / tot;
      const double q = uniform(rng, 0.55, 1.0);
      const double a = std::sqrt(area / (3.141592653589793 * q)), b = q * a;
      bool fitted = false;
      for (int tries = 0; tries < 60 && !fitted; ++tries) {
        Ellipse e{uniform(rng, a, s - a), uniform(rng, a, s - a), a, b, uniform(rng, 0.0, 3.141592653589793)};
        const Ellipse guard = e.grown(2.0);
        bool inside = true;
        for (int r = 0; r < s && inside; ++r)
          for (int c = 0; c < s && inside; ++c)
            if (guard.rho(r, c) <= 1.0 && (!skin.at(r, c) || m.at(r, c))) inside = false;
        if (!inside) continue;
        const Mask em = rasterize_ellipse(e, s);
        if (foreground_count(em) == 0) continue;
        bool far = true;
        for (const auto& o : placed) {
          const Ellipse og = o.grown(2.0);
          for (int r = 0; r < s && far; ++r)
            for (int c = 0; c < s && far; ++c)
              if (em.at(r, c) && og.rho(r, c) <= 1.0) far = false;
        }
        if (!far) continue;
        m = mask_union(m, em);
        placed.push_back(e);
        fitted = true;
      }
      ok = fitted;
    }
    if (!ok) continue;
    const double cov = coverage(m);
    if (cov < lo || cov > hi) continue;
    mask = std::move(m);
    return placed;
  }
  throw generation_error("could not place wounds with coverage in [" + std::to_string(cfg.coverage_range.first) + ", " +
                         std::to_string(cfg.coverage_range.second) + "] at image_size " + std::to_string(s));
}

inline void render_image(const SynthConfig& cfg, const PatientTraits& pt, Rng& rng, Image& img, Mask& mask) {
  const int s = cfg.image_size;
  img = Image(s, s, 0.0f);

  // background: sheet-like cool colour with low-frequency folds and grain
  const Rgb bg = {static_cast<float>(uniform(rng, 0.25, 0.7)), static_cast<float>(uniform(rng, 0.3, 0.75)),
                  static_cast<float>(uniform(rng, 0.35, 0.85))};
  const auto folds = value_noise(s, s, 12.0, rng);
  const auto grain = value_noise(s, s, 1.5, rng);
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * s + c;
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = bg[ch] + 0.10f * folds[i] + 0.03f * grain[i];
    }

  // skin region: the limb ellipse, always containing the image centre area
  const double half = s / 2.0;
  const double a = uniform(rng, 0.38, 0.50) * s;
  const Ellipse limb{half + uniform(rng, -0.08, 0.08) * s, half + uniform(rng, -0.08, 0.08) * s, a,
                     a * pt.limb_aspect * uniform(rng, 0.9, 1.1), pt.limb_theta + uniform(rng, -0.4, 0.4)};
  Mask skin(s, s, 0);
  const auto shade = value_noise(s, s, 10.0, rng);
  const auto pores = value_noise(s, s, 2.0, rng);
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) {
      const double rho = limb.rho(r, c);
      if (rho > 1.0) continue;
      skin.at(r, c) = 1;
      const std::size_t i = static_cast<std::size_t>(r) * s + c;
      const float light = static_cast<float>(1.0 - 0.25 * rho * rho) + 0.06f * shade[i] + 0.03f * pores[i];
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = pt.skin[ch] * light;
    }

  // distractors: reddish-brown blobs on the background (dressings, dried stains)
  constexpr Rgb stain = {0.36f, 0.17f, 0.12f};
  const int n_distract = uniform_int(rng, cfg.distractors_range.first, cfg.distractors_range.second);
  for (int k = 0; k < n_distract; ++k) {
    const double area = uniform(rng, cfg.coverage_range.first, cfg.coverage_range.second) * s * s * uniform(rng, 0.5, 1.2);
    const double q = uniform(rng, 0.5, 1.0);
    const double da = std::max(1.5, std::sqrt(area / (3.141592653589793 * q)));
    const float t = static_cast<float>(uniform(rng, 0.65, 0.9));
    Rgb col = jitter(pt.wound, 0.08f, rng);
    for (int ch = 0; ch < 3; ++ch) col[ch] += t * (stain[ch] - col[ch]);
    for (int tries = 0; tries < 30; ++tries) {
      const Ellipse e{uniform(rng, 0, s), uniform(rng, 0, s), da, da * q, uniform(rng, 0.0, 3.141592653589793)};
      bool off_skin = true;
      for (int r = 0; r < s && off_skin; ++r)
        for (int c = 0; c < s && off_skin; ++c)
          if (e.rho(r, c) <= 1.0 && skin.at(r, c)) off_skin = false;
      if (!off_skin) continue;
      for (int r = 0; r < s; ++r)
        for (int c = 0; c < s; ++c)
          if (e.rho(r, c) <= 1.0) blend(img, r, c, col, 0.9f);
      break;
    }
  }

  // wounds: periwound redness outside the mask, textured bed inside
  const int n_wounds = uniform_int(rng, cfg.wounds_per_image_range.first, cfg.wounds_per_image_range.second);
  const auto wounds = place_wounds(skin, cfg, n_wounds, rng, mask);
  const auto granulation = value_noise(s, s, 1.8, rng);
  const auto slough = value_noise(s, s, 4.0, rng);
  const Rgb rim = {std::min(1.0f, pt.skin[0] * 0.9f + 0.12f), pt.skin[1] * 0.72f, pt.skin[2] * 0.72f};
  for (const auto& e : wounds) {
    const Rgb bed = jitter(pt.wound, 0.05f, rng);
    const double rim_width = uniform(rng, 1.0, 2.5);
    const Ellipse outer = e.grown(rim_width);
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * s + c;
        if (mask.at(r, c)) {
          Rgb col = bed;
          const float g = 0.08f * granulation[i];
          for (auto& v : col) v += g;
          if (slough[i] > 0.55f) col = {0.78f, 0.70f, 0.36f};
          blend(img, r, c, col, 1.0f);
        } else if (outer.rho(r, c) <= 1.0 && skin.at(r, c)) {
          blend(img, r, c, rim, 0.5f);
        }
      }
  }

  const auto noise = value_noise(s, s, 1.0, rng);
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        float& v = img.at(r, c, ch);
        v = std::clamp(v + 0.02f * noise[static_cast<std::size_t>(r) * s + c], 0.0f, 1.0f);
        v = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;  // exactly representable on disk
      }
}

}  // namespace synth_detail

/// In-memory synthetic dataset; refs are set as images/<id>.png and
/// masks/<id>.png so write_dataset can persist it.
inline std::vector<DatasetRecord> generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const double min_px = cfg.coverage_range.second * cfg.image_size * cfg.image_size;
  if (min_px < 4.0 * cfg.wounds_per_image_range.first)
    throw generation_error("coverage range too small for image_size " + std::to_string(cfg.image_size));
  if (cfg.coverage_range.first > 0.35) throw generation_error("coverage range exceeds what fits inside the skin region");
  std::vector<DatasetRecord> out;
  for (int p = 0; p < cfg.n_patients; ++p) {
    Rng prng(derive_seed(seed, {static_cast<std::uint64_t>(p)}));
    const auto traits = synth_detail::draw_patient(prng);
    const int n_images = uniform_int(prng, cfg.images_per_patient_range.first, cfg.images_per_patient_range.second);
    char pid[32];
    std::snprintf(pid, sizeof pid, "%s%03d", cfg.patient_prefix.c_str(), p);
    for (int i = 0; i < n_images; ++i) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(i) + 1}));
      DatasetRecord r;
      r.patient_id = pid;
      char name[64];
      std::snprintf(name, sizeof name, "%s_%02d.png", pid, i);
      r.image_ref = std::string("images/") + name;
      r.mask_ref = std::string("masks/") + name;
      synth_detail::render_image(cfg, traits, rng, r.image, r.mask);
      r.gt_boxes = derive_boxes(r.mask);
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace dseg::data
