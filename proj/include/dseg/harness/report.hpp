#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dseg/harness/experiment.hpp"
#include "dseg/harness/hyper.hpp"

namespace dseg::harness {

using nlohmann::json;

inline constexpr int report_format_version = 1;

inline json to_json(const metrics::PixelMetrics& m) { return {{"mcc", m.mcc}, {"dice", m.dice}, {"iou", m.iou}}; }

inline metrics::PixelMetrics pixel_metrics_from_json(const json& j) {
  return {j.at("mcc").get<double>(), j.at("dice").get<double>(), j.at("iou").get<double>()};
}

inline json to_json(const ImageResult& r) {
  return {{"image", r.image},
          {"patient", r.patient},
          {"metrics", to_json(r.metrics)},
          {"fallback", r.fallback},
          {"boxes", r.boxes}};
}

/// Per-image entries grouped by trained model; `sample_unit` names what the
/// std is taken over.
inline json to_json(const ConditionReport& r) {
  json reps = json::array();
  for (std::size_t k = 0; k < r.per_replica.size(); ++k) {
    json images = json::array();
    for (const auto& im : r.per_replica[k]) images.push_back(to_json(im));
    reps.push_back({{"replica", k}, {"images", std::move(images)}, {"mean", to_json(r.replica_means.at(k))}});
  }
  return {{"condition", to_string(r.condition)},
          {"variant", r.variant},
          {"sample_unit", "replica"},
          {"replicas", std::move(reps)},
          {"mean", to_json(r.mean)},
          {"std", to_json(r.stdev)}};
}

inline ConditionReport condition_report_from_json(const json& j) {
  ConditionReport r;
  r.condition = parse_condition(j.at("condition").get<std::string>());
  r.variant = j.at("variant").get<std::string>();
  for (const auto& rep : j.at("replicas")) {
    std::vector<ImageResult> images;
    for (const auto& im : rep.at("images"))
      images.push_back({im.at("image").get<std::string>(), im.at("patient").get<std::string>(),
                        pixel_metrics_from_json(im.at("metrics")), im.at("fallback").get<bool>(),
                        im.at("boxes").get<int>()});
    r.per_replica.push_back(std::move(images));
    r.replica_means.push_back(pixel_metrics_from_json(rep.at("mean")));
  }
  r.mean = pixel_metrics_from_json(j.at("mean"));
  r.stdev = pixel_metrics_from_json(j.at("std"));
  return r;
}

/// Largest absolute difference between the stored aggregates and those
/// recomputed from the per-image entries.
inline double aggregate_discrepancy(const json& condition) {
  const auto stored = condition_report_from_json(condition);
  ConditionReport again = stored;
  aggregate(again);
  double d = 0;
  auto upd = [&](const metrics::PixelMetrics& a, const metrics::PixelMetrics& b) {
    d = std::max({d, std::abs(a.mcc - b.mcc), std::abs(a.dice - b.dice), std::abs(a.iou - b.iou)});
  };
  for (std::size_t k = 0; k < stored.replica_means.size(); ++k) upd(stored.replica_means[k], again.replica_means[k]);
  upd(stored.mean, again.mean);
  upd(stored.stdev, again.stdev);
  return d;
}

inline json to_json(const Comparison& c) {
  auto sw = [](const std::optional<stats::ShapiroWilkResult>& r) -> json {
    if (!r) return nullptr;
    return {{"w", r->w}, {"p", r->p}};
  };
  return {{"a", c.a},         {"b", c.b},         {"shapiro_a", sw(c.normality_a)}, {"shapiro_b", sw(c.normality_b)},
          {"u", c.u},         {"p", c.p},         {"exact", c.exact},               {"alpha", c.alpha},
          {"m", c.m},         {"threshold", c.alpha / c.m}, {"significant", c.significant}};
}

inline json to_json(const Trial& t) {
  json j{{"trial", t.index}, {"config", to_json(t.config)}};
  if (t.score) j["score"] = *t.score;
  else j["error"] = t.error;
  return j;
}

inline json to_json(const SearchResult& s) {
  json trials = json::array();
  for (const auto& t : s.trials) trials.push_back(to_json(t));
  return {{"best_trial", s.best_index}, {"best_config", to_json(s.best)}, {"trials", std::move(trials)}};
}

inline json to_json(const std::vector<AblationPoint>& pts) {
  json out = json::array();
  for (const auto& p : pts) {
    json res = json::object();
    for (const auto& [c, r] : p.results) res[to_string(c)] = to_json(r);
    out.push_back({{"fraction_removed", p.fraction}, {"n_train", p.n_train}, {"results", std::move(res)}});
  }
  return out;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Skeleton shared by every report; the timestamp lives only here.
inline json new_run_report(const std::string& kind, const std::string& dataset) {
  return {{"metadata", {{"timestamp", utc_timestamp()}, {"format_version", report_format_version}}},
          {"kind", kind},
          {"dataset", dataset},
          {"sample_unit", "replica"},
          {"config", json::object()},
          {"seeds", json::object()},
          {"conditions", json::array()},
          {"significance", json::array()}};
}

inline json without_timestamp(json report) {
  if (report.contains("metadata")) report["metadata"].erase("timestamp");
  return report;
}

/// Pairwise comparisons of every condition in the report against each other,
/// per variant, on the replica-mean MCC vectors.
inline json significance_table(const json& report, double alpha = 0.05) {
  std::map<std::string, std::vector<std::pair<std::string, std::vector<double>>>> by_variant;
  for (const auto& c : report.at("conditions")) {
    std::vector<double> v;
    for (const auto& r : c.at("replicas")) v.push_back(r.at("mean").at("mcc").get<double>());
    by_variant[c.at("variant").get<std::string>()].push_back({c.at("condition").get<std::string>(), std::move(v)});
  }
  json out = json::array();
  for (const auto& [variant, samples] : by_variant) {
    if (samples.size() < 2) continue;
    for (const auto& cmp : compare_conditions(samples, alpha)) {
      auto j = to_json(cmp);
      j["variant"] = variant;
      out.push_back(std::move(j));
    }
  }
  return out;
}

/// Groups reports by dataset, concatenating their conditions; comparisons
/// are recomputed for every merged group holding two or more conditions.
inline std::vector<json> merge_by_dataset(const std::vector<json>& reports) {
  std::vector<json> out;
  for (const auto& r : reports) {
    if (!r.contains("conditions") || r.at("conditions").empty()) continue;
    const auto ds = r.value("dataset", "");
    auto it = std::find_if(out.begin(), out.end(), [&](const json& o) { return o.value("dataset", "") == ds; });
    if (it == out.end()) {
      out.push_back(r);
      continue;
    }
    for (const auto& c : r.at("conditions")) (*it)["conditions"].push_back(c);
  }
  for (auto& o : out) o["significance"] = o.at("conditions").size() > 1 ? significance_table(o) : json::array();
  return out;
}

namespace detail {

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline bool significant_vs_automatic(const json& report, const std::string& variant, const std::string& condition) {
  if (!report.contains("significance")) return false;
  for (const auto& s : report.at("significance")) {
    if (s.value("variant", "") != variant || !s.at("significant").get<bool>()) continue;
    const auto a = s.at("a").get<std::string>(), b = s.at("b").get<std::string>();
    if ((a == condition && b == "automatic") || (b == condition && a == "automatic")) return true;
  }
  return false;
}

}  // namespace detail

/// Text table: one block per report, condition rows x variant columns with
/// "MCC (std)" and "IoU (std)"; a dagger marks a significant difference from
/// the Automatic row of the same variant.
inline std::string render_table(const std::vector<json>& reports) {
  std::ostringstream os;
  for (const auto& rep : reports) {
    std::vector<std::string> variants;
    std::map<std::pair<std::string, std::string>, json> cell;
    for (const auto& c : rep.at("conditions")) {
      const auto v = c.at("variant").get<std::string>();
      if (std::find(variants.begin(), variants.end(), v) == variants.end()) variants.push_back(v);
      cell[{c.at("condition").get<std::string>(), v}] = c;
    }
    os << "Dataset: " << rep.value("dataset", "?") << "  (std over " << rep.value("sample_unit", "replica") << "s)\n";
    os << "condition  ";
    for (const auto& v : variants) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "| %-12s %-12s ", (v + " MCC").c_str(), "IoU");
      os << buf;
    }
    os << "\n";
    for (const char* cond : {"manual", "none", "automatic"}) {
      bool any = false;
      for (const auto& v : variants) any = any || cell.count({cond, v});
      if (!any) continue;
      char head[16];
      std::snprintf(head, sizeof head, "%-11s", cond);
      os << head;
      for (const auto& v : variants) {
        const auto it = cell.find({cond, v});
        if (it == cell.end()) {
          os << "| " << std::string(28, ' ');
          continue;
        }
        const auto& m = it->second.at("mean");
        const auto& s = it->second.at("std");
        const std::string mark = detail::significant_vs_automatic(rep, v, cond) ? "†" : " ";
        char buf[96];
        std::snprintf(buf, sizeof buf, "| %s%s (%s) %s%s (%s) ", mark.c_str(), detail::fixed(m.at("mcc")).c_str(),
                      detail::fixed(s.at("mcc")).c_str(), mark.c_str(), detail::fixed(m.at("iou")).c_str(),
                      detail::fixed(s.at("iou")).c_str());
        os << buf;
      }
      os << "\n";
    }
    if (rep.contains("significance") && !rep.at("significance").empty()) {
      const auto& s0 = rep.at("significance").front();
      os << "† = significant at p < " << s0.at("alpha").get<double>() << "/" << s0.at("m").get<int>()
         << " versus automatic (Mann-Whitney U)\n";
    }
    os << "\n";
  }
  return os.str();
}

/// Line plot of test MCC against the share of training images kept, one
/// series per condition.
inline std::string render_ablation_svg(const json& ablation) {
  const double W = 480, H = 320, L = 56, R = 16, T = 24, B = 48;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& p : ablation) {
    const double kept = 100.0 * (1.0 - p.at("fraction_removed").get<double>());
    for (const auto& [cond, r] : p.at("results").items())
      series[cond].push_back({kept, r.at("mean").at("mcc").get<double>()});
  }
  auto px = [&](double x) { return L + (x / 100.0) * (W - L - R); };
  auto py = [&](double y) { return T + (1.0 - std::clamp(y, 0.0, 1.0)) * (H - T - B); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 10; k += 2) {
    const double x = px(k * 10.0), y = py(k / 10.0);
    os << "<text x=\"" << x << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << k * 10 << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << detail::fixed(k / 10.0, 1) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">training images kept (%)</text>\n";
  os << "<text x=\"14\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 14 " << (T + H - B) / 2
     << ")\" text-anchor=\"middle\">test MCC</text>\n";
  const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  int k = 0;
  for (auto& [cond, pts] : series) {
    std::sort(pts.begin(), pts.end());
    const char* col = colours[k % 4];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) os << px(x) << "," << py(y) << " ";
    os << "\"/>\n";
    for (const auto& [x, y] : pts) os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
    os << "<text x=\"" << W - R - 90 << "\" y=\"" << T + 14 * (k + 1) << "\" fill=\"" << col << "\">" << cond << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dseg::harness
