#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dseg/core/error.hpp"
#include "dseg/core/random.hpp"
#include "dseg/data/manifest.hpp"

namespace dseg::data {

struct FoldAssignment {
  int k = 0;
  std::vector<std::string> test_patients;
  std::map<std::string, int> fold_of_patient;
  double objective = 0;  // stratification objective of the chosen partition

  [[nodiscard]] bool is_test(const std::string& patient) const {
    return std::find(test_patients.begin(), test_patients.end(), patient) != test_patients.end();
  }
};

inline nlohmann::json to_json(const FoldAssignment& f) {
  return {{"k", f.k}, {"test_patients", f.test_patients}, {"fold_of_patient", f.fold_of_patient}, {"objective", f.objective}};
}

inline FoldAssignment fold_assignment_from_json(const nlohmann::json& j) {
  FoldAssignment f;
  try {
    f.k = j.at("k").get<int>();
    f.test_patients = j.at("test_patients").get<std::vector<std::string>>();
    f.fold_of_patient = j.at("fold_of_patient").get<std::map<std::string, int>>();
    f.objective = j.value("objective", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw load_error(std::string("fold assignment: ") + e.what());
  }
  for (const auto& [p, fold] : f.fold_of_patient) {
    if (fold < 0 || fold >= f.k) throw load_error("fold assignment: patient " + p + " has fold out of range");
    if (f.is_test(p)) throw load_error("fold assignment: patient " + p + " is both test and training");
  }
  return f;
}

inline std::vector<std::string> sorted_patients(const std::vector<DatasetRecord>& records) {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.patient_id);
  return {s.begin(), s.end()};
}

/// Record indices on each side of a patient-level split.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::string> test_patients;
};

/// Sends ceil(test_fraction * P) patients, drawn by a seeded shuffle of the
/// sorted patient ids, to the test side.
inline SplitIndices holdout_split(const std::vector<DatasetRecord>& records, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0 && test_fraction < 1)) throw invalid_input("test_fraction must be in (0,1)");
  auto patients = sorted_patients(records);
  const auto p = static_cast<double>(patients.size());
  const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * p - 1e-9));
  if (patients.size() < 2 || n_test >= patients.size())
    throw invalid_input("holdout split needs more patients (have " + std::to_string(patients.size()) + ")");
  Rng rng(derive_seed(seed, {0x401d}));
  shuffle(patients, rng);
  SplitIndices out;
  out.test_patients.assign(patients.begin(), patients.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::sort(out.test_patients.begin(), out.test_patients.end());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const bool test = std::binary_search(out.test_patients.begin(), out.test_patients.end(), records[i].patient_id);
    (test ? out.test : out.train).push_back(i);
  }
  return out;
}

struct PatientStat {
  std::string id;
  int n_images = 0;
  double coverage_sum = 0;
};

/// Per-patient image counts and summed wound coverage, sorted by id.
inline std::vector<PatientStat> patient_stats(const std::vector<DatasetRecord>& records,
                                              const std::vector<std::size_t>& subset) {
  std::map<std::string, PatientStat> m;
  for (auto i : subset) {
    auto& s = m[records[i].patient_id];
    s.id = records[i].patient_id;
    ++s.n_images;
    s.coverage_sum += coverage(records[i].mask);
  }
  std::vector<PatientStat> out;
  for (auto& [_, s] : m) out.push_back(s);
  return out;
}

/// J = sum_f ((cov_f - mean cov)/mean cov)^2 + ((n_f - mean n)/mean n)^2 with
/// cov_f the mean image coverage of fold f and n_f its image count.
inline double stratification_objective(const std::vector<PatientStat>& stats, const std::vector<int>& fold_of, int k) {
  std::vector<double> cov(k, 0.0), n(k, 0.0);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    cov[fold_of[i]] += stats[i].coverage_sum;
    n[fold_of[i]] += stats[i].n_images;
  }
  for (int f = 0; f < k; ++f) cov[f] = n[f] > 0 ? cov[f] / n[f] : 0.0;
  double cbar = 0, nbar = 0;
  for (int f = 0; f < k; ++f) {
    cbar += cov[f] / k;
    nbar += n[f] / k;
  }
  double j = 0;
  for (int f = 0; f < k; ++f) {
    if (cbar > 0) j += std::pow((cov[f] - cbar) / cbar, 2);
    if (nbar > 0) j += std::pow((n[f] - nbar) / nbar, 2);
  }
  return j;
}

/// Balanced random partition: shuffled patients dealt round-robin.
inline std::vector<int> random_partition(std::size_t n_patients, int k, Rng& rng) {
  std::vector<std::size_t> order(n_patients);
  for (std::size_t i = 0; i < n_patients; ++i) order[i] = i;
  shuffle(order, rng);
  std::vector<int> fold_of(n_patients);
  for (std::size_t r = 0; r < n_patients; ++r) fold_of[order[r]] = static_cast<int>(r % static_cast<std::size_t>(k));
  return fold_of;
}

/// Best of `restarts` seeded balanced partitions under the stratification
/// objective; ties keep the earliest restart.
inline std::vector<int> best_partition(const std::vector<PatientStat>& stats, int k, std::uint64_t seed, int restarts,
                                       double* objective = nullptr) {
  if (k < 2) throw invalid_input("k must be >= 2");
  if (stats.size() < static_cast<std::size_t>(k))
    throw invalid_input("need at least k=" + std::to_string(k) + " patients, have " + std::to_string(stats.size()));
  if (restarts < 1) throw invalid_input("restarts must be >= 1");
  Rng rng(derive_seed(seed, {0xf01d}));
  std::vector<int> best;
  double best_j = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    auto cand = random_partition(stats.size(), k, rng);
    const double j = stratification_objective(stats, cand, k);
    if (j < best_j) {
      best_j = j;
      best = std::move(cand);
    }
  }
  if (objective) *objective = best_j;
  return best;
}

/// Holdout test patients plus a stratified k-fold partition of the rest.
inline FoldAssignment stratified_group_kfold(const std::vector<DatasetRecord>& records,
                                             const std::vector<std::size_t>& train_subset,
                                             const std::vector<std::string>& test_patients, int k, std::uint64_t seed,
                                             int restarts = 200) {
  const auto stats = patient_stats(records, train_subset);
  FoldAssignment fa;
  fa.k = k;
  fa.test_patients = test_patients;
  const auto fold_of = best_partition(stats, k, seed, restarts, &fa.objective);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (fa.is_test(stats[i].id)) throw invalid_input("patient " + stats[i].id + " is in both test and training sets");
    fa.fold_of_patient[stats[i].id] = fold_of[i];
  }
  return fa;
}

inline FoldAssignment stratified_group_kfold(const std::vector<DatasetRecord>& records, int k, std::uint64_t seed,
                                             int restarts = 200) {
  std::vector<std::size_t> all(records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return stratified_group_kfold(records, all, {}, k, seed, restarts);
}

/// Full split: holdout then k-fold over the remaining patients.
inline FoldAssignment make_split(const std::vector<DatasetRecord>& records, double test_fraction, int k,
                                 std::uint64_t seed, int restarts = 200) {
  const auto hold = holdout_split(records, test_fraction, seed);
  return stratified_group_kfold(records, hold.train, hold.test_patients, k, derive_seed(seed, {1}), restarts);
}

/// Record indices of the training folds / validation fold / test set.
struct FoldView {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

inline FoldView fold_view(const std::vector<DatasetRecord>& records, const FoldAssignment& fa, int fold) {
  FoldView v;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = fa.fold_of_patient.find(records[i].patient_id);
    if (it == fa.fold_of_patient.end()) continue;
    (it->second == fold ? v.val : v.train).push_back(i);
  }
  return v;
}

inline std::vector<std::size_t> training_indices(const std::vector<DatasetRecord>& records, const FoldAssignment& fa) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (fa.fold_of_patient.count(records[i].patient_id)) out.push_back(i);
  return out;
}

inline std::vector<std::size_t> test_indices(const std::vector<DatasetRecord>& records, const FoldAssignment& fa) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (fa.is_test(records[i].patient_id)) out.push_back(i);
  return out;
}

}  // namespace dseg::data
