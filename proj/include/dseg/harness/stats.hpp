#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "dseg/core/error.hpp"

namespace dseg::stats {

/// Upper tail of the standard normal.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// Inverse standard normal CDF (Wichura's AS 241, PPND16; ~1e-16 relative).
inline double normal_quantile(double p) {
  if (!(p > 0 && p < 1)) throw invalid_input("normal_quantile: p must be in (0,1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0 ? p : 1 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0 ? -val : val;
}

struct ShapiroWilkResult {
  double w = 0;
  double p = 0;
};

namespace detail {

inline double poly(std::span<const double> c, double x) {
  double r = 0;
  for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
  return r;
}

}  // namespace detail

/// Shapiro-Wilk W with Royston's approximation for the coefficients and the
/// p-value (AS R94, complete samples), in double precision.
inline ShapiroWilkResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3 || n > 5000) throw invalid_input("shapiro_wilk needs 3 <= n <= 5000, got " + std::to_string(n));
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 1e-19 * std::max(1.0, std::abs(x.front())))) throw degenerate_sample("shapiro_wilk: sample has zero range");

  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};

  const std::size_t n2 = n / 2;
  const double an = static_cast<double>(n);
  std::vector<double> a(n2);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    const double an25 = an + 0.25;
    double summ2 = 0;
    for (std::size_t i = 0; i < n2; ++i) {
      a[i] = normal_quantile((static_cast<double>(i) + 1 - 0.375) / an25);
      summ2 += a[i] * a[i];
    }
    summ2 *= 2;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = detail::poly(c1, rsn) - a[0] / ssumm2;
    std::size_t i1;
    double fac;
    if (n > 5) {
      i1 = 2;
      const double a2 = -a[1] / ssumm2 + detail::poly(c2, rsn);
      fac = std::sqrt((summ2 - 2 * a[0] * a[0] - 2 * a[1] * a[1]) / (1 - 2 * a1 * a1 - 2 * a2 * a2));
      a[1] = a2;
    } else {
      i1 = 1;
      fac = std::sqrt((summ2 - 2 * a[0] * a[0]) / (1 - 2 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = i1; i < n2; ++i) a[i] = -a[i] / fac;
  }

  // W as the squared correlation between the scaled data and the
  // antisymmetric coefficient vector; 1 - W is formed directly.
  std::vector<double> coef(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = n - 1 - i;
    if (i < j) coef[i] = -a[i];
    else if (i > j) coef[i] = a[j];
    else coef[i] = 0;
  }
  double sa = 0, sx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += coef[i];
    sx += x[i] / range;
  }
  sa /= an;
  sx /= an;
  double ssa = 0, ssx = 0, sax = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double asa = coef[i] - sa, xsx = x[i] / range - sx;
    ssa += asa * asa;
    ssx += xsx * xsx;
    sax += asa * xsx;
  }
  const double ssassx = std::sqrt(ssa * ssx);
  const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
  const double w = 1 - w1;

  if (n == 3) {
    const double p = 1.909859 * (std::asin(std::sqrt(w)) - 1.047198);
    return {w, std::clamp(p, 0.0, 1.0)};
  }
  double y = std::log(w1);
  const double lxx = std::log(an);
  double m, s;
  if (n <= 11) {
    const double gamma = detail::poly(g, an);
    if (y >= gamma) return {w, 1e-19};
    y = -std::log(gamma - y);
    m = detail::poly(c3, an);
    s = std::exp(detail::poly(c4, an));
  } else {
    m = detail::poly(c5, lxx);
    s = std::exp(detail::poly(c6, lxx));
  }
  return {w, normal_sf((y - m) / s)};
}

struct MannWhitneyResult {
  double u = 0;  // statistic of the first sample
  double p = 1;  // two-sided
  bool exact = false;
};

namespace detail {

/// Number of arrangements giving each U value for sample sizes m, n (no ties).
inline std::vector<double> u_counts(int m, int n) {
  // f[i][j][u]: arrangements of i and j items with statistic u, built by
  // whether the largest element comes from the first sample.
  std::vector<std::vector<std::vector<double>>> f(m + 1, std::vector<std::vector<double>>(n + 1));
  for (int i = 0; i <= m; ++i)
    for (int j = 0; j <= n; ++j) {
      auto& cur = f[i][j];
      cur.assign(static_cast<std::size_t>(i) * j + 1, 0.0);
      if (i == 0 || j == 0) {
        cur[0] = 1;
        continue;
      }
      const auto& a = f[i - 1][j];  // largest from sample 1: beats all j
      const auto& b = f[i][j - 1];
      for (std::size_t u = 0; u < a.size(); ++u) cur[u + j] += a[u];
      for (std::size_t u = 0; u < b.size(); ++u) cur[u] += b[u];
    }
  return f[m][n];
}

}  // namespace detail

/// Two-sided Mann-Whitney U with midranks. Exact null distribution when the
/// combined size is at most 12 and there are no ties; otherwise the normal
/// approximation with tie and continuity corrections.
inline MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw invalid_input("mann_whitney_u needs two non-empty samples");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<std::pair<double, int>> all;
  for (double v : a) all.push_back({v, 0});
  for (double v : b) all.push_back({v, 1});
  for (const auto& [v, _] : all)
    if (!std::isfinite(v)) throw invalid_input("mann_whitney_u: non-finite value");
  std::stable_sort(all.begin(), all.end(), [](auto& x, auto& y) { return x.first < y.first; });
  double ra = 0, tie_term = 0;
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double rank = 0.5 * (static_cast<double>(i) + 1 + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 0) ra += rank;
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    i = j;
  }
  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb), dn = static_cast<double>(n);
  MannWhitneyResult r;
  r.u = ra - dna * (dna + 1) / 2;
  if (n <= 12 && !ties) {
    const auto counts = detail::u_counts(static_cast<int>(na), static_cast<int>(nb));
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto u = static_cast<std::size_t>(std::lround(r.u));
    double cdf = 0, sf = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (k <= u) cdf += counts[k];
      if (k >= u) sf += counts[k];
    }
    r.p = std::min(1.0, 2 * std::min(cdf, sf) / total);
    r.exact = true;
    return r;
  }
  const double mu = dna * dnb / 2;
  const double var = dna * dnb / 12 * ((dn + 1) - tie_term / (dn * (dn - 1)));
  if (var <= 0) {
    r.p = 1;
    return r;
  }
  const double z = (std::abs(r.u - mu) - 0.5) / std::sqrt(var);
  r.p = std::clamp(2 * normal_sf(z), 0.0, 1.0);
  return r;
}

/// Bonferroni: significant iff p < alpha / m.
inline bool bonferroni_significant(double p, double alpha, int m) {
  if (m < 1) throw invalid_input("comparison count must be >= 1");
  return p < alpha / m;
}

}  // namespace dseg::stats
