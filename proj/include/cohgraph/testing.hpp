// Max-type tests over a frequency grid and FDR-controlled multiple testing.
//
// Test statistic per pair:
//   T = 1(max_l |rho_de(w_l)| > delta)
//       * max_l (n/M) w_l' Vhat^{-1}(w_l) w_l,
//   w_l = (Re, Im) of rho_de(w_l) - delta exp(i arg rho_de(w_l)),
// with the chi^2_2-max reference G_d(t) = 1 - (1 - exp(-t/2))^d and the FDR
// threshold
//   t_hat = inf{ 0 <= t <= 2 log(dq) : G_d(t) q / max(1, #{T >= t}) <= alpha }.
#pragma once

#include "cohgraph/coherence.hpp"

#include <algorithm>

namespace cohgraph {

// ---------------------------------------------------------------------------
// Frequency grid w_l = pi l N / M, 0 < w_l < pi strictly, restricted to the
// band of interest.  N = max(1, round(log(M)^{2/r})); the uniform kernel's
// effectively unbounded decay order drives N to 1.
// ---------------------------------------------------------------------------

struct FrequencyGrid {
  int M = 0;
  int N = 1;
  double band_lo = 0.0;
  double band_hi = kPi;
  std::vector<double> frequencies;

  int d() const { return static_cast<int>(frequencies.size()); }
  double spacing() const { return kPi * N / M; }
};

inline FrequencyGrid build_grid(int m_lag, const KernelSpec& kernel,
                                double band_lo, double band_hi) {
  if (m_lag < 4) throw InvalidBandwidth("build_grid: need M >= 4");
  if (!(band_lo < band_hi) || band_lo < 0.0 || band_hi > kPi + 1e-12)
    throw InvalidInput("build_grid: band must be a positive-length subset of [0, pi]");
  FrequencyGrid grid;
  grid.M = m_lag;
  grid.band_lo = band_lo;
  grid.band_hi = band_hi;
  const double r = kernel.fourier_decay_order;
  grid.N = std::max(1, static_cast<int>(std::lround(
                           std::pow(std::log(static_cast<double>(m_lag)), 2.0 / r))));
  const double step = kPi * grid.N / m_lag;
  for (int l = 1;; ++l) {
    const double omega = step * l;
    if (omega >= kPi - 1e-12) break;
    if (omega >= band_lo - 1e-12 && omega <= band_hi + 1e-12)
      grid.frequencies.push_back(omega);
  }
  if (grid.frequencies.empty())
    throw EmptyGrid("build_grid: no grid frequency falls inside the band");
  return grid;
}

// ---------------------------------------------------------------------------
// Vhat^{-1}: inverse of the asymptotic covariance of (Re, Im) of the
// de-biased estimate, built from the plug-in partial coherence.  The modulus
// is clamped at 1 - 1e-6 since the prefactor diverges as |rho| -> 1.
// ---------------------------------------------------------------------------

inline Eigen::Matrix2d vhat_inverse(cx rho, double c_k2, bool* clamped = nullptr) {
  const double mod = std::abs(rho);
  if (mod >= 1.0 - 1e-6) {
    rho *= (1.0 - 1e-6) / mod;
    if (clamped) *clamped = true;
  } else if (clamped) {
    *clamped = false;
  }
  const double re = rho.real();
  const double im = rho.imag();
  const double one_minus = 1.0 - (re * re + im * im);
  const double prefactor = 2.0 / (c_k2 * one_minus * one_minus);
  Eigen::Matrix2d v;
  v << 1.0 - im * im, re * im,
       re * im, 1.0 - re * re;
  return prefactor * v;
}

// ---------------------------------------------------------------------------
// Per-pair statistic.
// ---------------------------------------------------------------------------

struct PairStatistic {
  int u = 0, v = 0;
  double T = 0.0;
  bool exceeded = false;  // max_l |rho_de| > delta
  struct PerFrequency {
    double omega = 0.0;
    cx rho_de;
    cx rho_plugin;
    double quad_form = 0.0;
    bool clamped = false;
  };
  std::vector<PerFrequency> per_frequency;
};

inline PairStatistic pair_statistic(const std::vector<DebiasedEstimate>& estimates,
                                    double delta, int n, int m_lag, double c_k2) {
  if (estimates.empty()) throw InvalidInput("pair_statistic: empty grid");
  if (delta < 0.0 || delta >= 1.0) throw InvalidInput("pair_statistic: need 0 <= delta < 1");
  PairStatistic stat;
  stat.u = estimates.front().u;
  stat.v = estimates.front().v;
  const double scale = static_cast<double>(n) / m_lag;
  double max_quad = 0.0;
  double max_mod = 0.0;
  for (const DebiasedEstimate& est : estimates) {
    PairStatistic::PerFrequency rec;
    rec.omega = est.omega;
    rec.rho_de = est.rho_de;
    rec.rho_plugin = est.rho_plugin;
    const double mod = std::abs(est.rho_de);
    max_mod = std::max(max_mod, mod);
    // delta exp(i arg rho_de) shrinks the modulus along the estimate's own
    // phase; at rho_de == 0 the phase is defined as 0, so w = (-delta, 0).
    Eigen::Vector2d w;
    if (mod == 0.0) {
      w << -delta, 0.0;
    } else {
      const double shrunk = mod - delta;
      w << shrunk * est.rho_de.real() / mod, shrunk * est.rho_de.imag() / mod;
    }
    const Eigen::Matrix2d v_inv = vhat_inverse(est.rho_plugin, c_k2, &rec.clamped);
    rec.quad_form = scale * w.dot(v_inv * w);
    max_quad = std::max(max_quad, rec.quad_form);
    stat.per_frequency.push_back(rec);
  }
  stat.exceeded = max_mod > delta;
  stat.T = stat.exceeded ? max_quad : 0.0;
  return stat;
}

// ---------------------------------------------------------------------------
// G_d and its quantile (both numerically stable for large d / tiny tails).
// ---------------------------------------------------------------------------

inline double g_d(double t, int d) {
  if (d < 1) throw InvalidInput("g_d: d must be positive");
  if (t <= 0.0) return 1.0;
  return -std::expm1(d * std::log1p(-std::exp(-0.5 * t)));
}

// Upper alpha quantile: t with G_d(t) = alpha.
inline double single_test_quantile(int d, double alpha) {
  if (d < 1) throw InvalidInput("single_test_quantile: d must be positive");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidInput("single_test_quantile: alpha must lie in (0,1)");
  // 1 - (1-alpha)^{1/d} computed without cancellation.
  const double tail = -std::expm1(std::log1p(-alpha) / d);
  return -2.0 * std::log(tail);
}

// Level-alpha single test; ties reject.
inline bool single_test(const PairStatistic& stat, int d, double alpha) {
  return stat.T >= single_test_quantile(d, alpha);
}

// ---------------------------------------------------------------------------
// FDR threshold.  The exact infimum over [0, 2 log(dq)] is computed from the
// breakpoints (the observed statistics) plus closed-form interior crossings;
// no grid discretization of t is involved.  An empty feasible set yields
// t_hat = 2 log(dq) with rejections {T >= t_hat}; the degenerate dq = 1 case
// (upper bound 0) rejects only when the criterion held at 0.
// ---------------------------------------------------------------------------

struct FdrThreshold {
  double t_hat = 0.0;
  bool feasible = false;   // some t in [0, 2 log(dq)] satisfied the criterion
  double upper_bound = 0.0;
};

namespace detail {

// Smallest t with sum_j G_{d_j}(t) <= target, via the closed form when all
// d_j are equal and bisection otherwise.  Returns +inf when impossible.
inline double g_sum_crossing(const std::vector<int>& ds, double target) {
  if (target <= 0.0) return std::numeric_limits<double>::infinity();
  if (static_cast<double>(ds.size()) <= target) return 0.0;
  bool uniform = true;
  for (int d : ds)
    if (d != ds.front()) { uniform = false; break; }
  if (uniform) {
    const double per = target / static_cast<double>(ds.size());
    if (per >= 1.0) return 0.0;
    return single_test_quantile(ds.front(), per);
  }
  double lo = 0.0, hi = 1.0;
  auto sum_at = [&](double t) {
    double s = 0.0;
    for (int d : ds) s += g_d(t, d);
    return s;
  };
  while (sum_at(hi) > target) {
    hi *= 2.0;
    if (hi > 1e9) return std::numeric_limits<double>::infinity();
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sum_at(mid) <= target) hi = mid; else lo = mid;
  }
  return hi;
}

inline FdrThreshold fdr_threshold_impl(const std::vector<double>& stats,
                                       const std::vector<int>& ds, int d_bound,
                                       int q, double alpha) {
  if (q < 1) throw InvalidInput("fdr_threshold: need at least one statistic");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("fdr_threshold: bad alpha");
  FdrThreshold out;
  out.upper_bound = 2.0 * std::log(static_cast<double>(d_bound) * q);

  std::vector<double> sorted(stats);
  std::sort(sorted.begin(), sorted.end());
  auto count_ge = [&](double t) {
    return static_cast<int>(sorted.end() -
                            std::lower_bound(sorted.begin(), sorted.end(), t));
  };
  auto sum_g = [&](double t) {
    double s = 0.0;
    for (int d : ds) s += g_d(t, d);
    return s;
  };
  auto criterion = [&](double t) {
    return sum_g(t) / std::max(1, count_ge(t)) <= alpha;
  };

  // Breakpoints of the count function inside [0, bound].
  std::vector<double> breaks{0.0};
  for (double t : sorted)
    if (t > 0.0 && t < out.upper_bound) breaks.push_back(t);
  breaks.push_back(out.upper_bound);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  for (std::size_t i = 0; i < breaks.size(); ++i) {
    if (criterion(breaks[i])) {
      out.feasible = true;
      out.t_hat = breaks[i];
      return out;
    }
    if (i + 1 == breaks.size()) break;
    // Interior of (breaks[i], breaks[i+1]): the count is constant just past
    // breaks[i], so the criterion first holds at the G-sum crossing.
    const double probe = std::nextafter(breaks[i], breaks[i + 1]);
    const double target = alpha * std::max(1, count_ge(probe));
    const double crossing = g_sum_crossing(ds, target);
    if (crossing > breaks[i] && crossing < breaks[i + 1]) {
      out.feasible = true;
      out.t_hat = crossing;
      return out;
    }
  }
  out.t_hat = out.upper_bound;  // empty feasible set
  return out;
}

}  // namespace detail

inline FdrThreshold fdr_threshold(const std::vector<PairStatistic>& stats, int d,
                                  int q, double alpha) {
  if (static_cast<int>(stats.size()) != q)
    throw InvalidInput("fdr_threshold: q must match the statistic count");
  std::vector<double> t_values;
  t_values.reserve(stats.size());
  for (const PairStatistic& s : stats) t_values.push_back(s.T);
  return detail::fdr_threshold_impl(t_values, std::vector<int>(q, d), d, q, alpha);
}

// Multiple-bandwidth variant: per-pair grid sizes d_{u,v}; the numerator of
// the criterion becomes sum of G_{d_uv}(t) and the search bound uses the
// union grid size.
inline FdrThreshold fdr_threshold_multiband(const std::vector<PairStatistic>& stats,
                                            const std::vector<int>& d_pair,
                                            double alpha, int d_union = 0) {
  if (stats.size() != d_pair.size())
    throw InvalidInput("fdr_threshold_multiband: size mismatch");
  if (stats.empty()) throw InvalidInput("fdr_threshold_multiband: empty input");
  const int d_bound =
      d_union > 0 ? d_union : *std::max_element(d_pair.begin(), d_pair.end());
  std::vector<double> t_values;
  t_values.reserve(stats.size());
  for (const PairStatistic& s : stats) t_values.push_back(s.T);
  return detail::fdr_threshold_impl(t_values, d_pair, d_bound,
                                    static_cast<int>(stats.size()), alpha);
}

// ---------------------------------------------------------------------------
// Multiple testing over a pair set.
// ---------------------------------------------------------------------------

struct MultiTestResult {
  double alpha = 0.0;
  double delta = 0.0;
  double t_hat = 0.0;
  bool t_hat_feasible = false;
  int d = 0;
  int q = 0;
  std::vector<PairStatistic> statistics;
  std::vector<std::pair<int, int>> rejected;  // pairs with T >= t_hat
};

inline MultiTestResult multiple_test(std::vector<PairStatistic> stats, int d,
                                     double alpha, double delta) {
  if (stats.empty()) throw InvalidInput("multiple_test: empty pair set");
  for (const PairStatistic& s : stats)
    if (s.u == s.v) throw InvalidInput("multiple_test: diagonal pair in the set");
  MultiTestResult result;
  result.alpha = alpha;
  result.delta = delta;
  result.d = d;
  result.q = static_cast<int>(stats.size());
  FdrThreshold thr = fdr_threshold(stats, d, result.q, alpha);
  result.t_hat = thr.t_hat;
  result.t_hat_feasible = thr.feasible;
  const bool degenerate = thr.upper_bound <= 0.0;
  for (const PairStatistic& s : stats) {
    const bool reject = degenerate ? (thr.feasible && s.T >= thr.t_hat)
                                   : (s.T >= thr.t_hat);
    if (reject) result.rejected.emplace_back(s.u, s.v);
  }
  std::sort(result.rejected.begin(), result.rejected.end());
  result.statistics = std::move(stats);
  return result;
}

}  // namespace cohgraph
