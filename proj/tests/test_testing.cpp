#include "catch_amalgamated.hpp"
#include "support/oracles.hpp"

#include <random>

using namespace cohgraph;
using Catch::Approx;

TEST_CASE("build_grid enumerations") {
  FrequencyGrid uniform16 = build_grid(16, KernelSpec::uniform(), 0.0, kPi);
  REQUIRE(uniform16.N == 1);
  REQUIRE(uniform16.d() == 15);
  for (int l = 1; l <= 15; ++l)
    REQUIRE(uniform16.frequencies[l - 1] == Approx(kPi * l / 16.0).epsilon(1e-14));

  FrequencyGrid bartlett20 = build_grid(20, KernelSpec::bartlett(), 0.0, kPi);
  REQUIRE(bartlett20.N == 3);  // round(log 20)
  REQUIRE(bartlett20.d() == 6);
  REQUIRE(bartlett20.frequencies.back() == Approx(3.0 * kPi * 6 / 20.0).epsilon(1e-14));

  FrequencyGrid band = build_grid(16, KernelSpec::uniform(), kPi / 2.0, kPi);
  REQUIRE(band.d() == 8);  // l in {8..15}
  REQUIRE(band.frequencies.front() == Approx(kPi / 2.0).epsilon(1e-14));

  REQUIRE_THROWS_AS(build_grid(3, KernelSpec::uniform(), 0.0, kPi), InvalidBandwidth);
  REQUIRE_THROWS_AS(build_grid(16, KernelSpec::uniform(), 0.01, 0.02), EmptyGrid);
  REQUIRE(build_grid(16, KernelSpec::uniform(), 0.0, kPi).spacing() ==
          Approx(kPi / 16.0).epsilon(1e-14));
}

TEST_CASE("vhat_inverse closed forms") {
  const double c_bartlett = 2.0 / 3.0;
  Eigen::Matrix2d zero_case = vhat_inverse(cx(0.0, 0.0), c_bartlett);
  REQUIRE(zero_case(0, 0) == Approx(3.0).epsilon(1e-14));
  REQUIRE(zero_case(1, 1) == Approx(3.0).epsilon(1e-14));
  REQUIRE(zero_case(0, 1) == 0.0);

  Eigen::Matrix2d half = vhat_inverse(cx(0.5, 0.0), c_bartlett);
  const double prefactor = 2.0 / (c_bartlett * 0.5625);
  REQUIRE(half(0, 0) == Approx(prefactor * 1.0).epsilon(1e-14));
  REQUIRE(half(1, 1) == Approx(prefactor * 0.75).epsilon(1e-14));
  REQUIRE(half(0, 1) == 0.0);

  // det Vhat^{-1} = prefactor^2 (1 - |rho|^2), checked at random moduli.
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(-0.6, 0.6);
  for (int i = 0; i < 5; ++i) {
    cx rho(unif(rng), unif(rng));
    Eigen::Matrix2d v = vhat_inverse(rho, c_bartlett);
    const double pre = 2.0 / (c_bartlett * std::pow(1.0 - std::norm(rho), 2.0));
    REQUIRE(v.determinant() ==
            Approx(pre * pre * (1.0 - std::norm(rho))).epsilon(1e-10));
  }

  bool clamped = false;
  vhat_inverse(cx(0.9999999, 0.0), 2.0 / 3.0, &clamped);
  REQUIRE(clamped);
}

TEST_CASE("vhat_inverse inverts the asymptotic covariance") {
  cx rho(0.3, -0.2);
  Eigen::Matrix2d v = oracles::asymptotic_v_matrix(rho, 2.0 / 3.0);
  Eigen::Matrix2d vinv = vhat_inverse(rho, 2.0 / 3.0);
  REQUIRE((v * vinv - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

namespace {

DebiasedEstimate make_estimate(int u, int v, double omega, cx rho_de, cx rho_plugin) {
  DebiasedEstimate e;
  e.u = u;
  e.v = v;
  e.omega = omega;
  e.rho_de = rho_de;
  e.rho_plugin = rho_plugin;
  return e;
}

}  // namespace

TEST_CASE("pair_statistic hand evaluation") {
  // Single frequency, delta = 0, rho_de = 0.1, plugin 0: V^{-1} = 3 I,
  // T = (n/M) * 3 * 0.01 with n/M = 100.
  std::vector<DebiasedEstimate> est{make_estimate(0, 1, 0.5, cx(0.1, 0.0), cx(0.0, 0.0))};
  PairStatistic stat = pair_statistic(est, 0.0, 400, 4, 2.0 / 3.0);
  REQUIRE(stat.T == Approx(3.0).epsilon(1e-12));
  REQUIRE(stat.exceeded);

  // Indicator gate: all moduli below delta give T = 0.
  std::vector<DebiasedEstimate> small{
      make_estimate(0, 1, 0.5, cx(0.1, 0.05), cx(0.0, 0.0)),
      make_estimate(0, 1, 1.0, cx(-0.15, 0.0), cx(0.0, 0.0))};
  PairStatistic gated = pair_statistic(small, 0.2, 400, 4, 2.0 / 3.0);
  REQUIRE(gated.T == 0.0);
  REQUIRE_FALSE(gated.exceeded);
  REQUIRE(gated.per_frequency.size() == 2);

  // T equals the maximum recorded quadratic form when the gate is open.
  std::vector<DebiasedEstimate> multi{
      make_estimate(0, 1, 0.5, cx(0.3, 0.0), cx(0.1, 0.0)),
      make_estimate(0, 1, 1.0, cx(0.0, 0.4), cx(0.0, 0.2))};
  PairStatistic ms = pair_statistic(multi, 0.0, 512, 8, 2.0 / 3.0);
  REQUIRE(ms.T == Approx(std::max(ms.per_frequency[0].quad_form,
                                  ms.per_frequency[1].quad_form)).epsilon(1e-15));
}

TEST_CASE("pair_statistic is invariant under a global phase rotation") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unif(0.0, 2.0 * kPi);
  std::vector<DebiasedEstimate> base{
      make_estimate(0, 1, 0.5, cx(0.25, 0.1), cx(0.2, 0.05)),
      make_estimate(0, 1, 1.0, cx(-0.1, 0.3), cx(-0.05, 0.25))};
  PairStatistic ref = pair_statistic(base, 0.15, 1000, 10, 2.0 / 3.0);
  for (int trial = 0; trial < 8; ++trial) {
    const cx phase = std::exp(cx(0.0, unif(rng)));
    std::vector<DebiasedEstimate> rotated = base;
    for (DebiasedEstimate& e : rotated) {
      e.rho_de *= phase;
      e.rho_plugin *= phase;
    }
    PairStatistic stat = pair_statistic(rotated, 0.15, 1000, 10, 2.0 / 3.0);
    REQUIRE(stat.T == Approx(ref.T).epsilon(1e-9));
  }
}

TEST_CASE("pair_statistic handles an exactly-zero estimate") {
  std::vector<DebiasedEstimate> est{make_estimate(0, 1, 0.5, cx(0.0, 0.0), cx(0.0, 0.0))};
  PairStatistic stat = pair_statistic(est, 0.2, 400, 4, 2.0 / 3.0);
  REQUIRE_FALSE(stat.exceeded);
  REQUIRE(stat.T == 0.0);
  // The recorded quadratic form uses w = (-delta, 0).
  REQUIRE(stat.per_frequency[0].quad_form ==
          Approx(100.0 * 3.0 * 0.04).epsilon(1e-12));
}

TEST_CASE("single_test_quantile closed form and inverse identity") {
  REQUIRE(single_test_quantile(1, 0.05) == Approx(5.99146).margin(1e-4));
  REQUIRE(single_test_quantile(10, 0.05) == Approx(10.5513).margin(1e-3));
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick_d(1, 500);
  std::uniform_real_distribution<double> pick_a(0.001, 0.999);
  for (int i = 0; i < 50; ++i) {
    const int d = pick_d(rng);
    const double alpha = pick_a(rng);
    REQUIRE(std::abs(g_d(single_test_quantile(d, alpha), d) - alpha) <= 1e-12);
  }
  REQUIRE_THROWS_AS(single_test_quantile(3, 0.0), InvalidInput);
  REQUIRE_THROWS_AS(single_test_quantile(3, 1.0), InvalidInput);
}

TEST_CASE("single_test decision rule") {
  std::vector<DebiasedEstimate> est{make_estimate(0, 1, 0.5, cx(0.0, 0.0), cx(0.0, 0.0))};
  PairStatistic zero = pair_statistic(est, 0.0, 400, 4, 2.0 / 3.0);
  REQUIRE_FALSE(single_test(zero, 5, 0.5));

  PairStatistic six = zero;
  six.T = 6.0;
  REQUIRE(single_test(six, 1, 0.05));  // 6.0 >= 5.99146, ties reject
  PairStatistic boundary = zero;
  boundary.T = single_test_quantile(4, 0.1);
  REQUIRE(single_test(boundary, 4, 0.1));
}

namespace {

PairStatistic stat_with_t(int u, int v, double t) {
  PairStatistic s;
  s.u = u;
  s.v = v;
  s.T = t;
  s.exceeded = t > 0.0;
  return s;
}

}  // namespace

TEST_CASE("fdr_threshold conventions") {
  // Degenerate dq = 1: the upper bound is 0 and the criterion fails at 0,
  // so nothing is rejected no matter how large the statistic.
  MultiTestResult degenerate =
      multiple_test({stat_with_t(0, 1, 10.0)}, 1, 0.1, 0.0);
  REQUIRE(degenerate.t_hat == 0.0);
  REQUIRE_FALSE(degenerate.t_hat_feasible);
  REQUIRE(degenerate.rejected.empty());

  // Same statistic with d = 2: infeasible inside [0, 2 log 2], so t_hat
  // falls back to the bound and the extreme statistic is rejected.
  MultiTestResult fallback = multiple_test({stat_with_t(0, 1, 10.0)}, 2, 0.1, 0.0);
  REQUIRE(fallback.t_hat == Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  REQUIRE_FALSE(fallback.t_hat_feasible);
  REQUIRE(fallback.rejected.size() == 1);

  // All-zero statistics keep the threshold at the bound with no rejections
  // (dq = 1 bookkeeping case from the design decisions).
  MultiTestResult zeros = multiple_test({stat_with_t(0, 1, 0.0)}, 1, 0.05, 0.0);
  REQUIRE(zeros.t_hat == 0.0);
  REQUIRE(zeros.rejected.empty());
}

TEST_CASE("fdr_threshold interior crossing is exact") {
  // q = 40 statistics, 10 of them huge: the criterion first holds where
  // G_d(t) q / 10 = alpha, strictly inside the gap between the small and
  // large statistics; verify against the closed-form crossing.
  std::vector<PairStatistic> stats;
  for (int i = 0; i < 30; ++i) stats.push_back(stat_with_t(0, i + 1, 0.01));
  for (int i = 0; i < 10; ++i) stats.push_back(stat_with_t(1, i + 31, 50.0));
  const int d = 3, q = 40;
  const double alpha = 0.2;
  FdrThreshold thr = fdr_threshold(stats, d, q, alpha);
  const double expected = single_test_quantile(d, alpha * 10.0 / q);
  REQUIRE(thr.feasible);
  REQUIRE(thr.t_hat == Approx(expected).epsilon(1e-12));
  REQUIRE(thr.t_hat > 0.01);
  REQUIRE(thr.t_hat < 50.0);
}

TEST_CASE("fdr threshold and rejections are monotone in alpha") {
  std::mt19937_64 rng(31);
  std::exponential_distribution<double> expo(0.35);
  std::vector<PairStatistic> stats;
  int id = 0;
  for (int i = 0; i < 25; ++i) stats.push_back(stat_with_t(0, ++id, 2.0 * expo(rng)));
  const int d = 4;
  double prev_t = std::numeric_limits<double>::infinity();
  std::size_t prev_rejections = 0;
  for (double alpha : {0.02, 0.05, 0.1, 0.2, 0.4}) {
    MultiTestResult res = multiple_test(stats, d, alpha, 0.0);
    REQUIRE(res.t_hat <= prev_t + 1e-12);
    REQUIRE(res.rejected.size() >= prev_rejections);
    prev_t = res.t_hat;
    prev_rejections = res.rejected.size();
  }
}

TEST_CASE("multiple_test bookkeeping") {
  std::vector<PairStatistic> stats{stat_with_t(0, 1, 30.0), stat_with_t(0, 2, 0.5),
                                   stat_with_t(1, 2, 25.0)};
  MultiTestResult res = multiple_test(stats, 3, 0.2, 0.0);
  REQUIRE(res.q == 3);
  for (const auto& [u, v] : res.rejected) REQUIRE(u < v);
  // Permuting the input leaves the rejected set unchanged.
  std::vector<PairStatistic> shuffled{stats[2], stats[0], stats[1]};
  MultiTestResult res2 = multiple_test(shuffled, 3, 0.2, 0.0);
  REQUIRE(res.rejected == res2.rejected);
  REQUIRE(res.t_hat == res2.t_hat);

  std::vector<PairStatistic> diag{stat_with_t(1, 1, 1.0)};
  REQUIRE_THROWS_AS(multiple_test(diag, 2, 0.1, 0.0), InvalidInput);
}

TEST_CASE("multiband threshold reduces to the single-bandwidth rule") {
  std::vector<PairStatistic> stats{stat_with_t(0, 1, 9.0), stat_with_t(0, 2, 1.0),
                                   stat_with_t(1, 2, 14.0)};
  const int d = 3;
  FdrThreshold single = fdr_threshold(stats, d, 3, 0.15);
  FdrThreshold multi = fdr_threshold_multiband(stats, {d, d, d}, 0.15, d);
  REQUIRE(single.t_hat == Approx(multi.t_hat).epsilon(1e-13));
  REQUIRE(single.feasible == multi.feasible);
}

TEST_CASE("multiband threshold agrees with a bisection oracle") {
  // q = 2, d = {1, 2}, one rejection candidate: solve
  // (e^{-t/2} + 1 - (1 - e^{-t/2})^2) / 1 <= alpha by bisection.
  std::vector<PairStatistic> stats{stat_with_t(0, 1, 40.0), stat_with_t(0, 2, 0.0)};
  const double alpha = 0.8;  // crossing lies inside [0, 2 log(dq)]
  FdrThreshold thr = fdr_threshold_multiband(stats, {1, 2}, alpha, 2);
  auto criterion = [](double t) {
    const double e = std::exp(-t / 2.0);
    return e + 1.0 - std::pow(1.0 - e, 2.0);
  };
  double lo = 0.0, hi = 2.0 * std::log(4.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (criterion(mid) <= alpha) hi = mid; else lo = mid;
  }
  REQUIRE(thr.feasible);
  REQUIRE(thr.t_hat == Approx(hi).margin(1e-9));

  double prev = std::numeric_limits<double>::infinity();
  for (double a : {0.7, 0.8, 0.9, 0.95}) {
    FdrThreshold t = fdr_threshold_multiband(stats, {1, 2}, a, 2);
    REQUIRE(t.t_hat <= prev + 1e-12);
    prev = t.t_hat;
  }
}

TEST_CASE("null max statistics track the chi-squared-max reference") {
  // Diagonal Gaussian VAR(1): every partial coherence is zero, so T with
  // delta = 0 is the max of d standardized quadratic forms; its pooled
  // upper tail should stay within a factor 2 of G_d.
  const int p = 6, n = 4096, reps = 500, m_fixed = 8;
  Mat phi = Mat::Zero(p, p);
  for (int i = 0; i < p; ++i) phi(i, i) = 0.4 + 0.03 * i;
  VarmaModel model;
  model.ar = {phi};
  model.sigma_eps = Mat::Identity(p, p);

  PipelineOptions opts;
  opts.bandwidth = m_fixed;
  opts.workers = 1;

  std::vector<std::vector<double>> t_values(reps);
  parallel_for(reps, 2, [&](std::size_t r) {
    MultivariateSeries path = simulate_path(model, n, derive_seed(777, r));
    PipelineResult res = analyze_series(path, opts);
    for (const PairStatistic& s : res.test.statistics)
      t_values[r].push_back(s.T);
  });
  const int d = build_grid(m_fixed, KernelSpec::bartlett(), 0.0, kPi).d();

  std::vector<double> pooled;
  for (const auto& row : t_values) pooled.insert(pooled.end(), row.begin(), row.end());
  for (double tail : {0.2, 0.1, 0.05}) {
    const double t = single_test_quantile(d, tail);
    double exceed = 0.0;
    for (double v : pooled) exceed += v >= t ? 1.0 : 0.0;
    exceed /= static_cast<double>(pooled.size());
    REQUIRE(exceed >= 0.5 * tail);
    REQUIRE(exceed <= 2.0 * tail);
  }
}

TEST_CASE("de-biased estimates for disjoint pairs are asymptotically uncorrelated") {
  // Diagonal model, omega away from 0 and pi: the scaled covariance between
  // rho_de of disjoint pairs vanishes within Monte Carlo error.
  const int p = 5, n = 2048, reps = 200, m_fixed = 8;
  const double omega = kPi / 2.0;
  VarmaModel model;
  Mat phi = 0.45 * Mat::Identity(p, p);
  model.ar = {phi};
  model.sigma_eps = Mat::Identity(p, p);

  std::vector<cx> a_vals(reps), b_vals(reps);
  parallel_for(reps, 2, [&](std::size_t r) {
    MultivariateSeries path = simulate_path(model, n, derive_seed(555, r));
    SpectralField f = lag_window_estimate(path, KernelSpec::bartlett(), m_fixed, {omega});
    InverseEstimate inv = glasso_solve(f.matrices[0], 0.05);
    CMat acc = FourierGrid::compute(path).weighted_outer_sum(KernelSpec::bartlett(),
                                                             m_fixed, omega);
    a_vals[r] = debias_pair(acc, inv.matrix, 0, 1, omega).rho_de;
    b_vals[r] = debias_pair(acc, inv.matrix, 2, 3, omega).rho_de;
  });
  cx mean_a(0, 0), mean_b(0, 0);
  for (int r = 0; r < reps; ++r) {
    mean_a += a_vals[r];
    mean_b += b_vals[r];
  }
  mean_a /= static_cast<double>(reps);
  mean_b /= static_cast<double>(reps);
  cx cov(0, 0);
  double var_a = 0.0;
  for (int r = 0; r < reps; ++r) {
    cov += (a_vals[r] - mean_a) * std::conj(b_vals[r] - mean_b);
    var_a += std::norm(a_vals[r] - mean_a);
  }
  cov /= static_cast<double>(reps - 1);
  var_a /= static_cast<double>(reps - 1);
  const double scale = (static_cast<double>(n) / m_fixed) / (2.0 / 3.0);
  REQUIRE(std::abs(scale * cov) <= 0.3);        // -> 0 for disjoint pairs
  REQUIRE(scale * var_a >= 0.5);                // same-pair variance is O(1)
  REQUIRE(scale * var_a <= 2.0);
}
