// End-to-end analysis pipeline: prewhiten, select the bandwidth on the
// whitened series, build the frequency grid, estimate the inverse spectral
// density per grid frequency, compute de-biased partial coherences for every
// pair, and run the FDR-controlled multiple test.
#pragma once

#include "cohgraph/testing.hpp"

#include <set>

namespace cohgraph {

struct PipelineOptions {
  double delta = 0.0;
  double alpha = 0.1;
  double band_lo = 0.0;      // radians, subset of [0, pi]
  double band_hi = kPi;
  KernelSpec kernel = KernelSpec::bartlett();
  int bandwidth = 0;         // 0 = automatic selection
  bool prewhiten = true;
  int var_order = 0;         // 0 = ceil(log10 n)
  InverseMethod inverse = InverseMethod::glasso;
  double lambda = 0.0;       // 0 = per-frequency BIC
  std::vector<std::pair<int, int>> pairs;  // empty = all u < v
  int workers = 0;
};

struct PipelineResult {
  MultiTestResult test;
  FrequencyGrid grid;
  int n = 0, p = 0;
  int var_order_used = 0;
  int var_nonzeros = 0;
  bool var_stable = true;
  int M = 0;
  bool bandwidth_clamped = false;
  int n_eff = 0;                       // effective sample size fed to the BIC
  std::vector<double> lambda_used;     // per grid frequency
  std::vector<int> debias_fallbacks;   // per grid frequency, pairs that fell back
};

namespace detail {

inline int default_var_order(Eigen::Index n) {
  return static_cast<int>(std::ceil(std::log10(static_cast<double>(n))));
}

inline std::vector<std::pair<int, int>> all_pairs(int p) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(p) * (p - 1) / 2);
  for (int u = 0; u < p; ++u)
    for (int v = u + 1; v < p; ++v) pairs.emplace_back(u, v);
  return pairs;
}

struct SpectralStage {
  MultivariateSeries whitened;   // centered filtered series (or the input)
  VarModel model;                // identity when prewhitening is off
  FrequencyGrid grid;
  int M = 0;
  bool bandwidth_clamped = false;
  std::vector<CMat> accumulator;  // recolored weighted outer sums, per freq
  SpectralField density;          // recolored lag-window estimate, per freq
};

// Shared front half of both the testing pipeline and the regularizing
// baseline: filtering, bandwidth, grid, accumulators, density estimates.
inline SpectralStage spectral_stage(const MultivariateSeries& series,
                                    const PipelineOptions& opts) {
  if (series.p() < 2) throw InvalidInput("pipeline: need at least 2 components");
  if (series.has_degenerate_columns())
    throw DegenerateSpectrum("pipeline: zero-variance column present");
  if (opts.delta < 0.0 || opts.delta >= 1.0)
    throw InvalidInput("pipeline: need 0 <= delta < 1");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0))
    throw InvalidInput("pipeline: need alpha in (0,1)");

  SpectralStage stage;
  if (opts.prewhiten) {
    const int order = opts.var_order > 0 ? opts.var_order
                                         : default_var_order(series.n());
    stage.model = fit_sparse_var(series, order);
    stage.whitened = center_series(apply_filter(series, stage.model).values,
                                   series.sampling_rate);
  } else {
    stage.model = VarModel::identity(static_cast<int>(series.p()));
    stage.whitened = series;
  }

  if (opts.bandwidth > 0) {
    stage.M = opts.bandwidth;
    if (2 * stage.M >= stage.whitened.n())
      throw InvalidBandwidth("pipeline: bandwidth must satisfy M < n/2");
  } else {
    BandwidthSelection sel = bandwidth_select(stage.whitened, 5, 1.5, opts.kernel);
    stage.M = sel.M;
    stage.bandwidth_clamped = sel.clamped;
    if (2 * stage.M >= stage.whitened.n())
      stage.M = static_cast<int>(stage.whitened.n() / 2) - 1;
    stage.M = std::max(stage.M, 4);
  }
  stage.grid = build_grid(stage.M, opts.kernel, opts.band_lo, opts.band_hi);

  const FourierGrid fourier = FourierGrid::compute(stage.whitened);
  SpectralField whitened_density = lag_window_estimate(
      stage.whitened, opts.kernel, stage.M, stage.grid.frequencies);

  const std::size_t d = stage.grid.frequencies.size();
  stage.accumulator.resize(d);
  stage.density.kind = FieldKind::density;
  stage.density.frequencies = stage.grid.frequencies;
  stage.density.matrices.resize(d);
  parallel_for(d, opts.workers, [&](std::size_t l) {
    const double omega = stage.grid.frequencies[l];
    CMat sum = fourier.weighted_outer_sum(opts.kernel, stage.M, omega);
    stage.accumulator[l] = recolor_spectrum(stage.model, sum, omega);
    stage.density.matrices[l] =
        recolor_spectrum(stage.model, whitened_density.matrices[l], omega);
  });
  return stage;
}

struct InverseStage {
  std::vector<InverseEstimate> estimates;
  std::vector<double> lambda;
  int n_eff = 0;
};

inline InverseStage inverse_stage(const SpectralStage& stage,
                                  const PipelineOptions& opts) {
  InverseStage inv;
  // The smoothed estimate at one frequency carries about n/M independent
  // periodogram ordinates; that drives the BIC's sample-size term.
  inv.n_eff = std::max<int>(
      4, static_cast<int>(std::lround(static_cast<double>(stage.whitened.n()) / stage.M)));
  const std::size_t d = stage.density.size();
  if (opts.lambda > 0.0) {
    inv.lambda.assign(d, opts.lambda);
    inv.estimates.resize(d);
    parallel_for(d, opts.workers, [&](std::size_t l) {
      inv.estimates[l] = solve_inverse(stage.density.matrices[l], opts.lambda,
                                       opts.inverse);
    });
  } else {
    LambdaSelection sel = select_lambda_bic(stage.density, inv.n_eff, opts.inverse,
                                            30, opts.workers);
    inv.lambda = sel.lambda;
    inv.estimates = std::move(sel.estimates);
  }
  return inv;
}

}  // namespace detail

inline PipelineResult analyze_series(const MultivariateSeries& series,
                                     const PipelineOptions& opts) {
  detail::SpectralStage stage = detail::spectral_stage(series, opts);
  detail::InverseStage inv = detail::inverse_stage(stage, opts);

  const int p = static_cast<int>(series.p());
  const int n = static_cast<int>(series.n());
  std::vector<std::pair<int, int>> pairs =
      opts.pairs.empty() ? detail::all_pairs(p) : opts.pairs;
  for (const auto& pr : pairs) {
    if (pr.first == pr.second || pr.first < 0 || pr.second < 0 ||
        pr.first >= p || pr.second >= p)
      throw InvalidInput("pipeline: invalid pair in the tested set");
  }
  std::sort(pairs.begin(), pairs.end());

  const std::size_t d = stage.grid.frequencies.size();
  std::vector<PairStatistic> stats(pairs.size());
  std::vector<std::vector<int>> fallback_slots(pairs.size());
  parallel_for(pairs.size(), opts.workers, [&](std::size_t i) {
    const auto [u, v] = pairs[i];
    std::vector<DebiasedEstimate> estimates;
    estimates.reserve(d);
    for (std::size_t l = 0; l < d; ++l) {
      DebiasedEstimate est = debias_pair(stage.accumulator[l],
                                         inv.estimates[l].matrix, u, v,
                                         stage.grid.frequencies[l]);
      if (est.fallback) fallback_slots[i].push_back(static_cast<int>(l));
      estimates.push_back(est);
    }
    stats[i] = pair_statistic(estimates, opts.delta, n, stage.M, opts.kernel.c_k2);
  });

  PipelineResult result;
  result.grid = stage.grid;
  result.n = n;
  result.p = p;
  result.var_order_used = stage.model.order;
  result.var_nonzeros = stage.model.nonzero_count;
  result.var_stable = stage.model.stable;
  result.M = stage.M;
  result.bandwidth_clamped = stage.bandwidth_clamped;
  result.n_eff = inv.n_eff;
  result.lambda_used = inv.lambda;
  result.debias_fallbacks.assign(d, 0);
  for (const auto& slots : fallback_slots)
    for (int l : slots) ++result.debias_fallbacks[l];
  result.test = multiple_test(std::move(stats), stage.grid.d(), opts.alpha, opts.delta);
  return result;
}

// "Regularizing" baseline: per-frequency glasso with BIC-selected penalty,
// thresholded at the same penalty; an edge is kept when the thresholded
// inverse is nonzero at any grid frequency.
inline std::vector<std::pair<int, int>> regularizing_edges(
    const MultivariateSeries& series, const PipelineOptions& opts) {
  PipelineOptions local = opts;
  local.inverse = InverseMethod::glasso;
  detail::SpectralStage stage = detail::spectral_stage(series, local);
  detail::InverseStage inv = detail::inverse_stage(stage, local);

  const int p = static_cast<int>(series.p());
  std::set<std::pair<int, int>> edges;
  for (std::size_t l = 0; l < inv.estimates.size(); ++l) {
    InverseEstimate sparse = threshold_inverse(inv.estimates[l], inv.lambda[l]);
    for (int u = 0; u < p; ++u)
      for (int v = u + 1; v < p; ++v)
        if (std::abs(sparse.matrix(u, v)) > 0.0) edges.insert({u, v});
  }
  return {edges.begin(), edges.end()};
}

}  // namespace cohgraph
