// Sparse VARMA/VMA data generators with analytically known spectra, the
// exact finite-sample DFT variance, and the FDR/power experiment harness.
#pragma once

#include "cohgraph/pipeline.hpp"

#include <random>
#include <set>

namespace cohgraph {

// ---------------------------------------------------------------------------
// Model.
// ---------------------------------------------------------------------------

struct VarmaModel {
  std::vector<Mat> ar;   // Phi_j, X_t = sum Phi_j X_{t-j} + eps_t + sum Theta_j eps_{t-j}
  std::vector<Mat> ma;   // Theta_j
  Mat sigma_eps;
  std::uint64_t seed = 0;
  double s1 = 0.0;  // fraction of pairs with a nonzero partial coherence
  double s2 = 0.0;  // fraction of pairs exceeding modulus 0.2

  int p() const { return static_cast<int>(sigma_eps.rows()); }
};

enum class DgpKind { varma11, vma5 };

inline const char* dgp_kind_name(DgpKind k) {
  return k == DgpKind::varma11 ? "varma11" : "vma5";
}

namespace detail {

inline double ar_spectral_radius(const std::vector<Mat>& coeffs) {
  return companion_spectral_radius(coeffs);
}

}  // namespace detail

// A(omega) = I - sum Phi_j e^{-i w j},  B(omega) = I + sum Theta_j e^{-i w j}.
inline CMat varma_ar_transfer(const VarmaModel& model, double omega) {
  const int p = model.p();
  CMat a = CMat::Identity(p, p);
  for (std::size_t j = 0; j < model.ar.size(); ++j) {
    const double angle = -omega * static_cast<double>(j + 1);
    a -= cx(std::cos(angle), std::sin(angle)) * model.ar[j].cast<cx>();
  }
  return a;
}

inline CMat varma_ma_transfer(const VarmaModel& model, double omega) {
  const int p = model.p();
  CMat b = CMat::Identity(p, p);
  for (std::size_t j = 0; j < model.ma.size(); ++j) {
    const double angle = -omega * static_cast<double>(j + 1);
    b += cx(std::cos(angle), std::sin(angle)) * model.ma[j].cast<cx>();
  }
  return b;
}

// f(omega) = (2 pi)^{-1} A^{-1} B Sigma B^H A^{-H}.
inline CMat true_spectral_density(const VarmaModel& model, double omega) {
  CMat a = varma_ar_transfer(model, omega);
  Eigen::JacobiSVD<CMat> svd(a);
  const double smin = svd.singularValues().minCoeff();
  if (smin <= 0.0 || svd.singularValues().maxCoeff() / smin >= 1e12)
    throw SingularTransfer("true_spectral_density: AR transfer near-singular");
  CMat b = varma_ma_transfer(model, omega);
  CMat core = b * model.sigma_eps.cast<cx>() * b.adjoint();
  Eigen::PartialPivLU<CMat> lu(a);
  CMat half = lu.solve(core);
  return hermitize(lu.solve(half.adjoint()).adjoint() / (2.0 * kPi));
}

inline cx true_partial_coherence(const VarmaModel& model, int u, int v, double omega) {
  CMat f = true_spectral_density(model, omega);
  Eigen::FullPivLU<CMat> lu(f);
  if (!lu.isInvertible())
    throw DegenerateSpectrum("true_partial_coherence: singular spectral density");
  CMat f_inv = hermitize(lu.inverse());
  return rho_plugin(f_inv, u, v);
}

// ---------------------------------------------------------------------------
// Autocovariances via the state-space embedding and a doubling solve of the
// discrete Lyapunov equation V = F V F' + G Sigma G'.
// ---------------------------------------------------------------------------

namespace detail {

inline Mat solve_discrete_lyapunov(const Mat& f, const Mat& q) {
  Mat v = q;
  Mat a = f;
  for (int it = 0; it < 128; ++it) {
    Mat add = a * v * a.transpose();
    v += add;
    if (max_abs(add) <= 1e-17 * std::max(1.0, max_abs(v))) break;
    a = (a * a).eval();
  }
  return 0.5 * (v + v.transpose());
}

}  // namespace detail

// Gamma(k) = E[X_{t+k} X_t'] for k = 0..max_lag; computation truncates once
// ||Gamma(k)||_max < tol (remaining lags are returned as zero).
inline std::vector<Mat> model_autocovariances(const VarmaModel& model, int max_lag,
                                              double tol = 1e-14) {
  const int p = model.p();
  const int a_ord = static_cast<int>(model.ar.size());
  const int b_ord = static_cast<int>(model.ma.size());

  std::vector<Mat> gam(max_lag + 1, Mat::Zero(p, p));
  if (a_ord == 0) {
    // Pure moving average: finite closed-form sums.
    std::vector<Mat> theta{Mat::Identity(p, p)};
    for (const Mat& t : model.ma) theta.push_back(t);
    for (int k = 0; k <= std::min(max_lag, b_ord); ++k) {
      Mat g = Mat::Zero(p, p);
      for (int j = 0; j + k <= b_ord; ++j)
        g += theta[j + k] * model.sigma_eps * theta[j].transpose();
      gam[k] = g;
    }
    return gam;
  }

  // State (X_t, ..., X_{t-a+1}, eps_t, ..., eps_{t-b+1}).
  const int dim = p * (a_ord + b_ord);
  Mat f = Mat::Zero(dim, dim);
  for (int j = 0; j < a_ord; ++j) f.block(0, j * p, p, p) = model.ar[j];
  for (int j = 0; j < b_ord; ++j) f.block(0, (a_ord + j) * p, p, p) = model.ma[j];
  if (a_ord > 1)
    f.block(p, 0, p * (a_ord - 1), p * (a_ord - 1)).setIdentity();
  if (b_ord > 1)
    f.block(a_ord * p + p, a_ord * p, p * (b_ord - 1), p * (b_ord - 1)).setIdentity();

  Mat g = Mat::Zero(dim, p);
  g.topRows(p).setIdentity();
  if (b_ord > 0) g.block(a_ord * p, 0, p, p).setIdentity();
  const Mat q = g * model.sigma_eps * g.transpose();

  Mat v = detail::solve_discrete_lyapunov(f, q);
  Mat cross = v;  // Gamma_state(k); top-left block is Gamma(k)
  gam[0] = 0.5 * (v.topLeftCorner(p, p) + v.topLeftCorner(p, p).transpose());
  for (int k = 1; k <= max_lag; ++k) {
    cross = (f * cross).eval();
    gam[k] = cross.topLeftCorner(p, p);
    if (max_abs(gam[k]) < tol) break;
  }
  return gam;
}

// Sigma_n(omega) = (2 pi)^{-1} sum_{|k|<n} (1 - |k|/n) Gamma(k) e^{-i w k}.
inline CMat exact_dft_variance(const VarmaModel& model, int n, double omega) {
  std::vector<Mat> gam = model_autocovariances(model, n - 1);
  CMat sum = gam[0].cast<cx>();
  for (int k = 1; k <= n - 1; ++k) {
    if (max_abs(gam[k]) == 0.0) continue;
    const double w = 1.0 - static_cast<double>(k) / n;
    const cx e(std::cos(omega * k), -std::sin(omega * k));
    sum += w * (e * gam[k].cast<cx>() + std::conj(e) * gam[k].transpose().cast<cx>());
  }
  return hermitize(sum / (2.0 * kPi));
}

// ---------------------------------------------------------------------------
// Path simulation: VARMA recursion with a 500-step burn-in, Gaussian
// innovations by default (centered uniform optionally, same covariance).
// ---------------------------------------------------------------------------

inline MultivariateSeries simulate_path(const VarmaModel& model, int n,
                                        std::uint64_t seed, bool gaussian = true) {
  if (n < 64) throw InvalidInput("simulate_path: need n >= 64");
  const int p = model.p();
  const int a_ord = static_cast<int>(model.ar.size());
  const int b_ord = static_cast<int>(model.ma.size());
  constexpr int kBurnIn = 500;

  Eigen::LLT<Mat> llt(model.sigma_eps);
  if (llt.info() != Eigen::Success)
    throw InvalidInput("simulate_path: innovation covariance not SPD");
  const Mat chol = llt.matrixL();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double half_width = std::sqrt(3.0);  // unit-variance centered uniform
  std::uniform_real_distribution<double> uniform(-half_width, half_width);

  std::vector<Vec> x_hist(std::max(a_ord, 1), Vec::Zero(p));
  std::vector<Vec> e_hist(std::max(b_ord, 1), Vec::Zero(p));
  Mat out(n, p);
  Vec z(p);
  for (int t = 0; t < kBurnIn + n; ++t) {
    for (int i = 0; i < p; ++i) z(i) = gaussian ? gauss(rng) : uniform(rng);
    Vec eps = chol * z;
    Vec x = eps;
    for (int j = 0; j < a_ord; ++j) x += model.ar[j] * x_hist[j];
    for (int j = 0; j < b_ord; ++j) x += model.ma[j] * e_hist[j];
    for (int j = a_ord - 1; j > 0; --j) x_hist[j] = x_hist[j - 1];
    if (a_ord > 0) x_hist[0] = x;
    for (int j = b_ord - 1; j > 0; --j) e_hist[j] = e_hist[j - 1];
    if (b_ord > 0) e_hist[0] = eps;
    if (t >= kBurnIn) out.row(t - kBurnIn) = x.transpose();
  }
  return center_series(out);
}

// ---------------------------------------------------------------------------
// Generator.  varma11: diagonal AR plus acyclic (strictly lower-triangular)
// random couplings, diagonal MA.  vma5: block-diagonal MA(5) over randomly
// permuted component blocks.  Both calibrate the count of nonzero partial
// coherences against the analytic spectrum on a 64-point midpoint grid.
// ---------------------------------------------------------------------------

namespace detail {

struct SupportCount {
  double s1 = 0.0;
  double s2 = 0.0;
  std::vector<std::pair<int, int>> edges;  // pairs with nonzero max modulus
  std::vector<double> max_modulus;         // per pair (u < v), row-major order
};

inline SupportCount count_support(const VarmaModel& model, double threshold = 1e-10,
                                  int grid_points = 64) {
  const int p = model.p();
  SupportCount out;
  std::vector<double> max_mod(static_cast<std::size_t>(p) * p, 0.0);
  for (int g = 0; g < grid_points; ++g) {
    const double omega = kPi * (2.0 * g + 1.0) / (2.0 * grid_points);
    CMat f = true_spectral_density(model, omega);
    CMat f_inv = hermitize(f.inverse());
    for (int u = 0; u < p; ++u)
      for (int v = u + 1; v < p; ++v) {
        const double mod = std::abs(rho_plugin(f_inv, u, v));
        max_mod[u * p + v] = std::max(max_mod[u * p + v], mod);
      }
  }
  int q = 0, nonzero = 0, strong = 0;
  for (int u = 0; u < p; ++u)
    for (int v = u + 1; v < p; ++v) {
      ++q;
      const double mod = max_mod[u * p + v];
      out.max_modulus.push_back(mod);
      if (mod > threshold) {
        ++nonzero;
        out.edges.emplace_back(u, v);
      }
      if (mod > 0.2) ++strong;
    }
  out.s1 = static_cast<double>(nonzero) / q;
  out.s2 = static_cast<double>(strong) / q;
  return out;
}

}  // namespace detail

inline VarmaModel generate_sparse_varma(int p, DgpKind kind, double density,
                                        std::uint64_t seed) {
  if (p < 2) throw InvalidInput("generate_sparse_varma: need p >= 2");
  if (!(density > 0.0 && density <= 0.2))
    throw InvalidInput("generate_sparse_varma: density must lie in (0, 0.2]");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw_signed = [&](double lo, double hi) {
    const double mag = lo + (hi - lo) * unit(rng);
    return unit(rng) < 0.5 ? -mag : mag;
  };

  const int q = p * (p - 1) / 2;
  const int target_edges = std::max(0, static_cast<int>(std::lround(density * q)));

  VarmaModel model;
  model.seed = seed;
  model.sigma_eps = Mat::Identity(p, p);
  for (int i = 0; i < p; ++i) model.sigma_eps(i, i) = 0.8 + 0.4 * unit(rng);

  if (kind == DgpKind::varma11) {
    Mat phi = Mat::Zero(p, p);
    for (int i = 0; i < p; ++i) phi(i, i) = draw_signed(0.35, 0.6);
    Mat theta = Mat::Zero(p, p);
    for (int i = 0; i < p; ++i) theta(i, i) = draw_signed(0.1, 0.35);

    // Strictly lower-triangular couplings keep the AR polynomial triangular,
    // hence stable by construction.  The support of f^{-1} is the coupling
    // pairs plus one pair per shared row, so the edge budget is tracked
    // symbolically while placing couplings.
    std::set<std::pair<int, int>> chosen;
    std::set<std::pair<int, int>> edges;
    std::vector<std::vector<int>> row_targets(p);
    std::uniform_int_distribution<int> pick_row(1, p - 1);
    int guard = 0;
    while (static_cast<int>(edges.size()) < target_edges &&
           guard++ < 50 * target_edges + 100) {
      const int u = pick_row(rng);
      std::uniform_int_distribution<int> pick_col(0, u - 1);
      const int v = pick_col(rng);
      if (!chosen.insert({u, v}).second) continue;
      phi(u, v) = draw_signed(0.5, 0.8);
      edges.insert({v, u});
      for (int w : row_targets[u])
        edges.insert({std::min(v, w), std::max(v, w)});
      row_targets[u].push_back(v);
    }
    model.ar = {phi};
    model.ma = {theta};
  } else {
    // Random blocks of size 3 (three pairs each) and 2 (one pair) matching
    // the edge budget; all dynamics stay inside a block.
    std::vector<int> perm(p);
    for (int i = 0; i < p; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<int>> blocks;
    int budget = target_edges;
    std::size_t cursor = 0;
    while (budget > 0 && cursor < perm.size()) {
      if (budget >= 3 && perm.size() - cursor >= 3) {
        blocks.push_back({perm[cursor], perm[cursor + 1], perm[cursor + 2]});
        cursor += 3;
        budget -= 3;
      } else if (perm.size() - cursor >= 2) {
        blocks.push_back({perm[cursor], perm[cursor + 1]});
        cursor += 2;
        budget -= 1;
      } else {
        break;
      }
    }
    model.ma.assign(5, Mat::Zero(p, p));
    for (int j = 0; j < 5; ++j) {
      const double decay = 1.0 / (1.0 + j);
      for (int i = 0; i < p; ++i) model.ma[j](i, i) = draw_signed(0.05, 0.3) * decay;
      for (const auto& block : blocks)
        for (int a : block)
          for (int b : block)
            if (a != b) model.ma[j](a, b) = draw_signed(0.25, 0.55) * decay;
    }
    // Rescale towards invertibility if the MA companion radius is too big.
    for (int attempt = 0;; ++attempt) {
      const double radius = detail::ar_spectral_radius(model.ma);
      if (radius <= 0.7) break;
      if (attempt >= 100)
        throw GenerationFailure("generate_sparse_varma: could not stabilize MA part");
      // Scaling Theta_j by s^j scales every companion root by s.
      const double s = 0.95 * (0.7 / radius);
      for (std::size_t j = 0; j < model.ma.size(); ++j)
        model.ma[j] *= std::pow(s, static_cast<double>(j + 1));
    }
  }

  if (!model.ar.empty()) {
    for (int attempt = 0;; ++attempt) {
      const double radius = detail::ar_spectral_radius(model.ar);
      if (radius <= 0.7) break;
      if (attempt >= 100)
        throw GenerationFailure("generate_sparse_varma: could not stabilize AR part");
      for (Mat& m : model.ar) m *= 0.95 * (0.7 / radius);
    }
  }

  detail::SupportCount support = detail::count_support(model);
  model.s1 = support.s1;
  model.s2 = support.s2;
  return model;
}

// ---------------------------------------------------------------------------
// Experiment harness: FDR and power of the testing pipeline versus the
// thresholded-glasso "regularizing" baseline, over seeded replications.
// ---------------------------------------------------------------------------

enum class ExperimentMethod { testing, regularizing };

inline const char* experiment_method_name(ExperimentMethod m) {
  return m == ExperimentMethod::testing ? "testing" : "regularizing";
}

struct ExperimentConfig {
  DgpKind kind = DgpKind::varma11;
  int p = 20;
  int n = 512;
  double alpha = 0.1;
  double delta = 0.0;
  ExperimentMethod method = ExperimentMethod::testing;
  int replications = 100;
  std::uint64_t seed = 1;
  double density = 0.05;
  double strong_margin = 0.2;  // strong-signal set: max |rho| > delta + margin
  int workers = 0;
  PipelineOptions pipeline;    // alpha/delta/workers are overwritten per run
};

struct ExperimentReport {
  ExperimentConfig config;
  double model_s1 = 0.0, model_s2 = 0.0;
  int alternatives = 0, strong_alternatives = 0, pairs = 0;
  double fdr_mean = 0.0, fdr_sd = 0.0;
  double power_mean = 0.0, power_sd = 0.0;          // all alternatives
  double power_strong_mean = 0.0, power_strong_sd = 0.0;
  bool power_defined = false;
  std::vector<double> fdr_per_rep, power_per_rep, power_strong_per_rep;
};

namespace detail {

inline std::pair<double, double> mean_sd(const std::vector<double>& x) {
  if (x.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  if (x.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (static_cast<double>(x.size()) - 1))};
}

}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.replications < 1)
    throw InvalidInput("run_experiment: need at least one replication");
  VarmaModel model = generate_sparse_varma(config.p, config.kind, config.density,
                                           derive_seed(config.seed, 0));
  detail::SupportCount support = detail::count_support(model);

  // Structural-zero pairs carry numerical fuzz of ~1e-14, so the null/
  // alternative split at delta = 0 uses the same support threshold as s1.
  const double alt_threshold = std::max(config.delta, 1e-10);
  std::set<std::pair<int, int>> alt_set, strong_set;
  {
    std::size_t idx = 0;
    for (int u = 0; u < config.p; ++u)
      for (int v = u + 1; v < config.p; ++v, ++idx) {
        if (support.max_modulus[idx] > alt_threshold) alt_set.insert({u, v});
        if (support.max_modulus[idx] > config.delta + config.strong_margin)
          strong_set.insert({u, v});
      }
  }

  ExperimentReport report;
  report.config = config;
  report.model_s1 = model.s1;
  report.model_s2 = model.s2;
  report.pairs = config.p * (config.p - 1) / 2;
  report.alternatives = static_cast<int>(alt_set.size());
  report.strong_alternatives = static_cast<int>(strong_set.size());
  report.fdr_per_rep.resize(config.replications);
  report.power_per_rep.resize(config.replications);
  report.power_strong_per_rep.resize(config.replications);

  PipelineOptions pipeline_options = config.pipeline;
  pipeline_options.alpha = config.alpha;
  pipeline_options.delta = config.delta;
  pipeline_options.workers = 1;  // replications carry the parallelism

  parallel_for(static_cast<std::size_t>(config.replications), config.workers,
               [&](std::size_t rep) {
    MultivariateSeries path =
        simulate_path(model, config.n, derive_seed(config.seed, rep + 1));
    std::vector<std::pair<int, int>> rejected;
    if (config.method == ExperimentMethod::testing) {
      PipelineResult result = analyze_series(path, pipeline_options);
      rejected = result.test.rejected;
    } else {
      rejected = regularizing_edges(path, pipeline_options);
    }
    int false_pos = 0, hits = 0, strong_hits = 0;
    for (const auto& edge : rejected) {
      if (alt_set.count(edge) == 0) ++false_pos;
      if (alt_set.count(edge) != 0) ++hits;
      if (strong_set.count(edge) != 0) ++strong_hits;
    }
    report.fdr_per_rep[rep] =
        rejected.empty() ? 0.0
                         : static_cast<double>(false_pos) / rejected.size();
    report.power_per_rep[rep] =
        alt_set.empty() ? 0.0 : static_cast<double>(hits) / alt_set.size();
    report.power_strong_per_rep[rep] =
        strong_set.empty() ? 0.0
                           : static_cast<double>(strong_hits) / strong_set.size();
  });

  std::tie(report.fdr_mean, report.fdr_sd) = detail::mean_sd(report.fdr_per_rep);
  report.power_defined = !alt_set.empty();
  std::tie(report.power_mean, report.power_sd) = detail::mean_sd(report.power_per_rep);
  std::tie(report.power_strong_mean, report.power_strong_sd) =
      detail::mean_sd(report.power_strong_per_rep);
  return report;
}

}  // namespace cohgraph
