// Coherence, plug-in partial coherence, the regression quantities beta and
// gamma, and the de-biased estimators.
//
// For a regularized inverse F = f_hat^{-1}(omega) and a pair (u, v):
//   beta_v      = -F_{-v,v} / F_{v,v}                      (regression of Z_v)
//   gamma^H     = F_{v,v} F_{u,-v} - F_{u,v} F_{v,-v}      (rotation of Z_u)
//   beta_de     = beta_{v,u} + [(e_v - I_{-v} beta_v)^H A g] / [e_u^T A g]
// with A the kernel-weighted outer-product accumulator at omega and
// g = I_{p,-v} gamma.  The accumulator's (M/n) prefactor cancels between
// numerator and denominator, so A is reused exactly as produced by
// FourierGrid::weighted_outer_sum.
#pragma once

#include "cohgraph/inverse.hpp"
#include "cohgraph/prewhiten.hpp"

namespace cohgraph {

struct CoherencePair {
  int u = 0, v = 0;
  double omega = 0.0;
  cx s_hat;
  double magnitude = 0.0;
};

// s_hat_{u,v} = f_{u,v} / sqrt(f_{v,v} f_{u,u}).  Indices are 0-based.
inline CoherencePair coherence_hat(const CMat& f, int u, int v, double omega = 0.0) {
  const double fuu = f(u, u).real();
  const double fvv = f(v, v).real();
  if (fuu <= 0.0 || fvv <= 0.0)
    throw DegenerateSpectrum("coherence_hat: non-positive spectral diagonal");
  CoherencePair out;
  out.u = u;
  out.v = v;
  out.omega = omega;
  out.s_hat = u == v ? cx(1.0, 0.0) : cx(f(u, v) / std::sqrt(fuu * fvv));
  out.magnitude = std::abs(out.s_hat);
  return out;
}

inline CoherencePair coherence_hat(const SpectralField& field, int u, int v, double omega) {
  return coherence_hat(field.at(omega), u, v, omega);
}

// rho_{u,v} = -F_{u,v} / sqrt(F_{u,u} F_{v,v}).
inline cx rho_plugin(const CMat& f_inv, int u, int v) {
  const double fuu = f_inv(u, u).real();
  const double fvv = f_inv(v, v).real();
  if (fuu <= 0.0 || fvv <= 0.0)
    throw DegenerateInverse("rho_plugin: non-positive inverse diagonal");
  if (u == v) return cx(1.0, 0.0);
  return -f_inv(u, v) / std::sqrt(fuu * fvv);
}

inline cx rho_plugin(const InverseEstimate& est, int u, int v) {
  return rho_plugin(est.matrix, u, v);
}

// Regression coefficient vector beta_v and rotation vector gamma_{-v,u},
// both indexed over {0..p-1} \ {v} in natural order.
struct BetaGamma {
  CVec beta_v;
  CVec gamma;
};

inline BetaGamma beta_gamma_hat(const CMat& f_inv, int u, int v) {
  const Eigen::Index p = f_inv.rows();
  if (u == v) throw InvalidInput("beta_gamma_hat: u and v must differ");
  const cx fvv = f_inv(v, v);
  if (std::abs(fvv) <= 1e-300)
    throw DegenerateInverse("beta_gamma_hat: zero inverse diagonal");
  BetaGamma out;
  out.beta_v.resize(p - 1);
  out.gamma.resize(p - 1);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (i == v) continue;
    out.beta_v(r) = -f_inv(i, v) / fvv;
    // gamma^H_r = F_vv F_{u,i} - F_{u,v} F_{v,i}; store the conjugate.
    out.gamma(r) = std::conj(fvv * f_inv(u, i) - f_inv(u, v) * f_inv(v, i));
    ++r;
  }
  return out;
}

struct DebiasResult {
  cx value;            // beta^{(de)}_{v,u}
  cx plugin;           // beta_{v,u}
  cx denominator;      // e_u^T A g, kept for diagnostics
  bool fallback = false;  // true when the correction was skipped as unstable
};

// Core de-biased regression coefficient given the per-frequency accumulator.
// The u-th coefficient of the regression of Z_v on Z_{-v} is de-biased by
// the rotated residual ratio
//   [sum_k kappa Z~_u(w_k) conj(Z_v - beta^H Z_{-v})(w_k)] /
//   [sum_k kappa Z~_u(w_k) conj(Z_u(w_k))],
// the sample form of Cov(Z~_u, E_v)/Cov(Z~_u, Z_u).  The conjugation
// pairing matters: with the rotation on the conjugated side the leading
// error term of the correction is -conj(delta) instead of -delta, which
// leaves the imaginary part un-corrected (the covariance pairing used here
// is the one whose first-order expansion cancels the regularization error
// exactly, and the one the Gaussian limit requires).  A near-zero
// denominator falls back to the plug-in value with a flag instead of
// propagating an unstable correction.
inline DebiasResult beta_debiased_core(const CMat& accumulator, const CMat& f_inv,
                                       int u, int v) {
  const Eigen::Index p = f_inv.rows();
  BetaGamma bg = beta_gamma_hat(f_inv, u, v);
  CVec g = CVec::Zero(p);
  CVec b = CVec::Zero(p);
  b(v) = cx(1.0, 0.0);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (i == v) continue;
    g(i) = bg.gamma(r);
    b(i) = -bg.beta_v(r);
    ++r;
  }
  const CVec h = accumulator * g;
  // gamma^H A^H b and gamma^H A^H e_u, with A Hermitian.
  const cx numerator = std::conj(b.dot(h));
  const cx denominator = std::conj(h(u));

  const Eigen::Index u_pos = u < v ? u : u - 1;
  DebiasResult out;
  out.plugin = bg.beta_v(u_pos);
  out.denominator = denominator;
  if (std::abs(denominator) <= 1e-12 * std::abs(numerator) ||
      std::abs(denominator) == 0.0) {
    out.value = out.plugin;
    out.fallback = true;
    return out;
  }
  out.value = out.plugin + numerator / denominator;
  return out;
}

// Convenience form that builds the accumulator from the series, optionally
// through the prewhitening filter: the whitened series' weighted sum is
// recolored by Phi(omega)^{-1} (.) Phi(omega)^{-H}.
inline DebiasResult beta_debiased(const MultivariateSeries& series, const CMat& f_inv,
                                  const KernelSpec& kernel, int m_lag, int u, int v,
                                  double omega, const VarModel* prewhiten = nullptr) {
  CMat accumulator;
  if (prewhiten != nullptr && !prewhiten->is_identity()) {
    MultivariateSeries whitened = center_series(apply_filter(series, *prewhiten).values,
                                                series.sampling_rate);
    accumulator = recolor_spectrum(
        *prewhiten,
        FourierGrid::compute(whitened).weighted_outer_sum(kernel, m_lag, omega), omega);
  } else {
    accumulator = FourierGrid::compute(series).weighted_outer_sum(kernel, m_lag, omega);
  }
  return beta_debiased_core(accumulator, f_inv, u, v);
}

struct DebiasedEstimate {
  int u = 0, v = 0;
  double omega = 0.0;
  cx rho_de;
  cx rho_plugin;
  cx beta_de_u_on_v;  // coefficient of Z_v in the regression of Z_u
  cx beta_de_v_on_u;  // coefficient of Z_u in the regression of Z_v
  cx denominator_u_on_v;
  cx denominator_v_on_u;
  bool fallback = false;
};

// rho^{(de)}_{u,v} = 1/2 ( beta^{(de)}_{v,u} sqrt(F_vv/F_uu)
//                        + conj(beta^{(de)}_{u,v}) sqrt(F_uu/F_vv) ),
// paired so that the estimator targets rho_{u,v} = -F_uv/sqrt(F_uu F_vv);
// the swap-conjugation symmetry rho_{u,v} = conj(rho_{v,u}) holds exactly.
inline cx rho_debiased(cx beta_de_v_on_u, cx beta_de_u_on_v, const CMat& f_inv,
                       int u, int v) {
  const double fuu = f_inv(u, u).real();
  const double fvv = f_inv(v, v).real();
  if (fuu <= 0.0 || fvv <= 0.0)
    throw DegenerateInverse("rho_debiased: non-positive inverse diagonal");
  const double ratio = std::sqrt(fvv / fuu);
  return 0.5 * (beta_de_v_on_u * ratio + std::conj(beta_de_u_on_v) / ratio);
}

// One-shot pair estimate from a shared accumulator.  Internally computed in
// the canonical orientation u < v and conjugated back, so the symmetry
// rho(u,v) = conj(rho(v,u)) holds bit-exactly.
inline DebiasedEstimate debias_pair(const CMat& accumulator, const CMat& f_inv,
                                    int u, int v, double omega) {
  if (u > v) {
    DebiasedEstimate est = debias_pair(accumulator, f_inv, v, u, omega);
    std::swap(est.u, est.v);
    std::swap(est.beta_de_u_on_v, est.beta_de_v_on_u);
    std::swap(est.denominator_u_on_v, est.denominator_v_on_u);
    est.rho_de = std::conj(est.rho_de);
    est.rho_plugin = std::conj(est.rho_plugin);
    return est;
  }
  DebiasedEstimate est;
  est.u = u;
  est.v = v;
  est.omega = omega;
  DebiasResult v_on_u = beta_debiased_core(accumulator, f_inv, u, v);
  DebiasResult u_on_v = beta_debiased_core(accumulator, f_inv, v, u);
  est.beta_de_v_on_u = v_on_u.value;
  est.beta_de_u_on_v = u_on_v.value;
  est.denominator_v_on_u = v_on_u.denominator;
  est.denominator_u_on_v = u_on_v.denominator;
  est.fallback = v_on_u.fallback || u_on_v.fallback;
  est.rho_de = rho_debiased(v_on_u.value, u_on_v.value, f_inv, u, v);
  est.rho_plugin = rho_plugin(f_inv, u, v);
  return est;
}

}  // namespace cohgraph
