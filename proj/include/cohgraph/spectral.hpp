// Frequency-domain estimation: finite Fourier transform, sample
// autocovariances, lag-window and smoothed-periodogram spectral density
// estimates, and the adaptive bandwidth rule.
//
// Conventions (used consistently everywhere):
//   Z_n(omega)   = (2 pi n)^{-1/2} sum_{t=1..n} X_t exp(-i omega t)
//   Gamma_hat(u) = n^{-1} sum_t X_{t+u} X_t^T            (divisor n, biased)
//   f_hat_M(w)   = (2 pi)^{-1} sum_u K(u/M) Gamma_hat(u) exp(-i u w)
//   smoothed     = (M/n) sum_{k=1..n} kappa_M(w - w_k) Z(w_k) Z(w_k)^H,
//                  w_k = 2 pi k / n.
// The two estimator forms are deliberately kept separate: they differ by
// circular wrap-around terms at finite n.
#pragma once

#include "cohgraph/kernels.hpp"
#include "cohgraph/series.hpp"

#include <unsupported/Eigen/FFT>

namespace cohgraph {

enum class FieldKind { density, inverse_density, dft_variance };

// A frequency-indexed family of p x p Hermitian matrices.
struct SpectralField {
  std::vector<double> frequencies;
  std::vector<CMat> matrices;
  FieldKind kind = FieldKind::density;

  std::size_t size() const { return frequencies.size(); }

  // Exact-frequency lookup; the library never interpolates between
  // frequencies.
  const CMat& at(double omega, double tol = 1e-9) const {
    for (std::size_t i = 0; i < frequencies.size(); ++i) {
      if (std::abs(frequencies[i] - omega) <= tol) return matrices[i];
    }
    throw InvalidInput("SpectralField: frequency not on the stored grid");
  }
};

// Finite Fourier transform at an arbitrary frequency (direct O(np) sum).
inline CVec dft(const MultivariateSeries& series, double omega) {
  const Eigen::Index n = series.n();
  const Eigen::Index p = series.p();
  const double scale = 1.0 / std::sqrt(2.0 * kPi * static_cast<double>(n));
  CVec z = CVec::Zero(p);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double angle = -omega * static_cast<double>(t + 1);
    const cx w(std::cos(angle), std::sin(angle));
    z += w * series.values.row(t).transpose();
  }
  return scale * z;
}

// Z_n evaluated at all n Fourier frequencies w_k = 2 pi k / n, k = 1..n,
// computed once per series via FFT and reused by every smoothed sum.
class FourierGrid {
 public:
  static FourierGrid compute(const MultivariateSeries& series) {
    const int n = static_cast<int>(series.n());
    const int p = static_cast<int>(series.p());
    FourierGrid grid;
    grid.n_ = n;
    grid.z_.resize(p, n);
    Eigen::FFT<double> fft;
    std::vector<cx> in(n), out(n);
    const double scale = 1.0 / std::sqrt(2.0 * kPi * static_cast<double>(n));
    for (int j = 0; j < p; ++j) {
      for (int t = 0; t < n; ++t) in[t] = cx(series.values(t, j), 0.0);
      fft.fwd(out, in);
      // out[k] = sum_{s=0..n-1} x_s exp(-2 pi i k s / n); shifting the time
      // index to t = 1..n multiplies bin k by exp(-i w_k).
      for (int k = 1; k <= n; ++k) {
        const double wk = 2.0 * kPi * k / n;
        const cx shift(std::cos(wk), -std::sin(wk));
        grid.z_(j, k - 1) = scale * shift * out[k % n];
      }
    }
    return grid;
  }

  int n() const { return n_; }
  int p() const { return static_cast<int>(z_.rows()); }
  const CMat& z() const { return z_; }

  // (M/n) sum_k kappa_M(omega - w_k) Z(w_k) Z(w_k)^H.  This exact weighting
  // is shared between the smoothed-periodogram estimator and the de-biased
  // regression sums, which reuse one accumulator per frequency.
  CMat weighted_outer_sum(const KernelSpec& kernel, int m_lag, double omega) const {
    if (m_lag < 1 || 2 * m_lag >= n_)
      throw InvalidBandwidth("weighted_outer_sum: need 1 <= M < n/2");
    Vec w(n_);
    for (int k = 1; k <= n_; ++k)
      w(k - 1) = kernel_fourier(kernel, m_lag, omega - 2.0 * kPi * k / n_, n_).real();
    CMat weighted = z_ * w.asDiagonal();
    CMat a = (static_cast<double>(m_lag) / n_) * (weighted * z_.adjoint());
    return hermitize(a);
  }

 private:
  CMat z_;
  int n_ = 0;
};

// Biased sample autocovariance at a signed lag.
inline Mat sample_autocov(const MultivariateSeries& series, long lag) {
  const Eigen::Index n = series.n();
  if (std::labs(lag) >= n) throw InvalidLag("sample_autocov: |lag| must be < n");
  const long u = std::labs(lag);
  const Eigen::Index len = n - u;
  Mat g = (series.values.bottomRows(len).transpose() * series.values.topRows(len)) /
          static_cast<double>(n);
  if (lag < 0) return g.transpose().eval();
  return g;
}

// Lag-window estimator evaluated on a list of frequencies.
inline SpectralField lag_window_estimate(const MultivariateSeries& series,
                                         const KernelSpec& kernel, int m_lag,
                                         const std::vector<double>& frequencies) {
  const Eigen::Index n = series.n();
  if (m_lag < 1 || m_lag > n - 1)
    throw InvalidBandwidth("lag_window_estimate: need 1 <= M <= n-1");
  const int top = static_cast<int>(std::min<long>(m_lag, n - 1));
  std::vector<Mat> gam(top + 1);
  std::vector<double> k_at(top + 1);
  for (int u = 0; u <= top; ++u) {
    k_at[u] = kernel(static_cast<double>(u) / m_lag);
    gam[u] = k_at[u] != 0.0 || u == 0 ? sample_autocov(series, u) : Mat();
  }
  SpectralField field;
  field.kind = FieldKind::density;
  field.frequencies = frequencies;
  field.matrices.resize(frequencies.size());
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    const double omega = frequencies[i];
    CMat f = gam[0].cast<cx>();
    for (int u = 1; u <= top; ++u) {
      if (k_at[u] == 0.0) continue;
      const double angle = -omega * u;
      const cx w(std::cos(angle), std::sin(angle));
      f += k_at[u] * (w * gam[u].cast<cx>() + std::conj(w) * gam[u].transpose().cast<cx>());
    }
    field.matrices[i] = hermitize(f / (2.0 * kPi));
  }
  return field;
}

// Discrete smoothed periodogram at one frequency.
inline CMat smoothed_periodogram(const MultivariateSeries& series,
                                 const KernelSpec& kernel, int m_lag, double omega) {
  return FourierGrid::compute(series).weighted_outer_sum(kernel, m_lag, omega);
}

// ---------------------------------------------------------------------------
// Adaptive bandwidth rule: find the smallest lag m_hat past which the
// root-mean-square sample autocorrelation a(h) = ||D^{-1/2} Gamma_hat(h)
// D^{-1/2}||_F / p stays below c_thres * sqrt(log10(n)/n) for k_n
// consecutive lags, set M = 2 m_hat, and apply the kernel's
// equivalent-bandwidth correction.  The RMS normalization keeps the null
// level of a(h) at sqrt(1/n) for every dimension p (and reduces to the
// scalar |rho_hat(h)| rule at p = 1), so the threshold calibration does not
// degrade as p grows.  Output clamped to [4, n/4]; if no lag qualifies, the
// clamp value n/4 is returned flagged.
// ---------------------------------------------------------------------------

struct BandwidthSelection {
  int M = 0;
  int m_hat = 0;
  bool clamped = false;  // true when the scan failed and n/4 was returned
};

inline BandwidthSelection bandwidth_select(const MultivariateSeries& series,
                                           int k_n = 5, double c_thres = 1.5,
                                           const KernelSpec& kernel = KernelSpec::bartlett()) {
  const Eigen::Index n = series.n();
  const Eigen::Index p = series.p();
  if (n < 20) throw InvalidInput("bandwidth_select: need n >= 20");
  if (k_n < 1 || c_thres <= 0.0) throw InvalidInput("bandwidth_select: bad tuning");
  if (series.has_degenerate_columns())
    throw DegenerateSpectrum("bandwidth_select: zero-variance column present");

  Vec d = sample_autocov(series, 0).diagonal();
  if ((d.array() <= 0.0).any())
    throw DegenerateSpectrum("bandwidth_select: non-positive variance");
  Vec dinv = d.array().rsqrt();

  const double threshold = c_thres * std::sqrt(std::log10(static_cast<double>(n)) /
                                               static_cast<double>(n));
  const int scan_cap = static_cast<int>(n / 4);
  std::vector<double> cache;
  auto a_of = [&](int h) {
    if (h < static_cast<int>(cache.size())) return cache[h];
    while (static_cast<int>(cache.size()) <= h) {
      int lag = static_cast<int>(cache.size());
      Mat r = dinv.asDiagonal() * sample_autocov(series, lag) * dinv.asDiagonal();
      cache.push_back(r.norm() / static_cast<double>(p));
    }
    return cache[h];
  };

  BandwidthSelection sel;
  const int hi_clamp = std::max(4, scan_cap);
  for (int m = 1; m <= scan_cap && m + k_n <= n - 1; ++m) {
    bool quiet = true;
    for (int h = m; h <= m + k_n; ++h) {
      if (a_of(h) >= threshold) {
        quiet = false;
        break;
      }
    }
    if (quiet) {
      sel.m_hat = m;
      int m_big = static_cast<int>(
          std::ceil(2.0 * m * kernel.politis_bandwidth_factor - 1e-9));
      sel.M = std::clamp(m_big, 4, hi_clamp);
      return sel;
    }
  }
  sel.m_hat = 0;
  sel.M = hi_clamp;
  sel.clamped = true;
  return sel;
}

}  // namespace cohgraph
