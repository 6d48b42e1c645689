// Lag-window kernels and their discrete Fourier transform kappa_M.
#pragma once

#include "cohgraph/common.hpp"

#include <functional>

namespace cohgraph {

enum class KernelFamily { bartlett_modified, uniform, user_defined };

inline const char* kernel_family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::bartlett_modified: return "bartlett_modified";
    case KernelFamily::uniform: return "uniform";
    default: return "user_defined";
  }
}

// K must be even, compactly supported on [-1, 1] and satisfy K(0) = 1.
// c_k2 is the squared integral of K over its support; fourier_decay_order is
// the polynomial decay exponent r of the kernel's Fourier coefficients.
// politis_bandwidth_factor converts the truncation lag of the adaptive
// bandwidth rule into this kernel's equivalent truncation lag, equating
// spectral-window bandwidths: the Bartlett window has bandwidth 1.5/M
// against 0.5/M for the truncated window, so its lag is scaled by 3; the
// uniform kernel needs no correction.
struct KernelSpec {
  KernelFamily family = KernelFamily::bartlett_modified;
  std::function<double(double)> evaluate;
  double c_k2 = 2.0 / 3.0;
  double fourier_decay_order = 2.0;
  double politis_bandwidth_factor = 1.5;

  double operator()(double u) const {
    if (std::abs(u) > 1.0) return 0.0;
    return evaluate(u);
  }

  static KernelSpec bartlett() {
    KernelSpec k;
    k.family = KernelFamily::bartlett_modified;
    k.evaluate = [](double u) { return std::abs(u) <= 1.0 ? 1.0 - std::abs(u) : 0.0; };
    k.c_k2 = 2.0 / 3.0;
    k.fourier_decay_order = 2.0;
    k.politis_bandwidth_factor = 3.0;
    return k;
  }

  // The uniform kernel violates the c_k2 < 1 side condition of the theory
  // (c_k2 = 2) but is still usable; r = 16 is a practical stand-in for its
  // effectively unbounded Fourier decay order.
  static KernelSpec uniform() {
    KernelSpec k;
    k.family = KernelFamily::uniform;
    k.evaluate = [](double u) { return std::abs(u) <= 1.0 ? 1.0 : 0.0; };
    k.c_k2 = 2.0;
    k.fourier_decay_order = 16.0;
    k.politis_bandwidth_factor = 1.0;
    return k;
  }

  static KernelSpec user(std::function<double(double)> evaluate, double c_k2,
                         double fourier_decay_order, double bandwidth_factor = 1.0) {
    KernelSpec k;
    k.family = KernelFamily::user_defined;
    k.evaluate = std::move(evaluate);
    k.c_k2 = c_k2;
    k.fourier_decay_order = fourier_decay_order;
    k.politis_bandwidth_factor = bandwidth_factor;
    k.validate();
    return k;
  }

  void validate() const {
    if (!evaluate) throw InvalidInput("KernelSpec: missing evaluator");
    if (std::abs(evaluate(0.0) - 1.0) > 1e-12)
      throw InvalidInput("KernelSpec: K(0) must equal 1");
    for (double u : {0.1, 0.25, 0.5, 0.75, 0.99}) {
      if (std::abs(evaluate(u) - evaluate(-u)) > 1e-12)
        throw InvalidInput("KernelSpec: K must be even");
    }
    if (c_k2 <= 0.0) throw InvalidInput("KernelSpec: c_k2 must be positive");
    if (fourier_decay_order <= 0.0)
      throw InvalidInput("KernelSpec: fourier_decay_order must be positive");
  }
};

// kappa_M(omega) = 1/M sum_{|u| < n} K(u/M) exp(-i u omega).  For an even
// real kernel the sum collapses to a cosine series, so the imaginary part is
// exactly zero here.
inline cx kernel_fourier(const KernelSpec& kernel, int m_lag, double omega, int n) {
  if (m_lag < 1) throw InvalidBandwidth("kernel_fourier: M must be positive");
  if (m_lag >= n) throw InvalidBandwidth("kernel_fourier: M must be smaller than n");
  const int top = std::min(m_lag, n - 1);
  double sum = kernel(0.0);
  for (int u = 1; u <= top; ++u) {
    double k = kernel(static_cast<double>(u) / m_lag);
    if (k != 0.0) sum += 2.0 * k * std::cos(u * omega);
  }
  return cx(sum / m_lag, 0.0);
}

}  // namespace cohgraph
