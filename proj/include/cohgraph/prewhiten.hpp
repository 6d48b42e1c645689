// Sparse VAR prewhitening: row-wise adaptive-lasso fit with BIC penalty
// selection, time-domain filtering, and frequency-domain recoloring through
// the filter transfer function.
#pragma once

#include "cohgraph/series.hpp"
#include "cohgraph/spectral.hpp"

namespace cohgraph {

struct VarModel {
  int order = 0;                       // m
  std::vector<Mat> coefficients;       // Phi_1 .. Phi_m, each p x p
  Vec row_bic;                         // selected BIC value per row
  Vec row_lambda;                      // selected penalty per row
  std::vector<int> failed_rows;        // rows zeroed after a singular design
  int nonzero_count = 0;
  double companion_spectral_radius = 0.0;
  bool stable = true;                  // radius < 1; violation is a warning only

  int p() const {
    return coefficients.empty() ? p_hint : static_cast<int>(coefficients[0].rows());
  }
  bool is_identity() const { return order == 0; }

  static VarModel identity(int p) {
    VarModel m;
    m.order = 0;
    m.p_hint = p;
    m.row_bic = Vec::Zero(p);
    m.row_lambda = Vec::Zero(p);
    return m;
  }

  int p_hint = 0;
};

namespace detail {

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Weighted-lasso coordinate descent on the Gram form
//   min 1/2 b' G b - c' b + lambda sum_j w_j |b_j|.
// The objective decreases at every sweep; an optional monitor receives the
// per-sweep objective so tests can assert the monotone decrease.
inline Vec lasso_coordinate_descent(const Mat& gram, const Vec& c, const Vec& w,
                                    double lambda, Vec beta,
                                    const std::function<void(int, double)>* monitor = nullptr,
                                    double tol = 1e-8, int max_sweeps = 1000) {
  const Eigen::Index d = c.size();
  Vec gb = gram * beta;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double gjj = gram(j, j);
      const double old = beta(j);
      double fresh = 0.0;
      if (gjj > 1e-300) {
        const double z = c(j) - gb(j) + gjj * old;
        fresh = soft_threshold(z, lambda * w(j)) / gjj;
      }
      if (fresh != old) {
        gb += gram.col(j) * (fresh - old);
        beta(j) = fresh;
        max_change = std::max(max_change, std::abs(fresh - old));
      }
    }
    if (monitor) {
      double obj = 0.5 * beta.dot(gb) - c.dot(beta) +
                   lambda * (w.array() * beta.array().abs()).sum();
      (*monitor)(sweep, obj);
    }
    if (max_change < tol) break;
  }
  return beta;
}

inline double companion_spectral_radius(const std::vector<Mat>& phi) {
  if (phi.empty()) return 0.0;
  const int p = static_cast<int>(phi[0].rows());
  const int m = static_cast<int>(phi.size());
  Mat comp = Mat::Zero(p * m, p * m);
  for (int j = 0; j < m; ++j) comp.block(0, j * p, p, p) = phi[j];
  if (m > 1) comp.block(p, 0, p * (m - 1), p * (m - 1)).setIdentity();
  Eigen::EigenSolver<Mat> eig(comp, /*computeEigenvectors=*/false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

// Row-wise adaptive lasso fit of a VAR(m).  Each row regression selects its
// own penalty from a 50-point log-spaced path by the dimension-adjusted BIC
//   log(RSS/n_eff) + k (log(n_eff)/n_eff) log(p).
// Adaptive weights come from a small ridge pilot fit.
inline VarModel fit_sparse_var(const MultivariateSeries& series, int order) {
  const Eigen::Index n = series.n();
  const Eigen::Index p = series.p();
  if (order < 0) throw InvalidOrder("fit_sparse_var: negative order");
  if (order == 0) return VarModel::identity(static_cast<int>(p));
  if (10L * order >= n) throw InvalidOrder("fit_sparse_var: need n > 10 m");

  const Eigen::Index n_eff = n - order;
  const Eigen::Index dim = static_cast<Eigen::Index>(order) * p;
  Mat design(n_eff, dim);
  for (Eigen::Index t = 0; t < n_eff; ++t)
    for (int j = 1; j <= order; ++j)
      design.block(t, (j - 1) * p, 1, p) = series.values.row(t + order - j);
  Mat response = series.values.bottomRows(n_eff);

  const Mat gram = design.transpose() * design / static_cast<double>(n_eff);
  const Mat cross = design.transpose() * response / static_cast<double>(n_eff);
  const double ridge = 1e-3 * gram.trace() / static_cast<double>(p);

  VarModel model;
  model.order = order;
  model.coefficients.assign(order, Mat::Zero(p, p));
  model.row_bic = Vec::Zero(p);
  model.row_lambda = Vec::Zero(p);
  const double c_n = std::log(static_cast<double>(p));
  const double bic_unit = std::log(static_cast<double>(n_eff)) / static_cast<double>(n_eff);

  for (Eigen::Index i = 0; i < p; ++i) {
    const Vec c = cross.col(i);
    const double y_sq = response.col(i).squaredNorm();
    if (gram.trace() <= 0.0 || ridge <= 0.0) {
      model.failed_rows.push_back(static_cast<int>(i));
      continue;
    }
    Vec pilot = (gram + ridge * Mat::Identity(dim, dim)).ldlt().solve(c);
    Vec w = (pilot.array().abs() + 1e-6).inverse();

    double lambda_max = 0.0;
    for (Eigen::Index j = 0; j < dim; ++j)
      lambda_max = std::max(lambda_max, std::abs(c(j)) / w(j));
    if (lambda_max <= 0.0) {
      model.row_bic(i) = std::log(std::max(y_sq / n_eff, 1e-300));
      continue;  // exactly zero response: empty row is optimal
    }

    constexpr int kGridSize = 50;
    Vec beta = Vec::Zero(dim), best_beta = Vec::Zero(dim);
    double best_bic = std::numeric_limits<double>::infinity();
    double best_lambda = lambda_max;
    for (int g = 0; g < kGridSize; ++g) {
      const double frac = static_cast<double>(g) / (kGridSize - 1);
      const double lambda = lambda_max * std::pow(1e-3, frac);
      beta = detail::lasso_coordinate_descent(gram, c, w, lambda, beta);
      const int k = static_cast<int>((beta.array() != 0.0).count());
      double rss = y_sq - 2.0 * n_eff * c.dot(beta) + n_eff * beta.dot(gram * beta);
      rss = std::max(rss, 0.0);
      const double bic = std::log(std::max(rss / n_eff, 1e-300)) + k * bic_unit * c_n;
      if (bic < best_bic) {
        best_bic = bic;
        best_beta = beta;
        best_lambda = lambda;
      }
    }
    model.row_bic(i) = best_bic;
    model.row_lambda(i) = best_lambda;
    for (int j = 0; j < order; ++j)
      model.coefficients[j].row(i) = best_beta.segment(j * p, p).transpose();
  }

  for (const Mat& phi : model.coefficients)
    model.nonzero_count += static_cast<int>((phi.array() != 0.0).count());
  model.companion_spectral_radius = detail::companion_spectral_radius(model.coefficients);
  model.stable = model.companion_spectral_radius < 1.0;
  return model;
}

// Y_t = X_t - sum_j Phi_j X_{t-j}; the output has n - m rows, row t
// corresponding to original time t + m.  No re-centering happens here.
inline MultivariateSeries apply_filter(const MultivariateSeries& series,
                                       const VarModel& model) {
  const Eigen::Index n = series.n();
  const int m = model.order;
  if (n <= m) throw InvalidInput("apply_filter: series shorter than filter order");
  MultivariateSeries out;
  out.sampling_rate = series.sampling_rate;
  if (m == 0) {
    out.values = series.values;
    out.degenerate_columns = series.degenerate_columns;
    return out;
  }
  out.values = series.values.bottomRows(n - m);
  for (int j = 1; j <= m; ++j)
    out.values -= series.values.middleRows(m - j, n - m) *
                  model.coefficients[j - 1].transpose();
  return out;
}

// Phi(omega) = I - sum_j Phi_j exp(-i omega j).
inline CMat transfer_function(const VarModel& model, double omega) {
  const int p = model.p();
  CMat phi = CMat::Identity(p, p);
  for (int j = 1; j <= model.order; ++j) {
    const double angle = -omega * j;
    phi -= cx(std::cos(angle), std::sin(angle)) * model.coefficients[j - 1].cast<cx>();
  }
  return phi;
}

// Phi(omega)^{-1} S Phi(omega)^{-H}: maps a spectral quantity of the
// whitened series back to the original scale.
inline CMat recolor_spectrum(const VarModel& model, const CMat& whitened_sum,
                             double omega) {
  if (model.is_identity()) return whitened_sum;
  CMat phi = transfer_function(model, omega);
  Eigen::JacobiSVD<CMat> svd(phi);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (smin <= 0.0 || smax / smin >= 1e12)
    throw SingularTransfer("recolor_spectrum: transfer function near-singular");
  Eigen::PartialPivLU<CMat> lu(phi);
  CMat half = lu.solve(whitened_sum);
  return lu.solve(half.adjoint()).adjoint();
}

}  // namespace cohgraph
