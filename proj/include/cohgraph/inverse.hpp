// Regularized inverse spectral density estimation.  A Hermitian p x p matrix
// S is mapped to its real 2p x 2p embedding [[Re S, Im S], [-Im S, Re S]];
// CLIME (column-wise l1 linear programs) or graphical lasso (blockwise
// coordinate descent) runs on the embedding, and the complex estimate is
// recovered as (1, i) B (1, -i)^T / 2.
#pragma once

#include "cohgraph/spectral.hpp"

#include <limits>

namespace cohgraph {

// ---------------------------------------------------------------------------
// Real embedding of a Hermitian matrix and its inverse map.
// ---------------------------------------------------------------------------

inline Mat real_embed(const CMat& s) {
  if (s.rows() != s.cols()) throw InvalidInput("real_embed: matrix not square");
  if (!is_hermitian(s, 1e-8)) throw InvalidInput("real_embed: matrix not Hermitian");
  const Eigen::Index p = s.rows();
  Mat b(2 * p, 2 * p);
  b.topLeftCorner(p, p) = s.real();
  b.topRightCorner(p, p) = s.imag();
  b.bottomLeftCorner(p, p) = -s.imag();
  b.bottomRightCorner(p, p) = s.real();
  return b;
}

// Entry (j,k) = (B[j,k] + B[j+p,k+p])/2 + i (B[j,k+p] - B[j+p,k])/2.
// The map is linear and inverts real_embed exactly.
inline CMat complex_recover(const Mat& b) {
  if (b.rows() != b.cols() || b.rows() % 2 != 0)
    throw InvalidInput("complex_recover: matrix must be square with even size");
  const Eigen::Index p = b.rows() / 2;
  CMat s(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index k = 0; k < p; ++k)
      s(j, k) = cx(0.5 * (b(j, k) + b(j + p, k + p)),
                   0.5 * (b(j, k + p) - b(j + p, k)));
  return s;
}

enum class InverseMethod { clime, glasso };

inline const char* inverse_method_name(InverseMethod m) {
  return m == InverseMethod::clime ? "clime" : "glasso";
}

struct InverseEstimate {
  CMat matrix;                // Hermitian p x p estimate of f^{-1}(omega)
  double lambda = 0.0;
  InverseMethod method = InverseMethod::glasso;
  // CLIME certificate: the constraint violation max_j ||A b_j - e_j||_inf
  // achieved by the column programs (<= lambda + solver tolerance by
  // construction).  The min-magnitude symmetrization that follows does not
  // preserve this bound in general; its gap is kept separately.
  double feasibility_gap = 0.0;
  double symmetrized_gap = 0.0;  // ||A B_sym - I||_max after symmetrization
  bool converged = true;
  int sweeps = 0;             // glasso outer sweeps used
  double duality_gap = 0.0;   // glasso primal-dual gap at termination
};

// ---------------------------------------------------------------------------
// Dense two-phase simplex for the CLIME column programs:
//     min c'x  s.t.  G x <= h,  x >= 0.
// Small and exact; the CLIME columns have 4p variables and 4p rows.
// ---------------------------------------------------------------------------

namespace lp {

struct Solution {
  bool feasible = false;
  Vec x;
  double objective = 0.0;
};

class DenseSimplex {
 public:
  Solution solve(const Mat& g, const Vec& h, const Vec& cost) {
    const int rows = static_cast<int>(g.rows());
    const int nx = static_cast<int>(g.cols());
    // Equality form with one slack per row; rows with negative rhs are
    // negated and receive an artificial variable.
    std::vector<int> art_of_row(rows, -1);
    int n_art = 0;
    for (int r = 0; r < rows; ++r)
      if (h(r) < 0.0) art_of_row[r] = n_art++;
    const int cols = nx + rows + n_art;

    Mat t = Mat::Zero(rows + 1, cols + 1);
    basis_.assign(rows, -1);
    for (int r = 0; r < rows; ++r) {
      const double sign = h(r) < 0.0 ? -1.0 : 1.0;
      t.block(r, 0, 1, nx) = sign * g.row(r);
      t(r, nx + r) = sign;  // slack
      t(r, cols) = sign * h(r);
      if (art_of_row[r] >= 0) {
        t(r, nx + rows + art_of_row[r]) = 1.0;
        basis_[r] = nx + rows + art_of_row[r];
      } else {
        basis_[r] = nx + r;
      }
    }

    // Phase 1: minimize the artificial sum.
    if (n_art > 0) {
      for (int r = 0; r < rows; ++r)
        if (art_of_row[r] >= 0) t.row(rows) -= t.row(r);
      if (!iterate(t, rows, cols, nx + rows)) return {};
      if (t(rows, cols) < -kTol * 10.0) return {};  // infeasible
      // Pivot lingering artificials out of the basis where possible.
      for (int r = 0; r < rows; ++r) {
        if (basis_[r] < nx + rows) continue;
        int pivot_col = -1;
        for (int jc = 0; jc < nx + rows; ++jc)
          if (std::abs(t(r, jc)) > kTol) { pivot_col = jc; break; }
        if (pivot_col >= 0) pivot(t, r, pivot_col, rows, cols);
      }
    }

    // Phase 2: restore the true objective, reduced through the basis.
    t.row(rows).setZero();
    t.block(rows, 0, 1, nx) = cost.transpose();
    for (int r = 0; r < rows; ++r) {
      if (basis_[r] < nx && std::abs(cost(basis_[r])) > 0.0)
        t.row(rows) -= cost(basis_[r]) * t.row(r);
    }
    if (!iterate(t, rows, cols, nx + rows)) return {};

    Solution sol;
    sol.feasible = true;
    sol.x = Vec::Zero(nx);
    for (int r = 0; r < rows; ++r)
      if (basis_[r] < nx) sol.x(basis_[r]) = t(r, cols);
    sol.objective = cost.dot(sol.x);
    return sol;
  }

 private:
  static constexpr double kTol = 1e-9;
  std::vector<int> basis_;

  void pivot(Mat& t, int row, int col, int rows, int cols) {
    t.row(row) /= t(row, col);
    for (int r = 0; r <= rows; ++r) {
      if (r == row) continue;
      const double factor = t(r, col);
      if (factor != 0.0) t.row(r) -= factor * t.row(row);
    }
    basis_[row] = col;
  }

  // Dantzig pricing with a Bland fallback against cycling.  allowed_cols
  // excludes artificial columns during phase 2.
  bool iterate(Mat& t, int rows, int cols, int allowed_cols) {
    const long cap = 200L * (rows + cols);
    long bland_after = 20L * (rows + cols);
    for (long it = 0; it < cap; ++it) {
      int enter = -1;
      if (it < bland_after) {
        double best = -kTol;
        for (int jc = 0; jc < allowed_cols; ++jc)
          if (t(rows, jc) < best) { best = t(rows, jc); enter = jc; }
      } else {
        for (int jc = 0; jc < allowed_cols; ++jc)
          if (t(rows, jc) < -kTol) { enter = jc; break; }
      }
      if (enter < 0) return true;  // optimal
      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int r = 0; r < rows; ++r) {
        if (t(r, enter) > kTol) {
          const double ratio = t(r, cols) / t(r, enter);
          if (ratio < best_ratio - kTol ||
              (ratio < best_ratio + kTol && (leave < 0 || basis_[r] < basis_[leave]))) {
            best_ratio = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return false;  // unbounded
      pivot(t, leave, enter, rows, cols);
    }
    return false;
  }
};

}  // namespace lp

// ---------------------------------------------------------------------------
// CLIME: per column j of the identity, min ||b||_1 s.t. ||A b - e_j||_inf
// <= lambda, then the min-magnitude symmetrization between B and B'.
// ---------------------------------------------------------------------------

inline InverseEstimate clime_solve(const CMat& s, double lambda) {
  if (lambda <= 0.0) throw InvalidInput("clime_solve: lambda must be positive");
  const Mat a = real_embed(s);
  const int d = static_cast<int>(a.rows());

  // min 1'(b+ + b-)  s.t.  A(b+ - b-) <= e_j + lambda,
  //                       -A(b+ - b-) <= lambda - e_j,  b+-, b- >= 0.
  Mat g(2 * d, 2 * d);
  g.topLeftCorner(d, d) = a;
  g.topRightCorner(d, d) = -a;
  g.bottomLeftCorner(d, d) = -a;
  g.bottomRightCorner(d, d) = a;
  const Vec cost = Vec::Ones(2 * d);

  Mat b(d, d);
  double certificate = 0.0;
  for (int j = 0; j < d; ++j) {
    Vec h(2 * d);
    h.setConstant(lambda);
    h(j) += 1.0;
    h(d + j) -= 1.0;
    lp::DenseSimplex simplex;
    lp::Solution sol = simplex.solve(g, h, cost);
    if (!sol.feasible)
      throw InfeasiblePenalty("clime_solve: column program infeasible at this lambda");
    b.col(j) = sol.x.head(d) - sol.x.tail(d);
    certificate = std::max(
        certificate, (a * b.col(j) - Vec::Unit(d, j)).cwiseAbs().maxCoeff());
  }

  // Keep, entrywise, the smaller-magnitude of B and B^T.
  Mat b_sym(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      b_sym(i, j) = std::abs(b(i, j)) <= std::abs(b(j, i)) ? b(i, j) : b(j, i);

  InverseEstimate est;
  est.method = InverseMethod::clime;
  est.lambda = lambda;
  est.matrix = complex_recover(b_sym);
  est.feasibility_gap = certificate;
  est.symmetrized_gap =
      max_abs(Mat(a * real_embed(est.matrix) - Mat::Identity(d, d)));
  return est;
}

// ---------------------------------------------------------------------------
// Graphical lasso on the embedding: maximize log det B - tr(S B) -
// lambda ||B||_{1,off} by blockwise coordinate descent on the covariance
// iterate W.  The diagonal is unpenalized, so W_jj = S_jj throughout.
// ---------------------------------------------------------------------------

namespace detail {

// Eigenvalue clipping at 1e-8 * max eigenvalue keeps the glasso input
// positive definite when a smoothed periodogram is numerically indefinite.
inline CMat project_psd(const CMat& s) {
  Eigen::SelfAdjointEigenSolver<CMat> eig(hermitize(s));
  Vec ev = eig.eigenvalues();
  const double floor_value = 1e-8 * std::max(ev.maxCoeff(), 0.0);
  bool needs_fix = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) < floor_value) { ev(i) = std::max(floor_value, 1e-300); needs_fix = true; }
  if (!needs_fix) return hermitize(s);
  return hermitize(eig.eigenvectors() * ev.asDiagonal().toDenseMatrix().cast<cx>() *
                   eig.eigenvectors().adjoint());
}

}  // namespace detail

struct GlassoOptions {
  int max_sweeps = 500;
  double tol = 1e-7;       // mean |delta W_off| relative to mean |S_off|
  double inner_tol = 1e-10;
  int inner_max_sweeps = 2000;
  // Receives (sweep, primal objective) after every outer sweep when set.
  const std::function<void(int, double)>* monitor = nullptr;
};

inline InverseEstimate glasso_solve(const CMat& s_raw, double lambda,
                                    const GlassoOptions& opts = GlassoOptions()) {
  if (lambda <= 0.0) throw InvalidInput("glasso_solve: lambda must be positive");
  {
    Eigen::SelfAdjointEigenSolver<CMat> probe(hermitize(s_raw));
    const double scale = std::max(1.0, probe.eigenvalues().cwiseAbs().maxCoeff());
    if (probe.eigenvalues().minCoeff() < -1e-8 * scale)
      throw InvalidInput("glasso_solve: input is not positive semi-definite");
  }
  const CMat s_c = detail::project_psd(s_raw);
  const Mat s = real_embed(s_c);
  const int d = static_cast<int>(s.rows());

  Mat w = s;
  std::vector<Vec> betas(d, Vec::Zero(d - 1));
  double off_scale = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) off_scale += std::abs(s(i, j));
  off_scale = std::max(off_scale / std::max(1, d * (d - 1)), 1e-12);

  auto gather = [&](int j, Mat& w11, Vec& s12) {
    int r = 0;
    for (int i = 0; i < d; ++i) {
      if (i == j) continue;
      s12(r) = s(i, j);
      int cidx = 0;
      for (int k = 0; k < d; ++k) {
        if (k == j) continue;
        w11(r, cidx++) = w(i, k);
      }
      ++r;
    }
  };

  // Precision recovery from the current (W, beta) pairs; used for the final
  // estimate and for the per-sweep primal monitor.
  auto recover_theta = [&]() {
    Mat theta = Mat::Zero(d, d);
    for (int j = 0; j < d; ++j) {
      Vec w12(d - 1);
      int r = 0;
      for (int i = 0; i < d; ++i)
        if (i != j) w12(r++) = w(i, j);
      const double denom = w(j, j) - w12.dot(betas[j]);
      if (denom <= 0.0)
        throw DegenerateInverse("glasso_solve: non-positive conditional variance");
      theta(j, j) = 1.0 / denom;
      r = 0;
      for (int i = 0; i < d; ++i) {
        if (i == j) continue;
        theta(i, j) = -betas[j](r++) * theta(j, j);
      }
    }
    Mat theta_sym = 0.5 * (theta + theta.transpose());
    // Soft-thresholding produces exact zeros; keep them exact after
    // averaging.
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j && theta(i, j) == 0.0 && theta(j, i) == 0.0) theta_sym(i, j) = 0.0;
    return theta_sym;
  };
  auto primal_objective = [&](const Mat& theta) {
    Eigen::LLT<Mat> llt(theta);
    if (llt.info() != Eigen::Success)
      return std::numeric_limits<double>::infinity();
    const double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    double l1_off = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j) l1_off += std::abs(theta(i, j));
    return -logdet + (s.array() * theta.array()).sum() + lambda * l1_off;
  };

  int sweep = 0;
  bool converged = false;
  Mat w11(d - 1, d - 1);
  Vec s12(d - 1);
  for (; sweep < opts.max_sweeps; ++sweep) {
    double total_change = 0.0;
    for (int j = 0; j < d; ++j) {
      gather(j, w11, s12);
      Vec beta = betas[j];
      // min 1/2 b' W11 b - s12' b + lambda ||b||_1
      Vec wb = w11 * beta;
      for (int inner = 0; inner < opts.inner_max_sweeps; ++inner) {
        double change = 0.0;
        for (int k = 0; k < d - 1; ++k) {
          const double old = beta(k);
          const double z = s12(k) - wb(k) + w11(k, k) * old;
          double fresh = 0.0;
          if (w11(k, k) > 1e-300)
            fresh = detail::soft_threshold(z, lambda) / w11(k, k);
          if (fresh != old) {
            wb += w11.col(k) * (fresh - old);
            beta(k) = fresh;
            change = std::max(change, std::abs(fresh - old));
          }
        }
        if (change < opts.inner_tol * std::max(1.0, off_scale)) break;
      }
      betas[j] = beta;
      Vec w12 = w11 * beta;
      int r = 0;
      for (int i = 0; i < d; ++i) {
        if (i == j) continue;
        total_change += std::abs(w(i, j) - w12(r));
        w(i, j) = w12(r);
        w(j, i) = w12(r);
        ++r;
      }
    }
    if (opts.monitor) (*opts.monitor)(sweep, primal_objective(recover_theta()));
    if (total_change / std::max(1, d * (d - 1)) < opts.tol * off_scale) {
      converged = true;
      ++sweep;
      break;
    }
  }

  Mat theta_sym = recover_theta();

  InverseEstimate est;
  est.method = InverseMethod::glasso;
  est.lambda = lambda;
  est.matrix = complex_recover(theta_sym);
  est.converged = converged;
  est.sweeps = sweep;
  est.feasibility_gap = max_abs(Mat(s * theta_sym - Mat::Identity(d, d)));

  // Primal-dual gap: W clamped to the dual-feasible box is a certificate.
  {
    Mat w_dual = w;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j)
          w_dual(i, j) = std::clamp(w_dual(i, j), s(i, j) - lambda, s(i, j) + lambda);
    w_dual = 0.5 * (w_dual + w_dual.transpose());
    Eigen::LLT<Mat> llt_t(theta_sym), llt_w(w_dual);
    if (llt_t.info() == Eigen::Success && llt_w.info() == Eigen::Success) {
      auto logdet = [](const Eigen::LLT<Mat>& llt) {
        return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      };
      double l1_off = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          if (i != j) l1_off += std::abs(theta_sym(i, j));
      const double primal = -logdet(llt_t) + (s.array() * theta_sym.array()).sum() +
                            lambda * l1_off;
      const double dual = logdet(llt_w) + d;
      est.duality_gap = primal - dual;
    } else {
      est.duality_gap = std::numeric_limits<double>::infinity();
    }
  }

  if (!converged)
    throw ConvergenceFailure("glasso_solve: no convergence within sweep budget",
                             est.matrix);
  return est;
}

inline InverseEstimate solve_inverse(const CMat& s, double lambda, InverseMethod method,
                                     const GlassoOptions& opts = GlassoOptions()) {
  return method == InverseMethod::clime ? clime_solve(s, lambda)
                                        : glasso_solve(s, lambda, opts);
}

// ---------------------------------------------------------------------------
// BIC penalty selection, frequency by frequency:
//   -log det B + tr(S B) + k (log(n_eff)/n_eff) log(log(max(p, 3)))
// with k the nonzero off-diagonal count of the recovered complex upper
// triangle (counting on the embedding would double every entry).
// ---------------------------------------------------------------------------

struct LambdaSelection {
  std::vector<double> lambda;             // chosen penalty per frequency
  std::vector<InverseEstimate> estimates; // fit at the chosen penalty
  std::vector<std::vector<int>> nnz_path; // per frequency, along the grid
  std::vector<Vec> grids;                 // the lambda grid used per frequency
};

namespace detail {

inline int upper_nonzeros(const CMat& b) {
  int k = 0;
  for (Eigen::Index u = 0; u < b.rows(); ++u)
    for (Eigen::Index v = u + 1; v < b.cols(); ++v)
      if (std::abs(b(u, v)) > 0.0) ++k;
  return k;
}

inline double complex_logdet_hpd(const CMat& b) {
  Eigen::LLT<CMat> llt(hermitize(b));
  if (llt.info() != Eigen::Success)
    return -std::numeric_limits<double>::infinity();
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
}

}  // namespace detail

inline LambdaSelection select_lambda_bic(const SpectralField& field, int n_eff,
                                         InverseMethod method,
                                         int grid_size = 30, int workers = 0) {
  if (field.size() == 0) throw InvalidInput("select_lambda_bic: empty field");
  if (n_eff < 2) throw InvalidInput("select_lambda_bic: n_eff too small");

  LambdaSelection sel;
  sel.lambda.resize(field.size());
  sel.estimates.resize(field.size());
  sel.nnz_path.resize(field.size());
  sel.grids.resize(field.size());

  parallel_for(field.size(), workers, [&](std::size_t i) {
    const CMat& s = field.matrices[i];
    const Eigen::Index p = s.rows();
    const double c_n = std::log(std::log(static_cast<double>(std::max<Eigen::Index>(p, 3))));
    const double bic_unit = std::log(static_cast<double>(n_eff)) / n_eff;

    const Mat embedded = real_embed(s);
    double lambda_max = 0.0;
    for (Eigen::Index r = 0; r < embedded.rows(); ++r)
      for (Eigen::Index c = 0; c < embedded.cols(); ++c)
        if (r != c) lambda_max = std::max(lambda_max, std::abs(embedded(r, c)));

    Vec grid(grid_size);
    if (lambda_max <= 0.0) {
      grid.setConstant(1e-12);  // diagonal input: every penalty is equivalent
    } else {
      for (int g = 0; g < grid_size; ++g)
        grid(g) = lambda_max * std::pow(1e-2, static_cast<double>(g) / (grid_size - 1));
    }
    sel.grids[i] = grid;

    double best_bic = std::numeric_limits<double>::infinity();
    int best_g = -1;
    InverseEstimate best;
    for (int g = 0; g < grid_size; ++g) {
      const double lambda = std::max(grid(g), 1e-12);
      InverseEstimate est;
      try {
        est = solve_inverse(s, lambda, method);
      } catch (const Error&) {
        sel.nnz_path[i].push_back(-1);
        continue;
      }
      const int k = detail::upper_nonzeros(est.matrix);
      sel.nnz_path[i].push_back(k);
      const double logdet = detail::complex_logdet_hpd(est.matrix);
      if (!std::isfinite(logdet)) continue;
      const double fit = (s * est.matrix).trace().real();
      const double bic = -logdet + fit + k * bic_unit * c_n;
      if (bic < best_bic) {  // ties keep the earlier (larger) lambda
        best_bic = bic;
        best_g = g;
        best = est;
      }
    }
    if (best_g < 0)
      throw DegenerateInverse("select_lambda_bic: no penalty produced a usable fit");
    sel.lambda[i] = best.lambda;
    sel.estimates[i] = std::move(best);
  });
  return sel;
}

// Off-diagonal entries with modulus <= lambda (boundary inclusive) are set
// to exactly zero; the diagonal is untouched.
inline InverseEstimate threshold_inverse(const InverseEstimate& est, double lambda) {
  InverseEstimate out = est;
  if (lambda <= 0.0) return out;
  for (Eigen::Index u = 0; u < out.matrix.rows(); ++u)
    for (Eigen::Index v = 0; v < out.matrix.cols(); ++v)
      if (u != v && std::abs(out.matrix(u, v)) <= lambda) out.matrix(u, v) = cx(0.0, 0.0);
  return out;
}

}  // namespace cohgraph
