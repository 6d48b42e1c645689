#include "catch_amalgamated.hpp"
#include "support/oracles.hpp"

#include <random>

using namespace cohgraph;
using Catch::Approx;

namespace {

MultivariateSeries simulate_var1(const Mat& phi, int n, std::uint64_t seed,
                                 double noise = 1.0) {
  const int p = static_cast<int>(phi.rows());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat x(n, p);
  Vec state = Vec::Zero(p);
  for (int t = -100; t < n; ++t) {
    Vec eps(p);
    for (int i = 0; i < p; ++i) eps(i) = noise * gauss(rng);
    state = phi * state + eps;
    if (t >= 0) x.row(t) = state.transpose();
  }
  return center_series(x);
}

}  // namespace

TEST_CASE("fit_sparse_var recovers a diagonal VAR(1)") {
  const int p = 10;
  Mat phi = 0.5 * Mat::Identity(p, p);
  int good = 0;
  for (int r = 0; r < 50; ++r) {
    MultivariateSeries s = simulate_var1(phi, 4096, 500 + r);
    VarModel model = fit_sparse_var(s, 1);
    const Mat& est = model.coefficients[0];
    double diag_mass = est.diagonal().cwiseAbs().sum();
    double total_mass = est.cwiseAbs().sum();
    if (total_mass > 0.0 && diag_mass / total_mass >= 0.9) ++good;
  }
  REQUIRE(good >= 45);
}

TEST_CASE("fit_sparse_var selects near-empty models on white noise") {
  const int p = 10, m = 4;
  int sparse_enough = 0;
  for (int r = 0; r < 30; ++r) {
    Mat x = oracles::random_matrix(4096, p, 900 + r);
    VarModel model = fit_sparse_var(center_series(x), m);
    if (model.nonzero_count <= static_cast<int>(0.05 * p * p * m)) ++sparse_enough;
  }
  REQUIRE(sparse_enough >= 27);
}

TEST_CASE("fit_sparse_var edge cases") {
  Mat x = oracles::random_matrix(64, 3, 17);
  MultivariateSeries s = center_series(x);
  VarModel identity = fit_sparse_var(s, 0);
  REQUIRE(identity.is_identity());
  REQUIRE(identity.coefficients.empty());
  REQUIRE_THROWS_AS(fit_sparse_var(s, 7), InvalidOrder);  // 10m >= n
}

TEST_CASE("lasso coordinate descent decreases its objective monotonically") {
  Mat x = oracles::random_matrix(200, 8, 21);
  Mat gram = x.transpose() * x / 200.0;
  Vec truth = Vec::Zero(8);
  truth(1) = 1.0;
  truth(4) = -0.5;
  Vec c = gram * truth;
  Vec w = Vec::Ones(8);
  std::vector<double> objectives;
  std::function<void(int, double)> monitor = [&](int, double obj) {
    objectives.push_back(obj);
  };
  detail::lasso_coordinate_descent(gram, c, w, 0.05, Vec::Zero(8), &monitor);
  REQUIRE(objectives.size() >= 2);
  for (std::size_t i = 1; i < objectives.size(); ++i)
    REQUIRE(objectives[i] <= objectives[i - 1] + 1e-12);
}

TEST_CASE("apply_filter implements the lagged difference") {
  Mat x = oracles::random_matrix(40, 2, 9);
  MultivariateSeries s = center_series(x);
  VarModel id = VarModel::identity(2);
  MultivariateSeries same = apply_filter(s, id);
  REQUIRE(max_abs(Mat(same.values - s.values)) == 0.0);

  // Exact VAR(1) with zero innovations filters to zero.
  Mat phi(2, 2);
  phi << 0.5, 0.2, 0.0, 0.4;
  Mat exact(30, 2);
  exact.row(0) << 1.0, -2.0;
  for (int t = 1; t < 30; ++t)
    exact.row(t) = (phi * exact.row(t - 1).transpose()).transpose();
  VarModel known;
  known.order = 1;
  known.coefficients = {phi};
  MultivariateSeries se;
  se.values = exact;
  MultivariateSeries filtered = apply_filter(se, known);
  REQUIRE(filtered.n() == 29);
  REQUIRE(max_abs(filtered.values) < 1e-12);

  // Scalar order-2 case checked by hand: Y_3 = X_3 - 0.5 X_2 - 0.25 X_1.
  Mat xs(5, 1);
  xs << 1.0, 2.0, -1.0, 0.5, 3.0;
  VarModel scalar;
  scalar.order = 2;
  scalar.coefficients = {0.5 * Mat::Identity(1, 1), 0.25 * Mat::Identity(1, 1)};
  MultivariateSeries sx;
  sx.values = xs;
  MultivariateSeries y = apply_filter(sx, scalar);
  REQUIRE(y.n() == 3);
  REQUIRE(y.values(0, 0) == Approx(-1.0 - 0.5 * 2.0 - 0.25 * 1.0).epsilon(1e-14));
  REQUIRE_THROWS_AS(apply_filter(MultivariateSeries{Mat::Zero(2, 1)}, scalar),
                    InvalidInput);
}

TEST_CASE("transfer_function values") {
  VarModel id = VarModel::identity(3);
  REQUIRE(max_abs(CMat(transfer_function(id, 0.7) - CMat::Identity(3, 3))) == 0.0);

  VarModel scalar;
  scalar.order = 1;
  scalar.coefficients = {0.5 * Mat::Identity(1, 1)};
  REQUIRE(transfer_function(scalar, 0.0)(0, 0).real() == Approx(0.5).epsilon(1e-14));
  REQUIRE(transfer_function(scalar, kPi)(0, 0).real() == Approx(1.5).epsilon(1e-14));
}

TEST_CASE("recolor_spectrum undoes the filter scale") {
  VarModel id = VarModel::identity(2);
  CMat input = oracles::random_hpd(2, 3);
  REQUIRE(max_abs(CMat(recolor_spectrum(id, input, 0.4) - input)) == 0.0);

  VarModel scalar;
  scalar.order = 1;
  scalar.coefficients = {0.5 * Mat::Identity(1, 1)};
  CMat one = CMat::Identity(1, 1);
  REQUIRE(recolor_spectrum(scalar, one, 0.0)(0, 0).real() ==
          Approx(4.0).epsilon(1e-12));

  VarModel vec;
  vec.order = 1;
  Mat phi(3, 3);
  phi << 0.4, 0.1, 0.0, -0.2, 0.3, 0.05, 0.0, 0.0, 0.5;
  vec.coefficients = {phi};
  CMat h = oracles::random_hpd(3, 5);
  CMat recolored = recolor_spectrum(vec, h, 1.1);
  REQUIRE(hermitian_defect(recolored) <= 1e-10 * max_abs(recolored));

  VarModel singular;
  singular.order = 1;
  singular.coefficients = {Mat::Identity(1, 1)};  // Phi(0) = 0
  REQUIRE_THROWS_AS(recolor_spectrum(singular, one, 0.0), SingularTransfer);
}

TEST_CASE("whiten-then-recolor reproduces the direct smoothed periodogram") {
  // On exact VAR data with the known model, recoloring the whitened
  // weighted sum matches the direct sum up to O(M/n) edge effects.
  Mat phi(2, 2);
  phi << 0.6, 0.2, -0.1, 0.4;
  VarModel model;
  model.order = 1;
  model.coefficients = {phi};

  const int m_lag = 8;
  const double omega = 1.3;
  double total_rel_err = 0.0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    MultivariateSeries s = simulate_var1(phi, 1024, 7000 + r);
    CMat direct = smoothed_periodogram(s, KernelSpec::bartlett(), m_lag, omega);
    MultivariateSeries w = center_series(apply_filter(s, model).values);
    CMat recolored = recolor_spectrum(
        model, smoothed_periodogram(w, KernelSpec::bartlett(), m_lag, omega), omega);
    total_rel_err += max_abs(CMat(direct - recolored)) / max_abs(direct);
  }
  REQUIRE(total_rel_err / reps < 0.2);  // O(M/n) on average, generous slack
}

TEST_CASE("fitted models expose sparsity and stability diagnostics") {
  Mat phi = 0.5 * Mat::Identity(4, 4);
  MultivariateSeries s = simulate_var1(phi, 2048, 123);
  VarModel model = fit_sparse_var(s, 2);
  int recount = 0;
  for (const Mat& c : model.coefficients)
    recount += static_cast<int>((c.array() != 0.0).count());
  REQUIRE(model.nonzero_count == recount);
  REQUIRE(model.stable);
  REQUIRE(model.companion_spectral_radius < 1.0);
}
