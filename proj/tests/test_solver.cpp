#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cassifuse/aperture.hpp"
#include "cassifuse/regularizers.hpp"
#include "cassifuse/sensing.hpp"
#include "cassifuse/solver.hpp"
#include "cassifuse/sparse.hpp"

using namespace cassifuse;

namespace {

// Dense matrix as a LinearMap, backed by Eigen.
class DenseMap {
 public:
  explicit DenseMap(Eigen::MatrixXd a) : a_(std::move(a)) {}
  std::size_t rows() const noexcept { return static_cast<std::size_t>(a_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(a_.cols()); }
  void apply(std::span<const double> x, std::span<double> out) const {
    Eigen::Map<Eigen::VectorXd>(out.data(), a_.rows()) =
        a_ * Eigen::Map<const Eigen::VectorXd>(x.data(), a_.cols());
  }
  void apply_adjoint(std::span<const double> v, std::span<double> out) const {
    Eigen::Map<Eigen::VectorXd>(out.data(), a_.cols()) =
        a_.transpose() * Eigen::Map<const Eigen::VectorXd>(v.data(), a_.rows());
  }
  const Eigen::MatrixXd& matrix() const { return a_; }

 private:
  Eigen::MatrixXd a_;
};

template <LinearMap Op>
Eigen::MatrixXd to_dense(const Op& op) {
  Eigen::MatrixXd d(op.rows(), op.cols());
  std::vector<double> e(op.cols(), 0.0), col(op.rows());
  for (std::size_t j = 0; j < op.cols(); ++j) {
    e[j] = 1.0;
    op.apply(e, col);
    for (std::size_t i = 0; i < op.rows(); ++i) d(i, j) = col[i];
    e[j] = 0.0;
  }
  return d;
}

Eigen::MatrixXd random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Eigen::MatrixXd a(r, c);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = rng.normal();
  return a;
}

std::vector<double> randn(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& e : v) e = rng.normal();
  return v;
}

}  // namespace

TEST(SoftThreshold, Examples) {
  EXPECT_EQ(soft_threshold(std::vector<double>{-3, 0.5, 2}, 1.0), (std::vector<double>{-2, 0, 1}));
  EXPECT_EQ(soft_threshold(std::vector<double>{-3, 0.5, 2}, 0.0), (std::vector<double>{-3, 0.5, 2}));
  EXPECT_EQ(soft_threshold(1.0, 1.0), 0.0);
  EXPECT_THROW(soft_threshold(1.0, -0.1), domain_error);
}

TEST(SoftThreshold, IsProximalOperator) {
  // argmin_u 1/2 (u - v)^2 + tau |u| on a fine grid.
  for (double v : {-2.3, -0.4, 0.0, 0.7, 3.1}) {
    const double tau = 0.8;
    double best = 0, best_f = 1e300;
    for (int k = -50000; k <= 50000; ++k) {
      const double u = k * 1e-4;
      const double f = 0.5 * (u - v) * (u - v) + tau * std::abs(u);
      if (f < best_f) best_f = f, best = u;
    }
    EXPECT_NEAR(soft_threshold(v, tau), best, 2e-4);
  }
}

TEST(Objective, BruteForceOracle) {
  Rng rng(3);
  const DenseMap h(random_matrix(6, 8, rng));
  const WaveletOperator psi(2, 2, 2, 1);
  const DifferenceOperator phi(2, 2, 2);
  const auto x = randn(8, rng), y = randn(6, rng);
  const Eigen::MatrixXd w = to_dense(psi), d = to_dense(phi);
  const Eigen::Map<const Eigen::VectorXd> xe(x.data(), 8), ye(y.data(), 6);
  const double expect = 0.5 * (ye - h.matrix() * xe).squaredNorm() + 0.3 * (w * xe).lpNorm<1>() +
                        0.2 * (d * xe).lpNorm<1>();
  EXPECT_NEAR(fusion_objective(x, y, h, psi, phi, 0.3, 0.2), expect, 1e-12 * expect);
}

TEST(Surrogate, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  const DenseMap h(random_matrix(10, 16, rng));
  const WaveletOperator psi(4, 2, 2, 1);
  const DifferenceOperator phi(4, 2, 2);
  auto s = FusionState::zeros(16, psi, phi);
  s.gamma1 = randn(16, rng);
  s.delta1 = randn(16, rng);
  s.gamma2 = randn(48, rng);
  s.delta2 = randn(48, rng);
  const auto y = randn(10, rng);
  auto x = randn(16, rng);
  const double rho = 0.7, eps = 1e-6;
  const auto g = smooth_gradient(x, y, h, psi, phi, s, rho);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + eps;
    const double fp = smooth_surrogate(x, y, h, psi, phi, s, rho);
    x[i] = x0 - eps;
    const double fm = smooth_surrogate(x, y, h, psi, phi, s, rho);
    x[i] = x0;
    EXPECT_NEAR(g[i], (fp - fm) / (2 * eps), 1e-5 * std::max(1.0, std::abs(g[i])));
  }
}

TEST(Surrogate, GradientStepIsMinimizerOfLinearization) {
  Rng rng(8);
  const DenseMap h(random_matrix(5, 8, rng));
  const WaveletOperator psi(2, 2, 2, 0);
  const DifferenceOperator phi(2, 2, 2);
  const auto s = FusionState::zeros(8, psi, phi);
  const auto x = randn(8, rng), y = randn(5, rng);
  const auto g = smooth_gradient(x, y, h, psi, phi, s, 1.0);
  const auto step = gradient_step(x, y, h, psi, phi, s, 1.0, 4.0);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(step[i], x[i] - g[i] / 4.0, 1e-14);
  EXPECT_THROW(gradient_step(x, y, h, psi, phi, s, 1.0, 0.0), domain_error);
}

TEST(StepEstimate, IdentityOperator) {
  const IdentityMap h(50);
  const ZeroMap zero(1, 50);
  EXPECT_NEAR(estimate_step(h, zero, 0.0), 1.05, 1e-9);
  EXPECT_NEAR(estimate_step(h, zero, 1.0), 2.1, 1e-9);
}

TEST(StepEstimate, MatchesDenseEigenvalue) {
  const auto d = design_dual_apertures(8, 8, 8, 2, 2, 4);
  const auto set = build_projections(d);
  const DifferenceOperator phi(8, 8, 4);
  const Eigen::MatrixXd hd = to_dense(set.stacked), pd = to_dense(phi);
  for (double rho : {0.1, 1.0}) {
    const Eigen::MatrixXd a = hd.transpose() * hd +
                              rho * Eigen::MatrixXd::Identity(hd.cols(), hd.cols()) +
                              rho * pd.transpose() * pd;
    const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().maxCoeff();
    const double beta = estimate_step(set.stacked, phi, rho, 300);
    EXPECT_LE(beta, 1.05 * lmax * (1 + 1e-9));
    EXPECT_GE(beta, 1.05 * lmax * 0.99);
    // Rayleigh quotients of random directions stay below beta.
    Rng rng(2);
    for (int t = 0; t < 5; ++t) {
      const auto v = randn(hd.cols(), rng);
      const Eigen::Map<const Eigen::VectorXd> ve(v.data(), hd.cols());
      EXPECT_LT(1.05 * ve.dot(a * ve) / ve.squaredNorm(), beta);
    }
  }
}

TEST(StepEstimate, IncreasesWithRho) {
  const auto d = design_dual_apertures(8, 8, 8, 2, 2, 4);
  const auto set = build_projections(d);
  const DifferenceOperator phi(8, 8, 4);
  double prev = 0;
  for (double rho : {0.01, 0.1, 1.0, 10.0}) {
    const double b = estimate_step(set.stacked, phi, rho);
    EXPECT_GT(b, prev);
    prev = b;
  }
}

TEST(Alpha, Schedules) {
  FusionConfig c;
  EXPECT_EQ(c.alpha(0), 1.0);
  EXPECT_EQ(c.alpha(7), 1.0);
  c.schedule = AlphaSchedule::harmonic;
  EXPECT_EQ(c.alpha(0), 1.0);
  EXPECT_EQ(c.alpha(2), 0.5);
  c.alpha0 = 0.25;
  EXPECT_EQ(c.alpha(0), 0.25);
  EXPECT_EQ(harmonic_alpha(6), 0.25);
}

TEST(Config, Validation) {
  FusionConfig c;
  EXPECT_NO_THROW(c.validate());
  c.rho = 0;
  EXPECT_THROW(c.validate(), configuration_error);
  c = {};
  c.lambda2 = -1;
  EXPECT_THROW(c.validate(), configuration_error);
  c = {};
  c.power_iterations = 10;
  EXPECT_THROW(c.validate(), configuration_error);
  c = {};
  c.rel_tol = 1.0;
  EXPECT_THROW(c.validate(), configuration_error);
}

TEST(Fuse, ExactRecoveryWithFullSampling) {
  // q = p = 1: both arms sample every feature, so H^T H = 2 I.
  Rng rng(21);
  const auto d = design_dual_apertures(8, 8, 4, 1, 1, 3);
  const auto set = build_projections(d);
  SpectralCube f(8, 8, 4);
  for (double& v : f.data()) v = rng.uniform(0.5, 1.5);
  const auto x_true = fused_features_reference(f, d.hs_bank);
  auto y = cassifuse::apply(set.ms, x_true.data());
  const auto yh = cassifuse::apply(set.hs, x_true.data());
  y.insert(y.end(), yh.begin(), yh.end());
  FusionConfig c;
  c.lambda1 = 0.0;
  c.lambda2 = 0.0;
  c.rel_tol = 1e-12;
  c.max_iters = 2000;
  const auto r = fuse(y, set.stacked, WaveletOperator(8, 8, 4, 1), DifferenceOperator(8, 8, 4), c);
  double err = 0, ref = 0;
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    err += (r.x[i] - x_true.data()[i]) * (r.x[i] - x_true.data()[i]);
    ref += x_true.data()[i] * x_true.data()[i];
  }
  EXPECT_LE(std::sqrt(err / ref), 1e-6);
}

TEST(Fuse, LeastSquaresOracle) {
  Rng rng(31);
  const DenseMap h(random_matrix(24, 8, rng));
  const auto y = randn(24, rng);
  const Eigen::Map<const Eigen::VectorXd> ye(y.data(), 24);
  const Eigen::VectorXd xs = h.matrix().colPivHouseholderQr().solve(ye);
  const double best = 0.5 * (ye - h.matrix() * xs).squaredNorm();
  FusionConfig c;
  c.lambda1 = 0.0;
  c.lambda2 = 0.0;
  c.rel_tol = 1e-12;
  c.max_iters = 20000;
  const WaveletOperator psi(2, 2, 2, 1);
  const DifferenceOperator phi(2, 2, 2);
  const auto r = fuse(y, h, psi, phi, c);
  EXPECT_LE(r.report.final_objective, best * 1.001);
  EXPECT_GE(r.report.final_objective, best * (1 - 1e-9));
}

TEST(Fuse, LassoOptimalityConditions) {
  // lambda2 = 0 and an orthonormal Psi with zero levels (identity): the result
  // must satisfy |H^T (y - Hx)|_i <= lambda1, with equality on the support.
  Rng rng(41);
  const DenseMap h(random_matrix(30, 16, rng));
  const auto y = randn(30, rng);
  FusionConfig c;
  c.lambda1 = 2.0;
  c.lambda2 = 0.0;
  c.rel_tol = 1e-13;
  c.max_iters = 60000;
  const auto r = fuse(y, h, WaveletOperator(4, 4, 1, 0), DifferenceOperator(4, 4, 1), c);
  const Eigen::Map<const Eigen::VectorXd> xe(r.x.data(), 16), ye(y.data(), 30);
  const Eigen::VectorXd corr = h.matrix().transpose() * (ye - h.matrix() * xe);
  std::size_t active = 0;
  for (Eigen::Index i = 0; i < 16; ++i) {
    EXPECT_LE(std::abs(corr(i)), 2.0 + 1e-3);
    if (std::abs(xe(i)) > 1e-6) {
      ++active;
      EXPECT_NEAR(corr(i), 2.0 * (xe(i) > 0 ? 1 : -1), 1e-3);
    }
  }
  EXPECT_GT(active, 0u);
  EXPECT_LT(active, 16u);
}

TEST(Fuse, ObjectiveDecreasesAndConstraintsHold) {
  Rng rng(7);
  const auto d = design_dual_apertures(16, 16, 8, 2, 2, 5);
  const auto set = build_projections(d);
  SpectralCube f(16, 16, 8);
  for (double& v : f.data()) v = rng.uniform();
  const auto x_true = fused_features_reference(f, d.hs_bank);
  auto y = cassifuse::apply(set.ms, x_true.data());
  const auto yh = cassifuse::apply(set.hs, x_true.data());
  y.insert(y.end(), yh.begin(), yh.end());
  FusionConfig c;
  c.record_trace = true;
  c.max_iters = 400;
  const WaveletOperator psi(16, 16, 4, 2);
  const DifferenceOperator phi(16, 16, 4);
  const auto r = fuse(y, set.stacked, psi, phi, c);
  ASSERT_GE(r.report.objective_trace.size(), 6u);
  EXPECT_LE(r.report.final_objective, r.report.objective_trace[4]);
  EXPECT_LE(r.report.sparsity_residual, 1e-3 * norm2(r.x));
  EXPECT_LE(r.report.tv_residual, 1e-3 * norm2(r.x));
  EXPECT_NEAR(r.report.lambda1, 1e-3 * norm_inf(apply_adjoint(set.stacked, y)), 1e-15);
  for (double v : r.x) EXPECT_TRUE(std::isfinite(v));
}

TEST(Fuse, DivergenceIsReported) {
  Rng rng(9);
  const DenseMap h(random_matrix(10, 8, rng));
  const auto y = randn(10, rng);
  FusionConfig c;
  c.beta = 1e-3;
  c.max_iters = 5000;
  EXPECT_THROW(fuse(y, h, WaveletOperator(2, 2, 2, 1), DifferenceOperator(2, 2, 2), c), divergence_error);
}

TEST(Fuse, DimensionMismatch) {
  Rng rng(9);
  const DenseMap h(random_matrix(10, 8, rng));
  EXPECT_THROW(fuse(randn(9, rng), h, WaveletOperator(2, 2, 2, 1), DifferenceOperator(2, 2, 2), FusionConfig{}),
               dimension_error);
}
