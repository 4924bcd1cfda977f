#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "cassifuse/aperture.hpp"
#include "cassifuse/regularizers.hpp"
#include "cassifuse/sensing.hpp"
#include "cassifuse/sparse.hpp"

using namespace cassifuse;

namespace {

std::vector<double> randn(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& e : v) e = rng.normal();
  return v;
}

template <class Op>
void expect_adjoint(const Op& op, std::uint64_t seed, int pairs = 20) {
  Rng rng(seed);
  for (int t = 0; t < pairs; ++t) {
    const auto x = randn(op.cols(), rng);
    const auto v = randn(op.rows(), rng);
    const double lhs = dot(cassifuse::apply(op, x), v);
    const double rhs = dot(x, apply_adjoint(op, v));
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(lhs))) << "pair " << t;
  }
}

// Dense copy for brute-force checks.
std::vector<std::vector<double>> dense(const SparseProjection& h) {
  std::vector<std::vector<double>> d(h.rows(), std::vector<double>(h.cols(), 0.0));
  for (std::size_t r = 0; r < h.rows(); ++r) {
    const auto c = h.row_columns(r);
    const auto v = h.row_values(r);
    for (std::size_t e = 0; e < c.size(); ++e) d[r][c[e]] = v[e];
  }
  return d;
}

}  // namespace

TEST(HMs, CorrectedIndexExample) {
  // M=N=1, K=4, q=2, W=2, S(1,1,1)=2 -> row 1 has ones at columns 3 and 4.
  const PatternCube s(1, 1, 2, 2, {2, 1});
  const auto h = build_ms_projection(s, 4, 2);
  ASSERT_EQ(h.rows(), 2u);
  ASSERT_EQ(h.cols(), 4u);
  const auto c = h.row_columns(0);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0] + 1, 3u);
  EXPECT_EQ(c[1] + 1, 4u);
  EXPECT_EQ(h.row_columns(1)[0] + 1, 1u);
}

TEST(HMs, StructureAndRate) {
  for (std::size_t q : {1u, 2u, 4u}) {
    const auto d = design_dual_apertures(6, 5, 16, q, 1, q);
    const auto h = build_ms_projection(d.ms_patterns, d.feature_bands(), q);
    EXPECT_EQ(h.nnz(), 6u * 5u * d.ms_snapshots() * q);
    for (std::size_t r = 0; r < h.rows(); ++r) {
      ASSERT_EQ(h.row_size(r), q);
      for (double v : h.row_values(r)) EXPECT_EQ(v, 1.0);
    }
    EXPECT_EQ(h.rows() * q, h.cols());
    EXPECT_EQ(h.rate(), 1.0 / static_cast<double>(q));
  }
}

TEST(HMs, OutOfRangePatternRejected) {
  const PatternCube s(1, 1, 1, 3, {3});
  EXPECT_THROW(build_ms_projection(s, 4, 2), configuration_error);
}

TEST(HHs, SelectionWhenPIsOne) {
  const auto d = design_dual_apertures(4, 3, 8, 2, 1, 2);
  const auto h = build_hs_projection(d.hs_patterns, 4, 3, d.feature_bands(), 1);
  for (std::size_t r = 0; r < h.rows(); ++r) {
    ASSERT_EQ(h.row_size(r), 1u);
    EXPECT_EQ(h.row_values(r)[0], 1.0);
  }
}

TEST(HHs, StructureAndRate) {
  for (std::size_t p : {1u, 2u, 4u}) {
    const auto d = design_dual_apertures(8, 8, 8, 2, p, p + 10);
    const auto h = build_hs_projection(d.hs_patterns, 8, 8, d.feature_bands(), p);
    EXPECT_EQ(h.nnz(), (8 / p) * (8 / p) * d.hs_snapshots() * p * p);
    for (std::size_t r = 0; r < h.rows(); ++r) {
      ASSERT_EQ(h.row_size(r), p * p);
      double sum = 0;
      for (double v : h.row_values(r)) {
        EXPECT_EQ(v, 1.0 / static_cast<double>(p * p));
        sum += v;
      }
      EXPECT_EQ(sum, 1.0);
    }
    EXPECT_EQ(h.rows() * p * p, h.cols());
    EXPECT_EQ(h.rate(), 1.0 / static_cast<double>(p * p));
    const auto ones = cassifuse::apply(h, std::vector<double>(h.cols(), 1.0));
    for (double v : ones) EXPECT_EQ(v, 1.0);
  }
}

TEST(HHs, BlockColumnsMatchSemantics) {
  const std::size_t m = 6, n = 4, p = 2;
  const auto d = design_dual_apertures(m, n, 8, 2, p, 4);
  const auto h = build_hs_projection(d.hs_patterns, m, n, d.feature_bands(), p);
  const auto dd = dense(h);
  std::size_t row = 0;
  for (std::size_t k = 0; k < d.hs_snapshots(); ++k)
    for (std::size_t nu = 0; nu < n / p; ++nu)
      for (std::size_t mu = 0; mu < m / p; ++mu, ++row) {
        const std::size_t band = d.hs_patterns(mu, nu, k) - 1;
        for (std::size_t col = 0; col < h.cols(); ++col) {
          const std::size_t b = col / (m * n), j = (col % (m * n)) / m, i = col % m;
          const bool inside = b == band && i / p == mu && j / p == nu;
          EXPECT_EQ(dd[row][col], inside ? 0.25 : 0.0);
        }
      }
}

TEST(Sparse, ValidatesColumns) {
  EXPECT_THROW(SparseProjection(1, 3, {0, 2}, {2, 1}, {1.0, 1.0}), dimension_error);
  EXPECT_THROW(SparseProjection(1, 3, {0, 1}, {3}, {1.0}), dimension_error);
  EXPECT_NO_THROW(SparseProjection(1, 3, {0, 2}, {0, 2}, {1.0, 1.0}));
}

TEST(Sparse, StackWithEmptyIsUnchanged) {
  const auto d = design_dual_apertures(4, 4, 8, 2, 2, 1);
  const auto ms = build_ms_projection(d.ms_patterns, 4, 2);
  const SparseProjection empty(0, ms.cols(), {0}, {}, {});
  const auto s = stack_projections(ms, empty);
  EXPECT_EQ(s.rows(), ms.rows());
  EXPECT_TRUE(std::equal(s.col_idx().begin(), s.col_idx().end(), ms.col_idx().begin()));
  EXPECT_THROW(stack_projections(ms, identity_projection(3)), dimension_error);
}

TEST(Sparse, StackAppliesBlockwise) {
  const auto d = design_dual_apertures(16, 16, 8, 2, 2, 7);
  const auto set = build_projections(d);
  EXPECT_EQ(set.stacked.rows(), 768u);
  EXPECT_EQ(set.stacked.cols(), 1024u);
  Rng rng(1);
  const auto x = randn(1024, rng);
  auto expect = cassifuse::apply(set.ms, x);
  const auto hs = cassifuse::apply(set.hs, x);
  expect.insert(expect.end(), hs.begin(), hs.end());
  EXPECT_EQ(cassifuse::apply(set.stacked, x), expect);
  EXPECT_EQ(cassifuse::apply(set.stacked, std::vector<double>(1024, 0.0)), std::vector<double>(768, 0.0));
}

TEST(Sparse, LengthMismatch) {
  const auto h = identity_projection(4);
  EXPECT_THROW(cassifuse::apply(h, std::vector<double>(3)), dimension_error);
  EXPECT_THROW(apply_adjoint(h, std::vector<double>(5)), dimension_error);
}

TEST(Sparse, TripletExport) {
  const SparseProjection h(2, 3, {0, 1, 3}, {1, 0, 2}, {0.5, 1.0, 0.25});
  std::ostringstream os;
  h.write_triplets(os);
  EXPECT_EQ(os.str(), "1\t2\t0.5\n2\t1\t1\n2\t3\t0.25\n");
}

TEST(Adjoints, AllOperators) {
  const auto d = design_dual_apertures(8, 8, 8, 2, 2, 3);
  const auto set = build_projections(d);
  expect_adjoint(set.ms, 1);
  expect_adjoint(set.hs, 2);
  expect_adjoint(set.stacked, 3);
  expect_adjoint(DifferenceOperator(5, 4, 3), 4);
  expect_adjoint(WaveletOperator(8, 8, 4, 2), 5);
}

TEST(Tv, ConstantCubeHasZeroVariation) {
  const DifferenceOperator phi(3, 4, 2);
  const std::vector<double> x(24, 3.7);
  for (double v : tv_forward(phi, x)) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(phi.tv_norm(x), 0.0);
}

TEST(Tv, TwoHorizontalSteps) {
  // Rows x cols [[0,1],[0,1]]: column-major data (0,0,1,1).
  const DifferenceOperator phi(2, 2, 1);
  EXPECT_EQ(phi.tv_norm(std::vector<double>{0, 0, 1, 1}), 2.0);
}

TEST(Tv, BruteForceEnumeration) {
  Rng rng(12);
  const std::size_t m = 3, n = 3, k = 2;
  const DifferenceOperator phi(m, n, k);
  for (int t = 0; t < 10; ++t) {
    const auto x = randn(m * n * k, rng);
    auto at = [&](std::size_t i, std::size_t j, std::size_t b) { return x[i + j * m + b * m * n]; };
    double expect = 0;
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) {
          if (i + 1 < m) expect += std::abs(at(i, j, b) - at(i + 1, j, b));
          if (j + 1 < n) expect += std::abs(at(i, j, b) - at(i, j + 1, b));
          if (b + 1 < k) expect += std::abs(at(i, j, b) - at(i, j, b + 1));
        }
    EXPECT_NEAR(phi.tv_norm(x), expect, 1e-12);
  }
}

TEST(Tv, OutputLengthAndBoundaryZeros) {
  const DifferenceOperator phi(3, 2, 2);
  Rng rng(2);
  const auto d = tv_forward(phi, randn(12, rng));
  ASSERT_EQ(d.size(), 36u);
  // Row differences vanish on the last row; column differences on the last column.
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(d[2 + j * 3 + b * 6], 0.0);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(d[12 + i + 3 + b * 6], 0.0);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(d[24 + 6 + i], 0.0);
}

TEST(Wavelet, HaarPair) {
  std::vector<double> v{1.0, 1.0}, scratch(2);
  haar_analysis_step(v.data(), 2, 1, scratch.data());
  EXPECT_NEAR(v[0], std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(v[1], 0.0, 1e-15);
}

TEST(Wavelet, OneLevelTwoByTwo) {
  // Orthonormal 2-D Haar of [[a,b],[c,d]]: approximation (a+b+c+d)/2.
  const WaveletOperator psi(2, 2, 1, 1);
  const std::vector<double> x{1, 2, 3, 4};  // a=1 (0,0), c=2 (1,0), b=3 (0,1), d=4 (1,1)
  const auto c = wavelet_forward(psi, x);
  EXPECT_NEAR(c[0], 5.0, 1e-14);
  double sq = 0;
  for (double e : c) sq += e * e;
  EXPECT_NEAR(sq, 30.0, 1e-12);
}

TEST(Wavelet, RoundTripAndParseval) {
  Rng rng(99);
  for (std::size_t levels : {0u, 1u, 2u, 3u}) {
    const WaveletOperator psi(16, 8, 3, levels);
    for (int t = 0; t < 10; ++t) {
      const auto x = randn(psi.cols(), rng);
      const auto c = wavelet_forward(psi, x);
      const auto back = wavelet_inverse(psi, c);
      for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-12);
      EXPECT_NEAR(norm2(c), norm2(x), 1e-12 * norm2(x));
    }
  }
}

TEST(Wavelet, DivisibilityRequired) {
  EXPECT_THROW(WaveletOperator(6, 8, 1, 2), configuration_error);
  EXPECT_NO_THROW(WaveletOperator(6, 8, 1, 1));
}

TEST(ForwardModel, MatchesSensing) {
  Rng rng(5);
  const auto d = design_dual_apertures(16, 16, 8, 2, 2, 21);
  const auto set = build_projections(d);
  SpectralCube f(16, 16, 8);
  for (double& v : f.data()) v = rng.uniform();
  const auto x = fused_features_reference(f, d.hs_bank);
  const auto yms = acquire_cmsi(f, d.ms_bank, d.ms_patterns);
  const auto yhs = acquire_chsi(f, d.hs_bank, d.hs_patterns, 2);
  const auto a = cassifuse::apply(set.ms, x.data());
  const auto b = cassifuse::apply(set.hs, x.data());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], yms.data()[i], 1e-12);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(b[i], yhs.data()[i], 1e-12);
}
