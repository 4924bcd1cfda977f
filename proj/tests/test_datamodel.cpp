#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "cassifuse/cube.hpp"
#include "cassifuse/random.hpp"

using namespace cassifuse;

TEST(SpectralCube, SinglePixelVectorIsBandOrder) {
  SpectralCube c(1, 1, 2, {3.0, 7.0});
  EXPECT_EQ(cube_as_vector(c), (std::vector<double>{3.0, 7.0}));
}

TEST(SpectralCube, SingleBandVectorIsColumnMajor) {
  SpectralCube c(2, 1, 1);
  c(0, 0, 0) = 1.0;
  c(1, 0, 0) = 2.0;
  EXPECT_EQ(cube_as_vector(c), (std::vector<double>{1.0, 2.0}));
}

TEST(SpectralCube, LinearIndexArithmetic) {
  SpectralCube c(2, 2, 2);
  // 1-based (m=2, n=1, b=2) -> 2 + 0*2 + 1*4 = 6, i.e. 0-based 5.
  EXPECT_EQ(c.index(1, 0, 1), 5u);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t m = 0; m < 2; ++m) EXPECT_EQ(c.index(m, n, b), m + n * 2 + b * 4);
}

TEST(SpectralCube, RoundTripIsBitIdentical) {
  Rng rng(11);
  std::vector<double> v(4 * 3 * 2);
  for (auto& e : v) e = rng.normal();
  const SpectralCube c(4, 3, 2, v);
  const auto back = vector_as_cube(cube_as_vector(c), 4, 3, 2);
  EXPECT_EQ(back, c);
  EXPECT_EQ(cube_as_vector(back), v);
}

TEST(SpectralCube, LengthMismatchIsDimensionError) {
  EXPECT_THROW(vector_as_cube(std::vector<double>(5, 0.0), 2, 2, 2), dimension_error);
}

TEST(SpectralCube, ZeroVectorGivesZeroCube) {
  const auto c = vector_as_cube(std::vector<double>(8, 0.0), 2, 2, 2);
  EXPECT_EQ(c.rows(), 2u);
  EXPECT_EQ(c.cols(), 2u);
  EXPECT_EQ(c.bands(), 2u);
  for (double v : c.data()) EXPECT_EQ(v, 0.0);
}

TEST(SpectralCube, RejectsNonFiniteAndEmpty) {
  EXPECT_THROW(SpectralCube(1, 1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}), domain_error);
  EXPECT_THROW(SpectralCube(1, 1, 1, {std::numeric_limits<double>::infinity()}), domain_error);
  EXPECT_THROW(SpectralCube(0, 1, 1), dimension_error);
}

TEST(FilterBank, ValidatesPartition) {
  // Column-major 2 bands x 2 filters.
  EXPECT_NO_THROW(FilterBank(2, 2, {1, 0, 0, 1}));
  EXPECT_THROW(FilterBank(2, 2, {1, 1, 0, 0}), configuration_error);  // empty filter 2
  EXPECT_THROW(FilterBank(2, 2, {1, 1, 1, 0}), configuration_error);  // overlap on band 1
  EXPECT_THROW(FilterBank(2, 2, {1, 0, 0, 2}), configuration_error);  // not binary
  EXPECT_THROW(FilterBank(2, 2, {1, 0, 0}), dimension_error);
}

TEST(PatternCube, ValidatesRangeAndDistinctness) {
  EXPECT_NO_THROW(PatternCube(1, 1, 2, 3, {3, 1}));
  EXPECT_THROW(PatternCube(1, 1, 2, 3, {0, 1}), configuration_error);
  EXPECT_THROW(PatternCube(1, 1, 2, 3, {4, 1}), configuration_error);
  EXPECT_THROW(PatternCube(1, 1, 2, 3, {2, 2}), configuration_error);
  // Repeats are allowed once K exceeds P.
  EXPECT_NO_THROW(PatternCube(1, 1, 3, 2, {1, 2, 1}));
}

TEST(LabelMap, ValidatesLabels) {
  const LabelMap l(2, 2, {0, 2, 1, 0});
  EXPECT_EQ(l.class_count(), 2u);
  EXPECT_EQ(l(1, 0), 2u);
  EXPECT_EQ(l(0, 1), 1u);
  EXPECT_EQ(l.labelled_count(), 2u);
  EXPECT_THROW(LabelMap(1, 2, {0, 0}), data_error);
  EXPECT_THROW(LabelMap(1, 2, {3, 0}, 2), data_error);
}

TEST(Rng, Deterministic) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(mix_seed(1, 1), mix_seed(1, 2));
}

TEST(Rng, NormalMomentsAndPoissonMean) {
  Rng r(3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  for (double mean : {0.5, 4.0, 30.0, 1e4}) {
    double acc = 0, acc2 = 0;
    const int m = 50000;
    for (int i = 0; i < m; ++i) {
      const double k = static_cast<double>(r.poisson(mean));
      acc += k;
      acc2 += k * k;
    }
    const double mu = acc / m, var = acc2 / m - mu * mu;
    EXPECT_NEAR(mu, mean, 5 * std::sqrt(mean / m)) << mean;
    EXPECT_NEAR(var / mean, 1.0, 0.05) << mean;
  }
}
