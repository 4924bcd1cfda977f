#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include "cassifuse/aperture.hpp"

using namespace cassifuse;

namespace {

std::vector<std::size_t> support(const FilterBank& b, std::size_t filter) {
  std::vector<std::size_t> s;
  for (std::size_t l = 0; l < b.bands(); ++l)
    if (b(l, filter)) s.push_back(l + 1);
  return s;
}

}  // namespace

TEST(BoxBank, EightBandsFourFilters) {
  const auto b = make_box_filter_bank(8, 4);
  EXPECT_EQ(support(b, 0), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(support(b, 3), (std::vector<std::size_t>{7, 8}));
}

TEST(BoxBank, PaviaWidths) {
  const auto b = make_box_filter_bank(96, 24);
  for (std::size_t i = 0; i < 24; ++i) {
    const auto s = support(b, i);
    ASSERT_EQ(s.size(), 4u);
    EXPECT_EQ(s.back() - s.front(), 3u);
    EXPECT_EQ(s.front(), 4 * i + 1);
  }
}

TEST(BoxBank, NonDivisibleIsConfigurationError) {
  EXPECT_THROW(make_box_filter_bank(6, 4), configuration_error);
}

TEST(MsBank, SumsConsecutiveFilters) {
  const auto hs = make_box_filter_bank(8, 4);
  const auto ms = derive_ms_filter_bank(hs, 2);
  ASSERT_EQ(ms.count(), 2u);
  EXPECT_EQ(support(ms, 0), (std::vector<std::size_t>{1, 2, 3, 4}));
  EXPECT_EQ(support(ms, 1), (std::vector<std::size_t>{5, 6, 7, 8}));
  for (std::size_t i = 0; i < ms.count(); ++i)
    for (std::size_t l = 0; l < 8; ++l) EXPECT_EQ(ms(l, i), hs(l, 2 * i) + hs(l, 2 * i + 1));
}

TEST(MsBank, IdentityForQOne) {
  const auto hs = make_box_filter_bank(12, 6);
  EXPECT_EQ(derive_ms_filter_bank(hs, 1), hs);
}

TEST(MsBank, ColumnSumsAndPartition) {
  for (std::size_t q : {1u, 2u, 3u, 6u}) {
    const auto hs = make_box_filter_bank(24, 6);
    const auto ms = derive_ms_filter_bank(hs, q);
    for (std::size_t i = 0; i < ms.count(); ++i) {
      const auto col = ms.column(i);
      EXPECT_EQ(std::accumulate(col.begin(), col.end(), 0u), q * (24 / 6));
    }
    for (std::size_t l = 0; l < 24; ++l) {
      unsigned sum = 0;
      for (std::size_t i = 0; i < ms.count(); ++i) sum += ms(l, i);
      EXPECT_EQ(sum, 1u);
    }
  }
  EXPECT_THROW(derive_ms_filter_bank(make_box_filter_bank(8, 4), 3), configuration_error);
}

TEST(Patterns, SinglePixelIsPermutation) {
  const auto s = design_patterns(1, 1, 3, 3, 42);
  std::vector<std::uint32_t> v{s(0, 0, 0), s(0, 0, 1), s(0, 0, 2)};
  std::sort(v.begin(), v.end());
  EXPECT_EQ(v, (std::vector<std::uint32_t>{1, 2, 3}));
}

TEST(Patterns, EveryPixelSeesEveryFilterWhenKEqualsP) {
  const auto s = design_patterns(7, 5, 6, 6, 9);
  for (std::size_t n = 0; n < 5; ++n)
    for (std::size_t m = 0; m < 7; ++m) {
      std::vector<std::uint32_t> v;
      for (std::size_t k = 0; k < 6; ++k) v.push_back(s(m, n, k));
      std::sort(v.begin(), v.end());
      EXPECT_EQ(v, (std::vector<std::uint32_t>{1, 2, 3, 4, 5, 6}));
    }
}

TEST(Patterns, TruncatedPermutationsAreDistinct) {
  const auto s = design_patterns(6, 6, 3, 8, 1);
  for (std::size_t n = 0; n < 6; ++n)
    for (std::size_t m = 0; m < 6; ++m) {
      std::set<std::uint32_t> seen;
      for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_GE(s(m, n, k), 1u);
        EXPECT_LE(s(m, n, k), 8u);
        seen.insert(s(m, n, k));
      }
      EXPECT_EQ(seen.size(), 3u);
    }
}

TEST(Patterns, DeterministicPerSeed) {
  EXPECT_EQ(design_patterns(5, 4, 4, 4, 77), design_patterns(5, 4, 4, 4, 77));
  EXPECT_NE(design_patterns(5, 4, 4, 4, 77), design_patterns(5, 4, 4, 4, 78));
}

TEST(Patterns, MoreSnapshotsThanFiltersRejected) {
  EXPECT_THROW(design_patterns(2, 2, 5, 4, 0), configuration_error);
}

TEST(DualDesign, DeskDefaults) {
  const auto d = design_dual_apertures(8, 8, 8, 2, 2, 3);
  EXPECT_EQ(d.hs_bank.count(), 4u);
  EXPECT_EQ(d.hs_snapshots(), 4u);
  EXPECT_EQ(d.hs_patterns.rows(), 4u);
  EXPECT_EQ(d.hs_patterns.cols(), 4u);
  EXPECT_EQ(d.ms_bank.count(), 2u);
  EXPECT_EQ(d.ms_snapshots(), 2u);
  EXPECT_EQ(d.ms_patterns.rows(), 8u);
  EXPECT_EQ(d.ms_patterns.cols(), 8u);
  EXPECT_EQ(d.ms_bank, derive_ms_filter_bank(d.hs_bank, 2));
}

TEST(DualDesign, PaviaSnapshotCounts) {
  const auto d = design_dual_apertures(610, 340, 96, 4, 4, 1);
  EXPECT_EQ(d.hs_snapshots(), 24u);
  EXPECT_EQ(d.ms_snapshots(), 6u);
  EXPECT_EQ(d.hs_patterns.rows(), 152u);
  EXPECT_EQ(d.hs_patterns.cols(), 85u);
}

TEST(DualDesign, IndivisibleQRejected) {
  EXPECT_THROW(design_dual_apertures(8, 8, 96, 5, 2, 1), configuration_error);
}

TEST(DualDesign, Deterministic) {
  const auto a = design_dual_apertures(16, 16, 8, 2, 2, 5);
  const auto b = design_dual_apertures(16, 16, 8, 2, 2, 5);
  EXPECT_EQ(a.hs_patterns, b.hs_patterns);
  EXPECT_EQ(a.ms_patterns, b.ms_patterns);
}

TEST(DualDesign, OverridesSnapshots) {
  DesignOptions o;
  o.hs_snapshots = 2;
  o.ms_snapshots = 1;
  const auto d = design_dual_apertures(8, 8, 8, 2, 2, 3, o);
  EXPECT_EQ(d.hs_snapshots(), 2u);
  EXPECT_EQ(d.ms_snapshots(), 1u);
}
