#ifndef CASSIFUSE_APERTURE_HPP
#define CASSIFUSE_APERTURE_HPP

// Filter banks and colored coded-aperture design for the two imaging arms.

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cassifuse/cube.hpp"
#include "cassifuse/errors.hpp"
#include "cassifuse/random.hpp"

namespace cassifuse {

// P contiguous, equally wide box filters over L bands.
inline FilterBank make_box_filter_bank(std::size_t bands, std::size_t count) {
  if (bands == 0 || count == 0) throw configuration_error("filter bank sizes must be positive");
  if (bands % count != 0) {
    throw configuration_error("filter count " + std::to_string(count) +
                              " does not divide band count " + std::to_string(bands));
  }
  const std::size_t width = bands / count;
  std::vector<std::uint8_t> r(bands * count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t l = i * width; l < (i + 1) * width; ++l) r[l + i * bands] = 1;
  }
  return FilterBank(bands, count, std::move(r));
}

// Multispectral filters as sums of q consecutive hyperspectral filters.
inline FilterBank derive_ms_filter_bank(const FilterBank& hs, std::size_t q) {
  if (q == 0 || hs.count() % q != 0) {
    throw configuration_error("spectral factor q=" + std::to_string(q) +
                              " does not divide the hyperspectral filter count " +
                              std::to_string(hs.count()));
  }
  const std::size_t count = hs.count() / q;
  std::vector<std::uint8_t> r(hs.bands() * count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t a = 0; a < q; ++a) {
      const auto col = hs.column(i * q + a);
      for (std::size_t l = 0; l < hs.bands(); ++l) r[l + i * hs.bands()] += col[l];
    }
  }
  return FilterBank(hs.bands(), count, std::move(r));
}

// Each pixel receives the first K entries of an independent random
// permutation of the filter ids {1..P}, so no filter repeats at a pixel and
// K == P gives every pixel every filter exactly once.
inline PatternCube design_patterns(std::size_t rows, std::size_t cols, std::size_t snapshots,
                                   std::size_t filter_count, std::uint64_t seed) {
  if (rows == 0 || cols == 0 || snapshots == 0 || filter_count == 0) {
    throw configuration_error("pattern dimensions must be positive");
  }
  if (snapshots > filter_count) {
    throw configuration_error("snapshot count " + std::to_string(snapshots) +
                              " exceeds filter count " + std::to_string(filter_count));
  }
  Rng rng(seed);
  const std::size_t plane = rows * cols;
  std::vector<std::uint32_t> idx(plane * snapshots);
  std::vector<std::uint32_t> perm(filter_count);
  for (std::size_t pix = 0; pix < plane; ++pix) {
    std::iota(perm.begin(), perm.end(), 1u);
    rng.shuffle(perm);
    for (std::size_t k = 0; k < snapshots; ++k) idx[pix + k * plane] = perm[k];
  }
  return PatternCube(rows, cols, snapshots, filter_count, std::move(idx));
}

struct ApertureDesign {
  FilterBank hs_bank;
  FilterBank ms_bank;
  PatternCube hs_patterns;  // (M/p) x (N/p) x K
  PatternCube ms_patterns;  // M x N x W
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t q = 1;
  std::size_t p = 1;
  std::uint64_t seed = 0;

  std::size_t feature_bands() const noexcept { return hs_bank.count(); }
  std::size_t hs_snapshots() const noexcept { return hs_patterns.snapshots(); }
  std::size_t ms_snapshots() const noexcept { return ms_patterns.snapshots(); }
};

// Overrides for the default full-coverage configuration.
struct DesignOptions {
  std::optional<std::size_t> hs_filters;    // default L / q
  std::optional<std::size_t> hs_snapshots;  // K, default = hs_filters
  std::optional<std::size_t> ms_snapshots;  // W, default = hs_filters / q
};

// Stream offsets used to derive each arm's pattern seed from the design seed.
inline constexpr std::uint64_t kHsPatternStream = 1;
inline constexpr std::uint64_t kMsPatternStream = 2;

// Low-resolution grid size along one axis; trailing pixels that do not fill a
// whole p x p block are not seen by the hyperspectral arm.
inline std::size_t decimated_extent(std::size_t extent, std::size_t p) {
  if (p == 0) throw configuration_error("spatial factor p must be positive");
  if (extent < p) {
    throw configuration_error("spatial factor p=" + std::to_string(p) + " exceeds extent " +
                              std::to_string(extent));
  }
  return extent / p;
}

inline ApertureDesign design_dual_apertures(std::size_t rows, std::size_t cols, std::size_t bands,
                                            std::size_t q, std::size_t p, std::uint64_t seed,
                                            const DesignOptions& options = {}) {
  if (rows == 0 || cols == 0 || bands == 0) throw configuration_error("scene sizes must be positive");
  if (q == 0) throw configuration_error("spectral factor q must be positive");
  if (!options.hs_filters && bands % q != 0) {
    throw configuration_error("spectral factor q=" + std::to_string(q) +
                              " does not divide band count L=" + std::to_string(bands));
  }
  const std::size_t hs_filters = options.hs_filters.value_or(bands / q);
  if (hs_filters == 0 || bands % hs_filters != 0) {
    throw configuration_error("hyperspectral filter count " + std::to_string(hs_filters) +
                              " does not divide band count L=" + std::to_string(bands));
  }
  if (hs_filters % q != 0) {
    throw configuration_error("spectral factor q=" + std::to_string(q) +
                              " does not divide hyperspectral filter count " +
                              std::to_string(hs_filters));
  }
  const std::size_t hs_rows = decimated_extent(rows, p);
  const std::size_t hs_cols = decimated_extent(cols, p);

  ApertureDesign d;
  d.rows = rows;
  d.cols = cols;
  d.q = q;
  d.p = p;
  d.seed = seed;
  d.hs_bank = make_box_filter_bank(bands, hs_filters);
  d.ms_bank = derive_ms_filter_bank(d.hs_bank, q);
  const std::size_t k = options.hs_snapshots.value_or(hs_filters);
  const std::size_t w = options.ms_snapshots.value_or(d.ms_bank.count());
  d.hs_patterns = design_patterns(hs_rows, hs_cols, k, hs_filters, mix_seed(seed, kHsPatternStream));
  d.ms_patterns = design_patterns(rows, cols, w, d.ms_bank.count(), mix_seed(seed, kMsPatternStream));
  return d;
}

}  // namespace cassifuse

#endif  // CASSIFUSE_APERTURE_HPP
