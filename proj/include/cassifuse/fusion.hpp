#ifndef CASSIFUSE_FUSION_HPP
#define CASSIFUSE_FUSION_HPP

// Joint estimation of the M x N x P fused-feature cube from both arms.

#include <cstddef>
#include <span>
#include <vector>

#include "cassifuse/aperture.hpp"
#include "cassifuse/cube.hpp"
#include "cassifuse/regularizers.hpp"
#include "cassifuse/sensing.hpp"
#include "cassifuse/solver.hpp"
#include "cassifuse/sparse.hpp"

namespace cassifuse {

inline constexpr std::size_t kDefaultWaveletLevels = 2;

// Largest level count <= `wanted` that the grid supports.
inline std::size_t supported_wavelet_levels(std::size_t rows, std::size_t cols, std::size_t wanted) {
  std::size_t j = wanted;
  while (j > 0 && (rows % (std::size_t{1} << j) != 0 || cols % (std::size_t{1} << j) != 0)) --j;
  return j;
}

// [y_ms; y_hs] in the row order of [H_ms; H_hs].
inline std::vector<double> stacked_measurements(const MeasurementSet& y) {
  std::vector<double> v(y.y_ms.data().begin(), y.y_ms.data().end());
  v.insert(v.end(), y.y_hs.data().begin(), y.y_hs.data().end());
  return v;
}

struct CompressionRates {
  std::size_t feature_count = 0;  // M N P
  std::size_t ms_measurements = 0;
  std::size_t hs_measurements = 0;
  double ms_rate = 0.0;  // 1/q at full coverage
  double hs_rate = 0.0;  // 1/p^2 at full coverage and p | M, N
};

inline CompressionRates compression_rates(const ProjectionSet& h) {
  CompressionRates r;
  r.feature_count = h.ms.cols();
  r.ms_measurements = h.ms.rows();
  r.hs_measurements = h.hs.rows();
  r.ms_rate = h.ms.rate();
  r.hs_rate = h.hs.rate();
  return r;
}

struct FusedFeatures {
  SpectralCube features;  // M x N x P, band k <-> filter k
  FusionReport report;
  std::size_t wavelet_levels = 0;
};

inline FusedFeatures fuse_measurements(const ApertureDesign& design, const MeasurementSet& y,
                                       const FusionConfig& config,
                                       std::size_t wavelet_levels = kDefaultWaveletLevels) {
  const auto h = build_projections(design);
  if (y.y_ms.size() != h.ms.rows() || y.y_hs.size() != h.hs.rows()) {
    throw dimension_error("measurements do not match the aperture design");
  }
  const std::size_t m = design.rows, n = design.cols, k = design.feature_bands();
  const std::size_t levels = supported_wavelet_levels(m, n, wavelet_levels);
  const WaveletOperator psi(m, n, k, levels);
  const DifferenceOperator phi(m, n, k);
  const auto yv = stacked_measurements(y);
  auto result = fuse(yv, h.stacked, psi, phi, config);
  FusedFeatures out;
  out.features = SpectralCube(m, n, k, std::move(result.x));
  out.report = std::move(result.report);
  out.wavelet_levels = levels;
  return out;
}

}  // namespace cassifuse

#endif  // CASSIFUSE_FUSION_HPP
