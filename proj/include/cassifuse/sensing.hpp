#ifndef CASSIFUSE_SENSING_HPP
#define CASSIFUSE_SENSING_HPP

// Direct forward models of the dual-arm compressive imager, ground-truth
// degradations and measurement noise.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cassifuse/aperture.hpp"
#include "cassifuse/cube.hpp"
#include "cassifuse/errors.hpp"
#include "cassifuse/random.hpp"

namespace cassifuse {

namespace detail {

// Band lists per filter.
inline std::vector<std::vector<std::size_t>> filter_supports(const FilterBank& bank) {
  std::vector<std::vector<std::size_t>> s(bank.count());
  for (std::size_t i = 0; i < bank.count(); ++i) {
    for (std::size_t l = 0; l < bank.bands(); ++l) {
      if (bank(l, i)) s[i].push_back(l);
    }
  }
  return s;
}

inline void require_bands(const SpectralCube& f, const FilterBank& bank) {
  if (f.bands() != bank.bands()) {
    throw dimension_error("scene has " + std::to_string(f.bands()) + " bands, filter bank expects " +
                          std::to_string(bank.bands()));
  }
}

}  // namespace detail

// Scene response to every hyperspectral filter, bands ordered by filter id.
inline SpectralCube fused_features_reference(const SpectralCube& scene, const FilterBank& hs_bank) {
  detail::require_bands(scene, hs_bank);
  SpectralCube out(scene.rows(), scene.cols(), hs_bank.count());
  for (std::size_t l = 0; l < scene.bands(); ++l) {
    auto dst = out.band(hs_bank.filter_of_band(l));
    auto src = scene.band(l);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return out;
}

// High-resolution multispectral snapshots: y(m,n,w) = sum_l F(m,n,l) theta_{S(m,n,w)}(l).
inline SpectralCube acquire_cmsi(const SpectralCube& scene, const FilterBank& ms_bank,
                                 const PatternCube& s_ms) {
  detail::require_bands(scene, ms_bank);
  if (s_ms.rows() != scene.rows() || s_ms.cols() != scene.cols()) {
    throw dimension_error("multispectral patterns must match the scene grid");
  }
  if (s_ms.filter_count() > ms_bank.count()) {
    throw dimension_error("pattern filter ids exceed the multispectral filter count");
  }
  const auto support = detail::filter_supports(ms_bank);
  SpectralCube y(scene.rows(), scene.cols(), s_ms.snapshots());
  for (std::size_t w = 0; w < s_ms.snapshots(); ++w) {
    for (std::size_t n = 0; n < scene.cols(); ++n) {
      for (std::size_t m = 0; m < scene.rows(); ++m) {
        double acc = 0.0;
        for (auto l : support[s_ms(m, n, w) - 1]) acc += scene(m, n, l);
        y(m, n, w) = acc;
      }
    }
  }
  return y;
}

// Low-resolution hyperspectral snapshots: the filtered scene averaged over each
// p x p block.
inline SpectralCube acquire_chsi(const SpectralCube& scene, const FilterBank& hs_bank,
                                 const PatternCube& s_hs, std::size_t p) {
  detail::require_bands(scene, hs_bank);
  const std::size_t lr_rows = decimated_extent(scene.rows(), p);
  const std::size_t lr_cols = decimated_extent(scene.cols(), p);
  if (s_hs.rows() != lr_rows || s_hs.cols() != lr_cols) {
    throw dimension_error("hyperspectral patterns must lie on the " + std::to_string(lr_rows) + "x" +
                          std::to_string(lr_cols) + " decimated grid");
  }
  if (s_hs.filter_count() > hs_bank.count()) {
    throw dimension_error("pattern filter ids exceed the hyperspectral filter count");
  }
  const auto support = detail::filter_supports(hs_bank);
  const double inv = 1.0 / static_cast<double>(p * p);
  SpectralCube y(lr_rows, lr_cols, s_hs.snapshots());
  for (std::size_t k = 0; k < s_hs.snapshots(); ++k) {
    for (std::size_t nu = 0; nu < lr_cols; ++nu) {
      for (std::size_t mu = 0; mu < lr_rows; ++mu) {
        const auto& bands = support[s_hs(mu, nu, k) - 1];
        double acc = 0.0;
        for (std::size_t b = 0; b < p; ++b) {
          for (std::size_t a = 0; a < p; ++a) {
            for (auto l : bands) acc += scene(mu * p + a, nu * p + b, l);
          }
        }
        y(mu, nu, k) = acc * inv;
      }
    }
  }
  return y;
}

// Sums of q contiguous bands.
inline SpectralCube spectral_decimate(const SpectralCube& scene, std::size_t q) {
  if (q == 0 || scene.bands() % q != 0) {
    throw dimension_error("spectral factor " + std::to_string(q) + " does not divide " +
                          std::to_string(scene.bands()) + " bands");
  }
  SpectralCube out(scene.rows(), scene.cols(), scene.bands() / q);
  for (std::size_t l = 0; l < scene.bands(); ++l) {
    auto dst = out.band(l / q);
    auto src = scene.band(l);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return out;
}

// p x p block means per band. Rows/cols beyond the last whole block are dropped.
inline SpectralCube spatial_decimate(const SpectralCube& scene, std::size_t p) {
  std::size_t lr_rows = 0, lr_cols = 0;
  try {
    lr_rows = decimated_extent(scene.rows(), p);
    lr_cols = decimated_extent(scene.cols(), p);
  } catch (const configuration_error& e) {
    throw dimension_error(e.what());
  }
  const double inv = 1.0 / static_cast<double>(p * p);
  SpectralCube out(lr_rows, lr_cols, scene.bands());
  for (std::size_t l = 0; l < scene.bands(); ++l) {
    for (std::size_t nu = 0; nu < lr_cols; ++nu) {
      for (std::size_t mu = 0; mu < lr_rows; ++mu) {
        double acc = 0.0;
        for (std::size_t b = 0; b < p; ++b) {
          for (std::size_t a = 0; a < p; ++a) acc += scene(mu * p + a, nu * p + b, l);
        }
        out(mu, nu, l) = acc * inv;
      }
    }
  }
  return out;
}

inline double mean_square(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sentinel for "noise disabled".
inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

// i.i.d. zero-mean Gaussian noise with variance mean(y^2) / 10^(snr/10).
inline SpectralCube add_gaussian_noise(const SpectralCube& y, double snr_db, std::uint64_t seed) {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw domain_error("Gaussian noise SNR must be finite or +inf");
  }
  if (snr_db == kNoiselessSnr) return y;
  const double sigma = std::sqrt(mean_square(y.data()) / std::pow(10.0, snr_db / 10.0));
  Rng rng(seed);
  SpectralCube out = y;
  for (double& v : out.data()) v += sigma * rng.normal();
  return out;
}

// Photon-count scale alpha so that the expected noise power of
// Poisson(alpha y) / alpha, namely mean(y) / alpha, sits snr_db below mean(y^2).
inline double poisson_scale_for_snr(const SpectralCube& y, double snr_db) {
  double mean = 0.0;
  for (double v : y.data()) mean += v;
  mean /= static_cast<double>(y.size());
  const double power = mean_square(y.data());
  if (!(mean > 0.0) || !(power > 0.0)) return 1.0;
  return std::pow(10.0, snr_db / 10.0) * mean / power;
}

inline SpectralCube add_poisson_noise_scaled(const SpectralCube& y, double scale,
                                             std::uint64_t seed) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw domain_error("Poisson scale must be positive");
  for (double v : y.data()) {
    if (v < 0.0) throw domain_error("Poisson noise requires non-negative measurements");
  }
  Rng rng(seed);
  SpectralCube out = y;
  for (double& v : out.data()) v = static_cast<double>(rng.poisson(scale * v)) / scale;
  return out;
}

struct PoissonNoiseResult {
  SpectralCube cube;
  double scale = 0.0;  // alpha; +inf when noise is disabled
};

inline PoissonNoiseResult add_poisson_noise(const SpectralCube& y, double snr_db,
                                            std::uint64_t seed) {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw domain_error("Poisson noise SNR must be finite or +inf");
  }
  for (double v : y.data()) {
    if (v < 0.0) throw domain_error("Poisson noise requires non-negative measurements");
  }
  if (snr_db == kNoiselessSnr) return {y, std::numeric_limits<double>::infinity()};
  const double scale = poisson_scale_for_snr(y, snr_db);
  return {add_poisson_noise_scaled(y, scale, seed), scale};
}

enum class NoiseKind { none, gaussian, poisson };

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::poisson: return "poisson";
    default: return "none";
  }
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "none") return NoiseKind::none;
  if (s == "gaussian") return NoiseKind::gaussian;
  if (s == "poisson") return NoiseKind::poisson;
  throw configuration_error("unknown noise kind '" + s + "' (none|gaussian|poisson)");
}

struct NoiseDescriptor {
  NoiseKind kind = NoiseKind::none;
  double snr_db = kNoiselessSnr;
  std::uint64_t seed = 0;
  // Photon scale per arm, set for Poisson noise.
  double poisson_scale_ms = 0.0;
  double poisson_scale_hs = 0.0;
};

struct MeasurementSet {
  SpectralCube y_ms;
  SpectralCube y_hs;
  NoiseDescriptor noise;
};

inline constexpr std::uint64_t kMsNoiseStream = 11;
inline constexpr std::uint64_t kHsNoiseStream = 12;

inline MeasurementSet simulate_measurements(const SpectralCube& scene, const ApertureDesign& design,
                                            NoiseDescriptor noise) {
  MeasurementSet out;
  out.y_ms = acquire_cmsi(scene, design.ms_bank, design.ms_patterns);
  out.y_hs = acquire_chsi(scene, design.hs_bank, design.hs_patterns, design.p);
  const auto ms_seed = mix_seed(noise.seed, kMsNoiseStream);
  const auto hs_seed = mix_seed(noise.seed, kHsNoiseStream);
  switch (noise.kind) {
    case NoiseKind::gaussian:
      out.y_ms = add_gaussian_noise(out.y_ms, noise.snr_db, ms_seed);
      out.y_hs = add_gaussian_noise(out.y_hs, noise.snr_db, hs_seed);
      break;
    case NoiseKind::poisson: {
      auto ms = add_poisson_noise(out.y_ms, noise.snr_db, ms_seed);
      auto hs = add_poisson_noise(out.y_hs, noise.snr_db, hs_seed);
      out.y_ms = std::move(ms.cube);
      out.y_hs = std::move(hs.cube);
      noise.poisson_scale_ms = ms.scale;
      noise.poisson_scale_hs = hs.scale;
      break;
    }
    case NoiseKind::none:
      noise.snr_db = kNoiselessSnr;
      break;
  }
  out.noise = noise;
  return out;
}

}  // namespace cassifuse

#endif  // CASSIFUSE_SENSING_HPP
