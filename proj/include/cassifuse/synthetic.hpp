#ifndef CASSIFUSE_SYNTHETIC_HPP
#define CASSIFUSE_SYNTHETIC_HPP

// Built-in test scene: piecewise-constant class regions (a Voronoi partition
// of random sites) carrying per-class spectra made of Gaussian bumps, with
// per-pixel brightness and band noise so classes are not trivially separable.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "cassifuse/cube.hpp"
#include "cassifuse/errors.hpp"
#include "cassifuse/random.hpp"

namespace cassifuse {

struct SyntheticSceneConfig {
  std::size_t rows = 64;
  std::size_t cols = 64;
  std::size_t bands = 16;
  std::size_t classes = 4;
  std::size_t regions = 12;       // Voronoi sites; site s carries class s mod C
  std::size_t bumps = 3;          // Gaussian bumps per class spectrum
  double brightness_spread = 0.1; // per-pixel gain ~ U(1 - s, 1 + s)
  double band_noise = 0.03;       // per-entry Gaussian, relative to the class mean level
  std::uint64_t seed = 0;

  void validate() const {
    if (rows == 0 || cols == 0 || bands == 0) throw configuration_error("scene sizes must be positive");
    if (classes == 0) throw configuration_error("scene needs at least one class");
    if (regions < classes) throw configuration_error("regions must be >= classes");
    if (regions > rows * cols) throw configuration_error("more regions than pixels");
    if (bumps == 0) throw configuration_error("bumps must be positive");
    if (!(brightness_spread >= 0.0 && brightness_spread < 1.0)) {
      throw configuration_error("brightness_spread must lie in [0, 1)");
    }
    if (!(band_noise >= 0.0)) throw configuration_error("band_noise must be >= 0");
  }
};

struct SyntheticScene {
  SpectralCube cube;
  LabelMap labels;
  std::vector<double> signatures;  // classes x bands, row-major
};

inline std::vector<double> class_signatures(std::size_t classes, std::size_t bands,
                                            std::size_t bumps, Rng& rng) {
  std::vector<double> sig(classes * bands);
  const double l = static_cast<double>(bands);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t b = 0; b < bumps; ++b) {
      const double centre = rng.uniform(0.0, l);
      const double width = rng.uniform(l / 10.0, l / 4.0);
      const double amp = rng.uniform(0.2, 1.0);
      for (std::size_t i = 0; i < bands; ++i) {
        const double d = (static_cast<double>(i) - centre) / width;
        sig[c * bands + i] += amp * std::exp(-0.5 * d * d);
      }
    }
    for (std::size_t i = 0; i < bands; ++i) sig[c * bands + i] += 0.1;
  }
  return sig;
}

inline SyntheticScene make_synthetic_scene(const SyntheticSceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SyntheticScene s;
  s.signatures = class_signatures(cfg.classes, cfg.bands, cfg.bumps, rng);

  std::vector<double> site_m(cfg.regions), site_n(cfg.regions);
  for (std::size_t r = 0; r < cfg.regions; ++r) {
    site_m[r] = rng.uniform(0.0, static_cast<double>(cfg.rows));
    site_n[r] = rng.uniform(0.0, static_cast<double>(cfg.cols));
  }

  const std::size_t plane = cfg.rows * cfg.cols;
  std::vector<std::uint32_t> labels(plane);
  std::vector<double> data(plane * cfg.bands);
  for (std::size_t n = 0; n < cfg.cols; ++n) {
    for (std::size_t m = 0; m < cfg.rows; ++m) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < cfg.regions; ++r) {
        const double dm = static_cast<double>(m) + 0.5 - site_m[r];
        const double dn = static_cast<double>(n) + 0.5 - site_n[r];
        const double d = dm * dm + dn * dn;
        if (d < best_d) {
          best_d = d;
          best = r;
        }
      }
      const std::size_t c = best % cfg.classes;
      labels[m + n * cfg.rows] = static_cast<std::uint32_t>(c + 1);
      const double gain = rng.uniform(1.0 - cfg.brightness_spread, 1.0 + cfg.brightness_spread);
      double level = 0.0;
      for (std::size_t b = 0; b < cfg.bands; ++b) level += s.signatures[c * cfg.bands + b];
      level /= static_cast<double>(cfg.bands);
      for (std::size_t b = 0; b < cfg.bands; ++b) {
        const double v = gain * s.signatures[c * cfg.bands + b] + cfg.band_noise * level * rng.normal();
        data[m + n * cfg.rows + b * plane] = v > 0.0 ? v : 0.0;
      }
    }
  }
  s.cube = SpectralCube(cfg.rows, cfg.cols, cfg.bands, std::move(data));
  s.labels = LabelMap(cfg.rows, cfg.cols, std::move(labels), cfg.classes);
  return s;
}

}  // namespace cassifuse

#endif  // CASSIFUSE_SYNTHETIC_HPP
