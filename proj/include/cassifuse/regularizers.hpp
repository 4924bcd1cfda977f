#ifndef CASSIFUSE_REGULARIZERS_HPP
#define CASSIFUSE_REGULARIZERS_HPP

// Regularization operators on an M x N x K feature grid: first-order
// differences (total variation) and a per-band orthonormal 2-D Haar transform.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "cassifuse/errors.hpp"
#include "cassifuse/linear_map.hpp"

namespace cassifuse {

// Forward differences along rows, columns and bands, stacked in that order:
//   d_r(i,j,k) = x(i,j,k) - x(i+1,j,k)
//   d_c(i,j,k) = x(i,j,k) - x(i,j+1,k)
//   d_b(i,j,k) = x(i,j,k) - x(i,j,k+1)
// with zero where the neighbour falls outside the grid.
class DifferenceOperator {
 public:
  DifferenceOperator(std::size_t rows, std::size_t cols, std::size_t bands)
      : m_(rows), n_(cols), k_(bands) {
    if (rows == 0 || cols == 0 || bands == 0) throw dimension_error("grid sizes must be positive");
  }

  std::size_t grid_rows() const noexcept { return m_; }
  std::size_t grid_cols() const noexcept { return n_; }
  std::size_t grid_bands() const noexcept { return k_; }

  std::size_t rows() const noexcept { return 3 * cols(); }
  std::size_t cols() const noexcept { return m_ * n_ * k_; }

  void apply(std::span<const double> x, std::span<double> d) const {
    detail::require_length(x.size(), cols(), "difference input");
    detail::require_length(d.size(), rows(), "difference output");
    const std::size_t len = cols(), plane = m_ * n_;
    auto dr = d.subspan(0, len), dc = d.subspan(len, len), db = d.subspan(2 * len, len);
    for (std::size_t b = 0; b < k_; ++b) {
      for (std::size_t j = 0; j < n_; ++j) {
        for (std::size_t i = 0; i < m_; ++i) {
          const std::size_t at = i + j * m_ + b * plane;
          const double v = x[at];
          dr[at] = i + 1 < m_ ? v - x[at + 1] : 0.0;
          dc[at] = j + 1 < n_ ? v - x[at + m_] : 0.0;
          db[at] = b + 1 < k_ ? v - x[at + plane] : 0.0;
        }
      }
    }
  }

  void apply_adjoint(std::span<const double> d, std::span<double> x) const {
    detail::require_length(d.size(), rows(), "difference adjoint input");
    detail::require_length(x.size(), cols(), "difference adjoint output");
    const std::size_t len = cols(), plane = m_ * n_;
    auto dr = d.subspan(0, len), dc = d.subspan(len, len), db = d.subspan(2 * len, len);
    for (std::size_t b = 0; b < k_; ++b) {
      for (std::size_t j = 0; j < n_; ++j) {
        for (std::size_t i = 0; i < m_; ++i) {
          const std::size_t at = i + j * m_ + b * plane;
          double v = 0.0;
          if (i + 1 < m_) v += dr[at];
          if (i > 0) v -= dr[at - 1];
          if (j + 1 < n_) v += dc[at];
          if (j > 0) v -= dc[at - m_];
          if (b + 1 < k_) v += db[at];
          if (b > 0) v -= db[at - plane];
          x[at] = v;
        }
      }
    }
  }

  // ||Phi x||_1.
  double tv_norm(std::span<const double> x) const {
    std::vector<double> d(rows());
    apply(x, d);
    return norm1(d);
  }

 private:
  std::size_t m_, n_, k_;
};

// One level of the orthonormal Haar analysis on `n` samples spaced `stride`
// apart: averages (a+b)/sqrt2 to the first half, details (a-b)/sqrt2 to the
// second. `scratch` needs n entries.
inline void haar_analysis_step(double* data, std::size_t n, std::size_t stride, double* scratch) {
  constexpr double s = std::numbers::sqrt2 / 2.0;
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double a = data[(2 * i) * stride], b = data[(2 * i + 1) * stride];
    scratch[i] = (a + b) * s;
    scratch[half + i] = (a - b) * s;
  }
  for (std::size_t i = 0; i < n; ++i) data[i * stride] = scratch[i];
}

inline void haar_synthesis_step(double* data, std::size_t n, std::size_t stride, double* scratch) {
  constexpr double s = std::numbers::sqrt2 / 2.0;
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double a = data[i * stride], d = data[(half + i) * stride];
    scratch[2 * i] = (a + d) * s;
    scratch[2 * i + 1] = (a - d) * s;
  }
  for (std::size_t i = 0; i < n; ++i) data[i * stride] = scratch[i];
}

// Per-band 2-D orthonormal Haar decomposition with `levels` levels (Mallat
// layout, approximation in the leading corner). apply() gives the analysis
// coefficients Psi^T x; apply_adjoint() the synthesis Psi c.
class WaveletOperator {
 public:
  WaveletOperator(std::size_t rows, std::size_t cols, std::size_t bands, std::size_t levels)
      : m_(rows), n_(cols), k_(bands), levels_(levels) {
    if (rows == 0 || cols == 0 || bands == 0) throw dimension_error("grid sizes must be positive");
    const std::size_t f = std::size_t{1} << levels;
    if (levels > 30 || rows % f != 0 || cols % f != 0) {
      throw configuration_error(std::to_string(levels) + " Haar levels need rows and cols divisible by " +
                                std::to_string(f) + "; grid is " + std::to_string(rows) + "x" +
                                std::to_string(cols));
    }
  }

  std::size_t rows() const noexcept { return cols(); }
  std::size_t cols() const noexcept { return m_ * n_ * k_; }
  std::size_t levels() const noexcept { return levels_; }

  void apply(std::span<const double> x, std::span<double> c) const {
    detail::require_length(x.size(), cols(), "wavelet input");
    detail::require_length(c.size(), rows(), "wavelet output");
    std::copy(x.begin(), x.end(), c.begin());
    std::vector<double> scratch(std::max(m_, n_));
    for (std::size_t b = 0; b < k_; ++b) {
      double* band = c.data() + b * m_ * n_;
      for (std::size_t l = 0; l < levels_; ++l) {
        const std::size_t ml = m_ >> l, nl = n_ >> l;
        for (std::size_t j = 0; j < nl; ++j) haar_analysis_step(band + j * m_, ml, 1, scratch.data());
        for (std::size_t i = 0; i < ml; ++i) haar_analysis_step(band + i, nl, m_, scratch.data());
      }
    }
  }

  void apply_adjoint(std::span<const double> c, std::span<double> x) const {
    detail::require_length(c.size(), rows(), "wavelet synthesis input");
    detail::require_length(x.size(), cols(), "wavelet synthesis output");
    std::copy(c.begin(), c.end(), x.begin());
    std::vector<double> scratch(std::max(m_, n_));
    for (std::size_t b = 0; b < k_; ++b) {
      double* band = x.data() + b * m_ * n_;
      for (std::size_t l = levels_; l-- > 0;) {
        const std::size_t ml = m_ >> l, nl = n_ >> l;
        for (std::size_t i = 0; i < ml; ++i) haar_synthesis_step(band + i, nl, m_, scratch.data());
        for (std::size_t j = 0; j < nl; ++j) haar_synthesis_step(band + j * m_, ml, 1, scratch.data());
      }
    }
  }

 private:
  std::size_t m_, n_, k_, levels_;
};

inline std::vector<double> wavelet_forward(const WaveletOperator& psi, std::span<const double> x) {
  return apply(psi, x);
}

inline std::vector<double> wavelet_inverse(const WaveletOperator& psi, std::span<const double> c) {
  return apply_adjoint(psi, c);
}

inline std::vector<double> tv_forward(const DifferenceOperator& phi, std::span<const double> x) {
  return apply(phi, x);
}

inline std::vector<double> tv_adjoint(const DifferenceOperator& phi, std::span<const double> d) {
  return apply_adjoint(phi, d);
}

}  // namespace cassifuse

#endif  // CASSIFUSE_REGULARIZERS_HPP
