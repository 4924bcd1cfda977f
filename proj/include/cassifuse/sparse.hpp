#ifndef CASSIFUSE_SPARSE_HPP
#define CASSIFUSE_SPARSE_HPP

// Compressed-row projection matrices that map fused features (M x N x K,
// filter-ordered bands) to each arm's measurements.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cassifuse/aperture.hpp"
#include "cassifuse/cube.hpp"
#include "cassifuse/errors.hpp"
#include "cassifuse/linear_map.hpp"

namespace cassifuse {

class SparseProjection {
 public:
  SparseProjection() = default;

  SparseProjection(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                   std::vector<std::size_t> col_idx, std::vector<double> values)
      : rows_(rows),
        cols_(cols),
        row_ptr_(std::move(row_ptr)),
        col_idx_(std::move(col_idx)),
        values_(std::move(values)) {
    if (row_ptr_.size() != rows_ + 1 || row_ptr_.front() != 0 ||
        row_ptr_.back() != col_idx_.size() || col_idx_.size() != values_.size()) {
      throw dimension_error("inconsistent compressed-row arrays");
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      if (row_ptr_[r] > row_ptr_[r + 1]) throw dimension_error("row pointers must not decrease");
      for (std::size_t e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) {
        if (col_idx_[e] >= cols_) {
          throw dimension_error("column index " + std::to_string(col_idx_[e] + 1) +
                                " out of range in row " + std::to_string(r + 1));
        }
        if (e > row_ptr_[r] && col_idx_[e] <= col_idx_[e - 1]) {
          throw dimension_error("column indices not strictly increasing in row " +
                                std::to_string(r + 1));
        }
      }
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::size_t row_size(std::size_t r) const noexcept { return row_ptr_[r + 1] - row_ptr_[r]; }
  std::span<const std::size_t> row_columns(std::size_t r) const noexcept {
    return {col_idx_.data() + row_ptr_[r], row_size(r)};
  }
  std::span<const double> row_values(std::size_t r) const noexcept {
    return {values_.data() + row_ptr_[r], row_size(r)};
  }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  void apply(std::span<const double> x, std::span<double> out) const {
    detail::require_length(x.size(), cols_, "projection input");
    detail::require_length(out.size(), rows_, "projection output");
    for (std::size_t r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (std::size_t e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) acc += values_[e] * x[col_idx_[e]];
      out[r] = acc;
    }
  }

  void apply_adjoint(std::span<const double> v, std::span<double> out) const {
    detail::require_length(v.size(), rows_, "adjoint input");
    detail::require_length(out.size(), cols_, "adjoint output");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      const double vr = v[r];
      for (std::size_t e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) out[col_idx_[e]] += values_[e] * vr;
    }
  }

  // Coordinate triplets, 1-based, tab-separated, one entry per line.
  void write_triplets(std::ostream& os) const {
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) {
        os << r + 1 << '\t' << col_idx_[e] + 1 << '\t' << values_[e] << '\n';
      }
    }
    os.precision(old);
  }

  // Measurement rate: rows / cols.
  double rate() const noexcept { return static_cast<double>(rows_) / static_cast<double>(cols_); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

// Multispectral projection of (M*N*W) x (M*N*K). Row (m, n, w) sums the q
// feature bands (S-1)q + 1 .. Sq at pixel (m, n), S = s_ms(m, n, w).
inline SparseProjection build_ms_projection(const PatternCube& s_ms, std::size_t feature_bands,
                                            std::size_t q) {
  if (q == 0) throw configuration_error("spectral factor q must be positive");
  const std::size_t m_rows = s_ms.rows(), n_cols = s_ms.cols(), w_snaps = s_ms.snapshots();
  const std::size_t plane = m_rows * n_cols;
  std::vector<std::size_t> ptr(plane * w_snaps + 1, 0);
  std::vector<std::size_t> col;
  std::vector<double> val;
  col.reserve(plane * w_snaps * q);
  val.reserve(plane * w_snaps * q);
  std::size_t row = 0;
  for (std::size_t w = 0; w < w_snaps; ++w) {
    for (std::size_t n = 0; n < n_cols; ++n) {
      for (std::size_t m = 0; m < m_rows; ++m, ++row) {
        const std::size_t s = s_ms(m, n, w);
        if (s * q > feature_bands) {
          throw configuration_error("multispectral pattern id " + std::to_string(s) + " with q=" +
                                    std::to_string(q) + " addresses band " + std::to_string(s * q) +
                                    " beyond 1.." + std::to_string(feature_bands));
        }
        for (std::size_t z = 0; z < q; ++z) {
          const std::size_t b = (s - 1) * q + z;
          col.push_back(m + n * m_rows + b * plane);
          val.push_back(1.0);
        }
        ptr[row + 1] = col.size();
      }
    }
  }
  return SparseProjection(plane * w_snaps, plane * feature_bands, std::move(ptr), std::move(col),
                          std::move(val));
}

// Hyperspectral projection of ((M/p)(N/p)K) x (M*N*K). Row (mu, nu, k) averages
// feature band s_hs(mu, nu, k) over the p x p block of pixel (mu, nu).
inline SparseProjection build_hs_projection(const PatternCube& s_hs, std::size_t rows,
                                            std::size_t cols, std::size_t feature_bands,
                                            std::size_t p) {
  const std::size_t lr_rows = decimated_extent(rows, p);
  const std::size_t lr_cols = decimated_extent(cols, p);
  if (s_hs.rows() != lr_rows || s_hs.cols() != lr_cols) {
    throw configuration_error("hyperspectral patterns must lie on the " + std::to_string(lr_rows) +
                              "x" + std::to_string(lr_cols) + " grid");
  }
  const std::size_t plane = rows * cols;
  const std::size_t lr_plane = lr_rows * lr_cols;
  const std::size_t k_snaps = s_hs.snapshots();
  const double weight = 1.0 / static_cast<double>(p * p);
  std::vector<std::size_t> ptr(lr_plane * k_snaps + 1, 0);
  std::vector<std::size_t> col;
  std::vector<double> val;
  col.reserve(lr_plane * k_snaps * p * p);
  val.reserve(lr_plane * k_snaps * p * p);
  std::size_t row = 0;
  for (std::size_t k = 0; k < k_snaps; ++k) {
    for (std::size_t nu = 0; nu < lr_cols; ++nu) {
      for (std::size_t mu = 0; mu < lr_rows; ++mu, ++row) {
        const std::size_t s = s_hs(mu, nu, k);
        if (s > feature_bands) {
          throw configuration_error("hyperspectral pattern id " + std::to_string(s) +
                                    " beyond 1.." + std::to_string(feature_bands));
        }
        const std::size_t offset = (s - 1) * plane;
        for (std::size_t b = 0; b < p; ++b) {
          for (std::size_t a = 0; a < p; ++a) {
            col.push_back(mu * p + a + (nu * p + b) * rows + offset);
            val.push_back(weight);
          }
        }
        ptr[row + 1] = col.size();
      }
    }
  }
  return SparseProjection(lr_plane * k_snaps, plane * feature_bands, std::move(ptr), std::move(col),
                          std::move(val));
}

// [top; bottom].
inline SparseProjection stack_projections(const SparseProjection& top,
                                          const SparseProjection& bottom) {
  if (top.cols() != bottom.cols()) {
    throw dimension_error("cannot stack projections with " + std::to_string(top.cols()) + " and " +
                          std::to_string(bottom.cols()) + " columns");
  }
  std::vector<std::size_t> ptr(top.row_ptr().begin(), top.row_ptr().end());
  ptr.reserve(top.rows() + bottom.rows() + 1);
  for (std::size_t r = 1; r <= bottom.rows(); ++r) ptr.push_back(top.nnz() + bottom.row_ptr()[r]);
  std::vector<std::size_t> col(top.col_idx().begin(), top.col_idx().end());
  col.insert(col.end(), bottom.col_idx().begin(), bottom.col_idx().end());
  std::vector<double> val(top.values().begin(), top.values().end());
  val.insert(val.end(), bottom.values().begin(), bottom.values().end());
  return SparseProjection(top.rows() + bottom.rows(), top.cols(), std::move(ptr), std::move(col),
                          std::move(val));
}

inline SparseProjection identity_projection(std::size_t n) {
  std::vector<std::size_t> ptr(n + 1), col(n);
  for (std::size_t i = 0; i < n; ++i) {
    ptr[i + 1] = i + 1;
    col[i] = i;
  }
  return SparseProjection(n, n, std::move(ptr), std::move(col), std::vector<double>(n, 1.0));
}

// Both arms of a design, stacked as [H_ms; H_hs].
struct ProjectionSet {
  SparseProjection ms;
  SparseProjection hs;
  SparseProjection stacked;
};

inline ProjectionSet build_projections(const ApertureDesign& d) {
  ProjectionSet s;
  s.ms = build_ms_projection(d.ms_patterns, d.feature_bands(), d.q);
  s.hs = build_hs_projection(d.hs_patterns, d.rows, d.cols, d.feature_bands(), d.p);
  s.stacked = stack_projections(s.ms, s.hs);
  return s;
}

}  // namespace cassifuse

#endif  // CASSIFUSE_SPARSE_HPP
