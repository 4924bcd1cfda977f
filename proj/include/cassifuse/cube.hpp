#ifndef CASSIFUSE_CUBE_HPP
#define CASSIFUSE_CUBE_HPP

// Core value types: spectral cubes, filter banks, coded-aperture pattern cubes
// and label maps.
//
// Every raster shares one linear index convention. With 1-based (m, n, b) the
// linear index is m + (n-1) M + (b-1) M N, i.e. column-major within a band and
// band-sequential. Storage and accessors here are 0-based; files and messages
// use the 1-based form.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cassifuse/errors.hpp"

namespace cassifuse {

namespace detail {

inline void require_positive(std::size_t v, const char* name) {
  if (v == 0) throw dimension_error(std::string(name) + " must be positive");
}

}  // namespace detail

class SpectralCube {
 public:
  SpectralCube() = default;

  SpectralCube(std::size_t rows, std::size_t cols, std::size_t bands)
      : rows_(rows), cols_(cols), bands_(bands) {
    detail::require_positive(rows, "rows");
    detail::require_positive(cols, "cols");
    detail::require_positive(bands, "bands");
    data_.assign(rows * cols * bands, 0.0);
  }

  SpectralCube(std::size_t rows, std::size_t cols, std::size_t bands, std::vector<double> data)
      : rows_(rows), cols_(cols), bands_(bands), data_(std::move(data)) {
    detail::require_positive(rows, "rows");
    detail::require_positive(cols, "cols");
    detail::require_positive(bands, "bands");
    if (data_.size() != rows * cols * bands) {
      throw dimension_error("cube data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(rows) + "x" +
                            std::to_string(cols) + "x" + std::to_string(bands));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw domain_error("non-finite cube entry at linear index " + std::to_string(i + 1));
      }
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t pixels() const noexcept { return rows_ * cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::size_t m, std::size_t n, std::size_t b) const noexcept {
    return m + n * rows_ + b * rows_ * cols_;
  }

  double operator()(std::size_t m, std::size_t n, std::size_t b) const noexcept {
    return data_[index(m, n, b)];
  }
  double& operator()(std::size_t m, std::size_t n, std::size_t b) noexcept {
    return data_[index(m, n, b)];
  }

  std::span<const double> band(std::size_t b) const noexcept {
    return {data_.data() + b * pixels(), pixels()};
  }
  std::span<double> band(std::size_t b) noexcept { return {data_.data() + b * pixels(), pixels()}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool same_shape(const SpectralCube& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_ && bands_ == other.bands_;
  }

  friend bool operator==(const SpectralCube&, const SpectralCube&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t bands_ = 0;
  std::vector<double> data_;
};

inline std::vector<double> cube_as_vector(const SpectralCube& cube) {
  return {cube.data().begin(), cube.data().end()};
}

inline SpectralCube vector_as_cube(std::vector<double> v, std::size_t rows, std::size_t cols,
                                   std::size_t bands) {
  return SpectralCube(rows, cols, bands, std::move(v));
}

inline SpectralCube vector_as_cube(std::span<const double> v, std::size_t rows, std::size_t cols,
                                   std::size_t bands) {
  return SpectralCube(rows, cols, bands, std::vector<double>(v.begin(), v.end()));
}

// Binary L x P matrix of filter responses. Columns are non-overlapping and
// together cover every band.
class FilterBank {
 public:
  FilterBank() = default;

  // `responses` is column-major: entry (band l, filter i) at l + i * bands.
  FilterBank(std::size_t bands, std::size_t count, std::vector<std::uint8_t> responses)
      : bands_(bands), count_(count), responses_(std::move(responses)) {
    detail::require_positive(bands, "filter bank bands");
    detail::require_positive(count, "filter count");
    if (responses_.size() != bands * count) {
      throw dimension_error("filter bank needs " + std::to_string(bands * count) + " entries");
    }
    for (auto r : responses_) {
      if (r > 1) throw configuration_error("filter responses must be binary");
    }
    for (std::size_t i = 0; i < count; ++i) {
      const auto col = column(i);
      if (std::none_of(col.begin(), col.end(), [](std::uint8_t r) { return r == 1; })) {
        throw configuration_error("filter " + std::to_string(i + 1) + " passes no band");
      }
    }
    for (std::size_t l = 0; l < bands; ++l) {
      std::size_t sum = 0;
      for (std::size_t i = 0; i < count; ++i) sum += (*this)(l, i);
      if (sum != 1) {
        throw configuration_error("band " + std::to_string(l + 1) + " is covered by " +
                                  std::to_string(sum) + " filters; expected exactly 1");
      }
    }
  }

  std::size_t bands() const noexcept { return bands_; }
  std::size_t count() const noexcept { return count_; }

  std::uint8_t operator()(std::size_t band, std::size_t filter) const noexcept {
    return responses_[band + filter * bands_];
  }

  std::span<const std::uint8_t> column(std::size_t filter) const noexcept {
    return {responses_.data() + filter * bands_, bands_};
  }

  // Index of the unique filter passing `band`.
  std::size_t filter_of_band(std::size_t band) const noexcept {
    for (std::size_t i = 0; i < count_; ++i) {
      if ((*this)(band, i)) return i;
    }
    return count_;
  }

  std::span<const std::uint8_t> responses() const noexcept { return responses_; }

  friend bool operator==(const FilterBank&, const FilterBank&) = default;

 private:
  std::size_t bands_ = 0;
  std::size_t count_ = 0;
  std::vector<std::uint8_t> responses_;
};

// Per-pixel filter indices for each snapshot. Entries are 1-based filter ids.
class PatternCube {
 public:
  PatternCube() = default;

  PatternCube(std::size_t rows, std::size_t cols, std::size_t snapshots, std::size_t filter_count,
              std::vector<std::uint32_t> indices)
      : rows_(rows),
        cols_(cols),
        snapshots_(snapshots),
        filter_count_(filter_count),
        indices_(std::move(indices)) {
    detail::require_positive(rows, "pattern rows");
    detail::require_positive(cols, "pattern cols");
    detail::require_positive(snapshots, "snapshots");
    detail::require_positive(filter_count, "filter count");
    if (indices_.size() != rows * cols * snapshots) {
      throw dimension_error("pattern cube needs " + std::to_string(rows * cols * snapshots) +
                            " entries, got " + std::to_string(indices_.size()));
    }
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (indices_[i] < 1 || indices_[i] > filter_count) {
        throw configuration_error("pattern entry " + std::to_string(indices_[i]) +
                                  " at linear index " + std::to_string(i + 1) + " outside 1.." +
                                  std::to_string(filter_count));
      }
    }
    if (snapshots <= filter_count) {
      std::vector<std::uint8_t> seen(filter_count + 1);
      for (std::size_t n = 0; n < cols; ++n) {
        for (std::size_t m = 0; m < rows; ++m) {
          std::fill(seen.begin(), seen.end(), 0);
          for (std::size_t k = 0; k < snapshots; ++k) {
            auto s = (*this)(m, n, k);
            if (seen[s]++) {
              throw configuration_error("pixel (" + std::to_string(m + 1) + "," +
                                        std::to_string(n + 1) + ") repeats filter " +
                                        std::to_string(s));
            }
          }
        }
      }
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t snapshots() const noexcept { return snapshots_; }
  std::size_t filter_count() const noexcept { return filter_count_; }

  std::uint32_t operator()(std::size_t m, std::size_t n, std::size_t k) const noexcept {
    return indices_[m + n * rows_ + k * rows_ * cols_];
  }

  std::span<const std::uint32_t> indices() const noexcept { return indices_; }

  friend bool operator==(const PatternCube&, const PatternCube&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t snapshots_ = 0;
  std::size_t filter_count_ = 0;
  std::vector<std::uint32_t> indices_;
};

// Class raster; 0 marks unlabelled pixels, classes are 1..C.
class LabelMap {
 public:
  LabelMap() = default;

  // class_count == 0 takes the largest label present.
  LabelMap(std::size_t rows, std::size_t cols, std::vector<std::uint32_t> labels,
           std::size_t class_count = 0)
      : rows_(rows), cols_(cols), labels_(std::move(labels)) {
    detail::require_positive(rows, "label rows");
    detail::require_positive(cols, "label cols");
    if (labels_.size() != rows * cols) {
      throw dimension_error("label map needs " + std::to_string(rows * cols) + " entries");
    }
    const std::uint32_t max_label = *std::max_element(labels_.begin(), labels_.end());
    if (max_label == 0) throw data_error("label map has no labelled pixels");
    class_count_ = class_count == 0 ? max_label : class_count;
    if (max_label > class_count_) {
      throw data_error("label " + std::to_string(max_label) + " exceeds class count " +
                       std::to_string(class_count_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t class_count() const noexcept { return class_count_; }

  std::uint32_t operator()(std::size_t m, std::size_t n) const noexcept {
    return labels_[m + n * rows_];
  }

  std::span<const std::uint32_t> labels() const noexcept { return labels_; }

  std::size_t labelled_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(labels_.begin(), labels_.end(), [](std::uint32_t v) { return v != 0; }));
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t class_count_ = 0;
  std::vector<std::uint32_t> labels_;
};

}  // namespace cassifuse

#endif  // CASSIFUSE_CUBE_HPP
