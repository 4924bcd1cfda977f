#ifndef CASSIFUSE_LINEAR_MAP_HPP
#define CASSIFUSE_LINEAR_MAP_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cassifuse/errors.hpp"

namespace cassifuse {

// A real matrix of size rows() x cols() available through its action and the
// action of its transpose. Outputs are overwritten.
template <class Op>
concept LinearMap = requires(const Op& op, std::span<const double> in, std::span<double> out) {
  { op.rows() } -> std::convertible_to<std::size_t>;
  { op.cols() } -> std::convertible_to<std::size_t>;
  op.apply(in, out);
  op.apply_adjoint(in, out);
};

namespace detail {

inline void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw dimension_error(std::string(what) + ": length " + std::to_string(got) + ", expected " +
                          std::to_string(want));
  }
}

}  // namespace detail

template <LinearMap Op>
std::vector<double> apply(const Op& op, std::span<const double> x) {
  detail::require_length(x.size(), op.cols(), "apply input");
  std::vector<double> out(op.rows());
  op.apply(x, out);
  return out;
}

template <LinearMap Op>
std::vector<double> apply_adjoint(const Op& op, std::span<const double> v) {
  detail::require_length(v.size(), op.rows(), "adjoint input");
  std::vector<double> out(op.cols());
  op.apply_adjoint(v, out);
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  detail::require_length(b.size(), a.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm1(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

inline double norm_inf(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s = std::max(s, std::abs(v));
  return s;
}

// The identity on R^n.
class IdentityMap {
 public:
  explicit IdentityMap(std::size_t n) : n_(n) {}
  std::size_t rows() const noexcept { return n_; }
  std::size_t cols() const noexcept { return n_; }
  void apply(std::span<const double> in, std::span<double> out) const {
    std::copy(in.begin(), in.end(), out.begin());
  }
  void apply_adjoint(std::span<const double> in, std::span<double> out) const { apply(in, out); }

 private:
  std::size_t n_;
};

// The zero map R^cols -> R^rows.
class ZeroMap {
 public:
  ZeroMap(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  void apply(std::span<const double>, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
  }
  void apply_adjoint(std::span<const double>, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
  }

 private:
  std::size_t rows_, cols_;
};

}  // namespace cassifuse

#endif  // CASSIFUSE_LINEAR_MAP_HPP
