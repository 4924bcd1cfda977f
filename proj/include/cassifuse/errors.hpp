#ifndef CASSIFUSE_ERRORS_HPP
#define CASSIFUSE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cassifuse {

// Sizes or lengths that do not agree.
class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid parameters: divisibility, ranges, unknown names.
class configuration_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A solver or trainer produced a non-finite value.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(const std::string& what, std::size_t iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

// Labelled data that cannot support the requested experiment.
class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Base for everything raised while reading artifacts.
class load_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class header_error : public load_error {
 public:
  using load_error::load_error;
};

class length_mismatch_error : public load_error {
 public:
  length_mismatch_error(std::size_t expected, std::size_t actual)
      : load_error("raster length mismatch: expected " + std::to_string(expected) +
                   " bytes, found " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}
  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

class non_finite_error : public load_error {
 public:
  using load_error::load_error;
};

class parse_error : public load_error {
 public:
  using load_error::load_error;
};

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required input artifact does not exist.
class missing_input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cassifuse

#endif  // CASSIFUSE_ERRORS_HPP
