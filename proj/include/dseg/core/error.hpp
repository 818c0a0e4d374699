#pragma once

#include <stdexcept>
#include <string>

namespace dseg {

// Validation errors (bad input, bad geometry, bad files) are reported by the
// CLI with exit status 1; everything else derived from `error` maps to 2.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct validation_error : error {
  using error::error;
};

struct invalid_input : validation_error {
  using validation_error::validation_error;
};

struct invalid_geometry : validation_error {
  using validation_error::validation_error;
};

struct load_error : validation_error {
  using validation_error::validation_error;
};

struct shape_error : error {
  using error::error;
};

struct numeric_error : error {
  using error::error;
};

struct training_error : error {
  training_error(const std::string& what, int epoch_index)
      : error(what + " (epoch " + std::to_string(epoch_index) + ")"), epoch(epoch_index) {}
  int epoch;
};

struct generation_error : error {
  using error::error;
};

struct degenerate_sample : error {
  using error::error;
};

struct search_error : error {
  using error::error;
};

}  // namespace dseg
