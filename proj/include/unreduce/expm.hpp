#pragma once

#include <unsupported/Eigen/MatrixFunctions>

#include "unreduce/core.hpp"

namespace unreduce {

/// Matrix exponential via Pade approximation with scaling and squaring.
/// Accuracy on the algebra elements used here is well below 1e-12.
[[nodiscard]] inline Mat expm(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw validation_error("expm: matrix must be square, got " +
                           std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  return a.exp();
}

}  // namespace unreduce
