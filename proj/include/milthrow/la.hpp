#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace milthrow {

using Vector = std::vector<double>;

// Dense row-major matrix. Small enough on purpose: the scorer is a three
// layer perceptron and everything runs in 64-bit on the CPU.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t size() const { return data.size(); }
};

inline bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace milthrow
