#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "svt/rng.hpp"

namespace svt {

// Dense row-major matrix of doubles. Vectors are 1 x n.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c); }
  static Matrix full(std::size_t r, std::size_t c, double v) {
    Matrix m(r, c);
    for (auto& x : m.data) x = v;
    return m;
  }
  static Matrix uniform(std::size_t r, std::size_t c, double lo, double hi,
                        Rng& rng) {
    Matrix m(r, c);
    for (auto& x : m.data) x = rng.uniform(lo, hi);
    return m;
  }

  std::size_t size() const { return rows * cols; }
  bool empty() const { return data.empty(); }

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  std::span<const double> row_span(std::size_t r) const {
    return {row(r), cols};
  }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }

  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

bool is_finite(const Matrix& m);

// Sum in an order that depends only on the multiset of values (sort, then
// accumulate left to right). Makes mean reductions exactly invariant to row
// permutations of their input.
double stable_sum(std::span<const double> values);

std::string shape_str(const Matrix& m);

}  // namespace svt
