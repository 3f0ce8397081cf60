#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace urlb {

// Dense row-major matrix of 64-bit reals. Vectors are 1xN matrices.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), v(size_t(r) * c, fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Mat: negative shape");
  }

  double& operator()(int r, int c) { return v[size_t(r) * cols + c]; }
  double operator()(int r, int c) const { return v[size_t(r) * cols + c]; }

  double* row(int r) { return v.data() + size_t(r) * cols; }
  const double* row(int r) const { return v.data() + size_t(r) * cols; }

  size_t size() const { return v.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  static Mat row_vector(std::vector<double> data) {
    Mat m;
    m.rows = 1;
    m.cols = int(data.size());
    m.v = std::move(data);
    return m;
  }

  std::string shape_str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

inline bool all_finite(const Mat& m) {
  for (double x : m.v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Column-wise concatenation; either side may have zero columns.
inline Mat hconcat(const Mat& a, const Mat& b) {
  if (a.cols == 0) return b;
  if (b.cols == 0) return a;
  if (a.rows != b.rows) throw std::invalid_argument("hconcat: row mismatch");
  Mat out(a.rows, a.cols + b.cols);
  for (int r = 0; r < a.rows; ++r) {
    for (int c = 0; c < a.cols; ++c) out(r, c) = a(r, c);
    for (int c = 0; c < b.cols; ++c) out(r, a.cols + c) = b(r, c);
  }
  return out;
}

// Columns [c0, c1) as a new matrix.
inline Mat col_slice(const Mat& m, int c0, int c1) {
  if (c0 < 0 || c1 < c0 || c1 > m.cols) throw std::invalid_argument("col_slice: bad range");
  Mat out(m.rows, c1 - c0);
  for (int r = 0; r < m.rows; ++r)
    for (int c = c0; c < c1; ++c) out(r, c - c0) = m(r, c);
  return out;
}

}  // namespace urlb
