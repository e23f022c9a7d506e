#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rdlm {

// Dense row-major float matrix. Everything at desk scale runs through plain
// scalar loops with double accumulators: fixed evaluation order keeps runs
// bit-reproducible, which the equivalence tests rely on.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0f) {}

  float* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const float* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
  float& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  float at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  bool all_finite() const {
    for (float v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

inline double dot(const float* a, const float* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

// y = m * x, with m of shape (out x in).
inline void matvec(const Mat& m, const float* x, float* y) {
  for (int i = 0; i < m.rows; ++i) {
    y[i] = static_cast<float>(dot(m.row(i), x, m.cols));
  }
}

inline double l2_norm(const float* a, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * a[i];
  return std::sqrt(acc);
}

inline double l2_dist(const float* a, const float* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace rdlm
