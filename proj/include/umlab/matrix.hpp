#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace umlab {

// Dense square matrix, row-major. Rows are contiguous; eigenvectors are
// stored as columns, so per-row access patterns dominate every kernel here.
template <class T>
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::int64_t n)
      : n_(n), a_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {}

  std::int64_t dim() const { return n_; }

  T& operator()(std::int64_t i, std::int64_t j) {
    return a_[static_cast<std::size_t>(i) * n_ + j];
  }
  const T& operator()(std::int64_t i, std::int64_t j) const {
    return a_[static_cast<std::size_t>(i) * n_ + j];
  }

  T* row(std::int64_t i) { return a_.data() + static_cast<std::size_t>(i) * n_; }
  const T* row(std::int64_t i) const {
    return a_.data() + static_cast<std::size_t>(i) * n_;
  }

  T* data() { return a_.data(); }
  const T* data() const { return a_.data(); }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::int64_t n_ = 0;
  std::vector<T> a_;
};

using RealMatrix = DenseMatrix<double>;
using ComplexMatrix = DenseMatrix<std::complex<double>>;

template <class T>
double max_abs(const DenseMatrix<T>& m) {
  double best = 0.0;
  const std::int64_t n = m.dim();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      best = std::max(best, std::abs(m(i, j)));
  return best;
}

}  // namespace umlab
