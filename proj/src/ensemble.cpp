#include "umlab/ensemble.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace umlab {

double level_coefficient(double c, int r) {
  return std::exp2(-(1.0 + c) * static_cast<double>(r) / 2.0);
}

double normalizer_squared(int n, double c) {
  (void)sites_at_level(n);  // range check
  double z2 = 0.0;
  for (int r = 0; r <= n; ++r)
    z2 += std::exp2(-(1.0 + c) * r) * (1.0 + std::ldexp(1.0, -r));
  return z2;
}

double normalizer(int n, double c) { return std::sqrt(normalizer_squared(n, c)); }

double entry_variance(SiteIndex x, SiteIndex y, const EnsembleParams& params) {
  if (x.level != params.n || y.level != params.n)
    throw std::invalid_argument("entry_variance: sites must live at level n");
  const int d = distance(x, y);
  double v = 0.0;
  if (d == 0) {
    for (int r = 0; r <= params.n; ++r)
      v += std::exp2(-(1.0 + params.c) * r) * std::ldexp(2.0, -r);
  } else {
    for (int r = d; r <= params.n; ++r)
      v += std::exp2(-(1.0 + params.c) * r) * std::ldexp(1.0, -r);
  }
  if (params.normalized) v /= normalizer_squared(params.n, params.c);
  return v;
}

double spread(int n, double c) {
  double denom = 0.0;
  for (int r = 0; r <= n; ++r) denom += std::exp2(-(2.0 + c) * r);
  return normalizer_squared(n, c) / (2.0 * denom);
}

namespace {

// Fills one depth-r Gaussian block in place, scaled by coeff, adding onto
// whatever is already stored. `origin` is the 1-based global site of the
// target matrix's (0,0) entry; `gstart` the 1-based global start of the
// block. Draw order is fixed (row-major upper triangle, diagonal first in
// each row) so that a block's content is a pure function of its substream.
template <class T>
void accumulate_one_block(DenseMatrix<T>& h, std::int64_t origin, int r,
                          double coeff, std::uint64_t master_seed,
                          std::uint64_t trial, std::int64_t gstart) {
  const std::int64_t width = std::int64_t{1} << r;
  const std::uint64_t block_index =
      static_cast<std::uint64_t>((gstart - 1) >> r);
  RngStream stream(master_seed, StreamKind::matrix_blocks, trial,
                   static_cast<std::uint64_t>(r), block_index);
  const double sd_diag = std::sqrt(std::ldexp(2.0, -r));
  const std::int64_t base = gstart - origin;
  if constexpr (std::is_same_v<T, double>) {
    const double sd_off = std::sqrt(std::ldexp(1.0, -r));
    for (std::int64_t i = 0; i < width; ++i) {
      for (std::int64_t j = i; j < width; ++j) {
        const double sd = (i == j) ? sd_diag : sd_off;
        const double v = coeff * (stream.next_gaussian() * sd);
        h(base + i, base + j) += v;
        if (i != j) h(base + j, base + i) += v;
      }
    }
  } else {
    // Hermitian class: real diagonal with the same |entry|^2 profile,
    // off-diagonal real and imaginary parts each carrying half the variance.
    const double sd_part = std::sqrt(std::ldexp(0.5, -r));
    for (std::int64_t i = 0; i < width; ++i) {
      for (std::int64_t j = i; j < width; ++j) {
        if (i == j) {
          const double v = coeff * (stream.next_gaussian() * sd_diag);
          h(base + i, base + i) += T{v, 0.0};
        } else {
          const double re = coeff * (stream.next_gaussian() * sd_part);
          const double im = coeff * (stream.next_gaussian() * sd_part);
          h(base + i, base + j) += T{re, im};
          h(base + j, base + i) += T{re, -im};
        }
      }
    }
  }
}

// All depth-r blocks that fall inside the window [origin, origin + dim).
template <class T>
void accumulate_level(DenseMatrix<T>& h, std::int64_t origin, int r,
                      double coeff, std::uint64_t master_seed,
                      std::uint64_t trial, bool parallel) {
  const std::int64_t width = std::int64_t{1} << r;
  const std::int64_t count = h.dim() / width;
#pragma omp parallel for schedule(static) if (parallel && count > 1)
  for (std::int64_t b = 0; b < count; ++b)
    accumulate_one_block(h, origin, r, coeff, master_seed, trial,
                         origin + b * width);
}

template <class T>
void scale_all(DenseMatrix<T>& h, double z) {
  const std::int64_t n = h.dim();
  for (std::int64_t i = 0; i < n; ++i) {
    T* row = h.row(i);
    for (std::int64_t j = 0; j < n; ++j) row[j] /= z;
  }
}

}  // namespace

template <class T>
DenseMatrix<T> sample_block_matrix(int n, int r, std::uint64_t master_seed,
                                   std::uint64_t trial) {
  const std::int64_t dim = sites_at_level(n);
  if (r < 0 || r > n)
    throw std::invalid_argument("sample_block_matrix: depth out of [0, n]");
  DenseMatrix<T> h(dim);
  accumulate_level(h, 1, r, 1.0, master_seed, trial, false);
  return h;
}

template <class T>
void add_scaled_level(DenseMatrix<T>& h, int n, int r, double coeff,
                      std::uint64_t master_seed, std::uint64_t trial,
                      bool parallel) {
  if (h.dim() != sites_at_level(n))
    throw std::invalid_argument("add_scaled_level: dimension mismatch");
  if (r < 0 || r > n)
    throw std::invalid_argument("add_scaled_level: depth out of [0, n]");
  accumulate_level(h, 1, r, coeff, master_seed, trial, parallel);
}

template <class T>
DenseMatrix<T> assemble(const EnsembleParams& params, std::uint64_t trial,
                        int m, bool parallel) {
  const std::int64_t dim = sites_at_level(params.n);
  if (m < 0 || m > params.n)
    throw std::invalid_argument("assemble: truncation depth out of [0, n]");
  DenseMatrix<T> h(dim);
  for (int r = 0; r <= m; ++r)
    accumulate_level(h, 1, r, level_coefficient(params.c, r),
                     params.master_seed, trial, parallel);
  if (params.normalized) scale_all(h, normalizer(params.n, params.c));
  return h;
}

template <class T>
DenseMatrix<T> assemble(const EnsembleParams& params, std::uint64_t trial,
                        bool parallel) {
  return assemble<T>(params, trial, params.n, parallel);
}

template <class T>
DenseMatrix<T> assemble_block(const EnsembleParams& params,
                              std::uint64_t trial, int m,
                              const BlockRange& block) {
  if (m < 0 || m > params.n)
    throw std::invalid_argument("assemble_block: truncation depth out of [0, n]");
  if (block.level != m || block.size() != (std::int64_t{1} << m) ||
      (block.start - 1) % block.size() != 0)
    throw std::invalid_argument("assemble_block: not a depth-m block");
  if (block.end > sites_at_level(params.n))
    throw std::invalid_argument("assemble_block: block outside level n");
  DenseMatrix<T> h(block.size());
  for (int r = 0; r <= m; ++r)
    accumulate_level(h, block.start, r, level_coefficient(params.c, r),
                     params.master_seed, trial, false);
  if (params.normalized) scale_all(h, normalizer(params.n, params.c));
  return h;
}

template DenseMatrix<double> sample_block_matrix<double>(int, int,
                                                         std::uint64_t,
                                                         std::uint64_t);
template DenseMatrix<std::complex<double>> sample_block_matrix<
    std::complex<double>>(int, int, std::uint64_t, std::uint64_t);
template void add_scaled_level<double>(DenseMatrix<double>&, int, int, double,
                                       std::uint64_t, std::uint64_t, bool);
template void add_scaled_level<std::complex<double>>(
    DenseMatrix<std::complex<double>>&, int, int, double, std::uint64_t,
    std::uint64_t, bool);
template DenseMatrix<double> assemble<double>(const EnsembleParams&,
                                              std::uint64_t, int, bool);
template DenseMatrix<std::complex<double>> assemble<std::complex<double>>(
    const EnsembleParams&, std::uint64_t, int, bool);
template DenseMatrix<double> assemble<double>(const EnsembleParams&,
                                              std::uint64_t, bool);
template DenseMatrix<std::complex<double>> assemble<std::complex<double>>(
    const EnsembleParams&, std::uint64_t, bool);
template DenseMatrix<double> assemble_block<double>(const EnsembleParams&,
                                                    std::uint64_t, int,
                                                    const BlockRange&);
template DenseMatrix<std::complex<double>> assemble_block<
    std::complex<double>>(const EnsembleParams&, std::uint64_t, int,
                          const BlockRange&);

}  // namespace umlab
