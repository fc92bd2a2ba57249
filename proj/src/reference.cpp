#include "umlab/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace umlab::reference {

int partition_scan_distance(SiteIndex x, SiteIndex y) {
  if (x.level != y.level)
    throw std::invalid_argument("partition_scan_distance: level mismatch");
  check_site(x);
  check_site(y);
  for (int r = 0; r <= x.level; ++r) {
    for (const BlockRange& b : blocks(x.level, r))
      if (b.contains(x.value) && b.contains(y.value)) return r;
  }
  throw std::logic_error("partition scan found no common block");
}

JacobiResult jacobi_eigh(DenseMatrix<double> a, bool want_vectors) {
  const std::int64_t n = a.dim();
  JacobiResult out;
  if (want_vectors) {
    out.vectors = DenseMatrix<double>(n);
    for (std::int64_t i = 0; i < n; ++i) out.vectors(i, i) = 1.0;
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off <= 1e-26 * static_cast<double>(n * n)) break;
    if (sweep == 99)
      throw std::runtime_error("jacobi failed to converge in 100 sweeps");
    for (std::int64_t p = 0; p < n; ++p) {
      for (std::int64_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t =
            (theta >= 0.0 ? 1.0 : -1.0) /
            (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::int64_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::int64_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        if (want_vectors) {
          for (std::int64_t k = 0; k < n; ++k) {
            const double vkp = out.vectors(k, p);
            const double vkq = out.vectors(k, q);
            out.vectors(k, p) = c * vkp - s * vkq;
            out.vectors(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::int64_t i, std::int64_t j) { return a(i, i) < a(j, j); });
  out.eigenvalues.resize(n);
  for (std::int64_t j = 0; j < n; ++j) out.eigenvalues[j] = a(order[j], order[j]);
  if (want_vectors) {
    DenseMatrix<double> sorted(n);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j)
        sorted(i, j) = out.vectors(i, order[j]);
    out.vectors = std::move(sorted);
  }
  return out;
}

std::vector<std::complex<double>> lu_solve(DenseMatrix<std::complex<double>> a,
                                           std::complex<double> z,
                                           std::vector<std::complex<double>> b) {
  using cplx = std::complex<double>;
  const std::int64_t n = a.dim();
  if (static_cast<std::int64_t>(b.size()) != n)
    throw std::invalid_argument("lu_solve: size mismatch");
  for (std::int64_t i = 0; i < n; ++i) a(i, i) -= z;
  for (std::int64_t k = 0; k < n; ++k) {
    std::int64_t piv = k;
    double best = std::abs(a(k, k));
    for (std::int64_t i = k + 1; i < n; ++i) {
      const double m = std::abs(a(i, k));
      if (m > best) {
        best = m;
        piv = i;
      }
    }
    if (best == 0.0) throw std::runtime_error("lu_solve: singular matrix");
    if (piv != k) {
      for (std::int64_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (std::int64_t i = k + 1; i < n; ++i) {
      const cplx m = a(i, k) / a(k, k);
      a(i, k) = m;
      for (std::int64_t j = k + 1; j < n; ++j) a(i, j) -= m * a(k, j);
      b[i] -= m * b[k];
    }
  }
  for (std::int64_t k = n - 1; k >= 0; --k) {
    cplx s = b[k];
    for (std::int64_t j = k + 1; j < n; ++j) s -= a(k, j) * b[j];
    b[k] = s / a(k, k);
  }
  return b;
}

double simpson(const std::function<double(double)>& f, double lo, double hi,
               int panels) {
  if (panels < 2) panels = 2;
  if (panels % 2 != 0) ++panels;
  const double h = (hi - lo) / panels;
  double sum = f(lo) + f(hi);
  for (int i = 1; i < panels; ++i)
    sum += f(lo + h * i) * ((i % 2 == 1) ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace umlab::reference
