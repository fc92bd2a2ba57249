#include "umlab/spectral.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>

#include "umlab/rng.hpp"

namespace umlab {

namespace {

using cplx = std::complex<double>;

inline double conj_of(double x) { return x; }
inline cplx conj_of(cplx x) { return std::conj(x); }
inline double real_of(double x) { return x; }
inline double real_of(cplx x) { return x.real(); }
inline double abs_sq(double x) { return x * x; }
inline double abs_sq(cplx x) { return x.real() * x.real() + x.imag() * x.imag(); }

// Fixed chunking of the rows of a lower triangle, balanced by entry count.
// The chunk count never depends on the thread count, so chunk-private
// partial sums combined in fixed order give bit-identical results on any
// schedule.
constexpr std::int64_t kSymvChunks = 16;

std::vector<std::int64_t> triangle_chunk_bounds(std::int64_t rows) {
  const std::int64_t chunks = std::min<std::int64_t>(kSymvChunks, std::max<std::int64_t>(rows, 1));
  std::vector<std::int64_t> bounds(chunks + 1, 0);
  for (std::int64_t t = 1; t < chunks; ++t) {
    const auto b = static_cast<std::int64_t>(
        std::floor(static_cast<double>(rows) *
                   std::sqrt(static_cast<double>(t) / static_cast<double>(chunks))));
    bounds[t] = std::clamp(b, bounds[t - 1], rows);
  }
  bounds[chunks] = rows;
  return bounds;
}

// p = tau * A_sub * v on the lower triangle of the trailing block starting
// at `s`. One fused pass per row computes the gather (row dot) and the
// scatter (column contribution) into a chunk-private partial.
template <class T>
void symv_lower(const DenseMatrix<T>& a, std::int64_t s,
                const std::vector<T>& v, std::vector<T>& p, double tau,
                std::vector<T>& partials, bool parallel) {
  const std::int64_t len = a.dim() - s;
  const auto bounds = triangle_chunk_bounds(len);
  const auto chunks = static_cast<std::int64_t>(bounds.size()) - 1;
  std::fill(partials.begin(), partials.begin() + chunks * len, T{});
#pragma omp parallel for schedule(dynamic, 1) if (parallel && len > 256)
  for (std::int64_t t = 0; t < chunks; ++t) {
    T* part = partials.data() + t * len;
    for (std::int64_t i = bounds[t]; i < bounds[t + 1]; ++i) {
      const T* arow = a.row(s + i) + s;
      const T vi = v[i];
      T acc{};
      for (std::int64_t j = 0; j < i; ++j) {
        const T aij = arow[j];
        acc += aij * v[j];
        part[j] += conj_of(aij) * vi;
      }
      part[i] += acc + real_of(arow[i]) * vi;
    }
  }
  for (std::int64_t j = 0; j < len; ++j) p[j] = T{};
  for (std::int64_t t = 0; t < chunks; ++t) {
    const T* part = partials.data() + t * len;
    for (std::int64_t j = 0; j < len; ++j) p[j] += part[j];
  }
  for (std::int64_t j = 0; j < len; ++j) p[j] *= tau;
}

// A_sub -= v w^H + w v^H on the lower triangle; disjoint writes per row.
template <class T>
void rank2_update(DenseMatrix<T>& a, std::int64_t s, const std::vector<T>& v,
                  const std::vector<T>& w, bool parallel) {
  const std::int64_t len = a.dim() - s;
#pragma omp parallel for schedule(dynamic, 64) if (parallel && len > 256)
  for (std::int64_t i = 0; i < len; ++i) {
    T* arow = a.row(s + i) + s;
    const T vi = v[i];
    const T wi = w[i];
    for (std::int64_t j = 0; j <= i; ++j)
      arow[j] -= vi * conj_of(w[j]) + wi * conj_of(v[j]);
  }
}

// reflector application y <- (I - tau v v^H) y for a vector span
template <class T, class VS>
void apply_reflector(const T* v, std::int64_t len, double tau, VS* y) {
  if (tau == 0.0) return;
  VS s{};
  for (std::int64_t i = 0; i < len; ++i) s += conj_of(v[i]) * y[i];
  s *= tau;
  for (std::int64_t i = 0; i < len; ++i) y[i] -= s * v[i];
}

template <class T, class VS>
void apply_q_impl(const TridiagonalForm<T>& f, VS* y, bool adjoint) {
  const std::int64_t n = f.dim();
  if constexpr (std::is_same_v<T, cplx>) {
    if (adjoint) {
      for (std::int64_t k = 0; k + 2 < n; ++k)
        apply_reflector(f.reflectors.data() + f.reflector_offset(k), n - 1 - k,
                        f.tau[k], y + k + 1);
      for (std::int64_t i = 0; i < n; ++i) y[i] *= std::conj(f.phase[i]);
      return;
    }
    for (std::int64_t i = 0; i < n; ++i) y[i] *= f.phase[i];
    for (std::int64_t k = n - 3; k >= 0; --k)
      apply_reflector(f.reflectors.data() + f.reflector_offset(k), n - 1 - k,
                      f.tau[k], y + k + 1);
  } else {
    if (adjoint) {
      for (std::int64_t k = 0; k + 2 < n; ++k)
        apply_reflector(f.reflectors.data() + f.reflector_offset(k), n - 1 - k,
                        f.tau[k], y + k + 1);
      return;
    }
    for (std::int64_t k = n - 3; k >= 0; --k)
      apply_reflector(f.reflectors.data() + f.reflector_offset(k), n - 1 - k,
                      f.tau[k], y + k + 1);
  }
}

// Tridiagonal solve (T - z) x = b with partial pivoting; D/C/A hold the
// shifted diagonal, superdiagonal and subdiagonal, F catches the pivoting
// fill-in two columns out. Exactly singular pivots are nudged so inverse
// iteration can shift right onto an eigenvalue.
template <class S>
void banded_solve(std::vector<S>& dia, std::vector<S>& sup, std::vector<S>& sub,
                  std::vector<S>& fill, std::vector<S>& b, double pivot_floor) {
  const auto n = static_cast<std::int64_t>(dia.size());
  std::fill(fill.begin(), fill.end(), S{});
  for (std::int64_t k = 0; k + 1 < n; ++k) {
    if (std::abs(dia[k]) >= std::abs(sub[k])) {
      if (std::abs(dia[k]) == 0.0) dia[k] = S{pivot_floor};
      const S m = sub[k] / dia[k];
      dia[k + 1] -= m * sup[k];
      if (k + 2 < n) sup[k + 1] -= m * fill[k];
      b[k + 1] -= m * b[k];
    } else {
      const S m = dia[k] / sub[k];
      const S new_dia = sub[k];
      const S new_sup = dia[k + 1];
      const S new_fill = (k + 2 < n) ? sup[k + 1] : S{};
      dia[k + 1] = sup[k] - m * dia[k + 1];
      if (k + 2 < n) sup[k + 1] = fill[k] - m * sup[k + 1];
      dia[k] = new_dia;
      sup[k] = new_sup;
      fill[k] = new_fill;
      std::swap(b[k], b[k + 1]);
      b[k + 1] -= m * b[k];
    }
  }
  if (std::abs(dia[n - 1]) == 0.0) dia[n - 1] = S{pivot_floor};
  b[n - 1] /= dia[n - 1];
  if (n > 1) b[n - 2] = (b[n - 2] - sup[n - 2] * b[n - 1]) / dia[n - 2];
  for (std::int64_t k = n - 3; k >= 0; --k)
    b[k] = (b[k] - sup[k] * b[k + 1] - fill[k] * b[k + 2]) / dia[k];
}

}  // namespace

template <class T>
void TridiagonalForm<T>::apply_q(std::vector<cplx>& v) const {
  apply_q_impl(*this, v.data(), false);
}

template <class T>
void TridiagonalForm<T>::apply_q_adjoint(std::vector<cplx>& v) const {
  apply_q_impl(*this, v.data(), true);
}

template <class T>
void TridiagonalForm<T>::apply_q(std::vector<double>& v) const {
  static_assert(sizeof(T) > 0);
  if constexpr (std::is_same_v<T, double>) {
    apply_q_impl(*this, v.data(), false);
  } else {
    throw std::logic_error("real apply_q on a Hermitian reduction");
  }
}

template <class T>
DenseMatrix<T> TridiagonalForm<T>::accumulate_q(bool parallel) const {
  const std::int64_t n = dim();
  DenseMatrix<T> q(n);
  for (std::int64_t i = 0; i < n; ++i) q(i, i) = T{1.0};
  if (n > 2) {
    constexpr std::int64_t kPanel = 32;
    const std::int64_t panels = (n + kPanel - 1) / kPanel;
    std::vector<T> wbuf(static_cast<std::size_t>(panels) * kPanel);
#pragma omp parallel for schedule(dynamic, 1) if (parallel && panels > 1)
    for (std::int64_t pi = 0; pi < panels; ++pi) {
      const std::int64_t j0 = pi * kPanel;
      const std::int64_t j1 = std::min(j0 + kPanel, n);
      const std::int64_t width = j1 - j0;
      T* w = wbuf.data() + pi * kPanel;
      // reflector k touches rows k+1.., so columns left of k+1 are inert
      for (std::int64_t k = std::min(n - 3, j1 - 2); k >= 0; --k) {
        if (tau[k] == 0.0) continue;
        const T* v = reflectors.data() + reflector_offset(k);
        for (std::int64_t j = 0; j < width; ++j) w[j] = T{};
        for (std::int64_t i = k + 1; i < n; ++i) {
          const T vi = conj_of(v[i - k - 1]);
          const T* qr = q.row(i) + j0;
          for (std::int64_t j = 0; j < width; ++j) w[j] += vi * qr[j];
        }
        for (std::int64_t j = 0; j < width; ++j) w[j] *= tau[k];
        for (std::int64_t i = k + 1; i < n; ++i) {
          const T vi = v[i - k - 1];
          T* qr = q.row(i) + j0;
          for (std::int64_t j = 0; j < width; ++j) qr[j] -= vi * w[j];
        }
      }
    }
  }
  if constexpr (std::is_same_v<T, cplx>) {
#pragma omp parallel for schedule(static) if (parallel && n > 512)
    for (std::int64_t i = 0; i < n; ++i) {
      T* qr = q.row(i);
      for (std::int64_t j = 0; j < n; ++j) qr[j] *= phase[j];
    }
  }
  return q;
}

template <class T>
TridiagonalForm<T> tridiagonalize(DenseMatrix<T> a, bool parallel) {
  const std::int64_t n = a.dim();
  TridiagonalForm<T> f;
  f.diag.resize(n);
  f.offdiag.resize(n > 0 ? n - 1 : 0);
  f.tau.assign(n > 2 ? n - 2 : 0, 0.0);
  if (n > 2) f.reflectors.resize(f.reflector_offset(n - 2));
  std::vector<cplx> beta(n > 1 ? n - 1 : 0);

  std::vector<T> v(n), p(n), w(n);
  std::vector<T> partials(static_cast<std::size_t>(kSymvChunks) * n);

  for (std::int64_t k = 0; k + 2 < n; ++k) {
    const std::int64_t len = n - 1 - k;
    for (std::int64_t i = 0; i < len; ++i) v[i] = a(k + 1 + i, k);

    const T alpha = v[0];
    double tail2 = 0.0;
    for (std::int64_t i = 1; i < len; ++i) tail2 += abs_sq(v[i]);
    if (tail2 == 0.0) {
      // already in tridiagonal position at this step
      if constexpr (std::is_same_v<T, cplx>)
        beta[k] = alpha;
      else
        f.offdiag[k] = alpha;
      T* store = f.reflectors.data() + f.reflector_offset(k);
      for (std::int64_t i = 0; i < len; ++i) store[i] = T{};
      continue;
    }
    const double sigma = std::sqrt(tail2 + abs_sq(alpha));
    T new_sub;
    if constexpr (std::is_same_v<T, cplx>) {
      const cplx u = (alpha == 0.0) ? cplx{1.0, 0.0} : alpha / std::abs(alpha);
      new_sub = -u * sigma;
      beta[k] = new_sub;
    } else {
      new_sub = (alpha >= 0.0) ? -sigma : sigma;
      f.offdiag[k] = new_sub;
    }
    v[0] = alpha - new_sub;
    const double vnorm2 = abs_sq(v[0]) + tail2;
    const double tau = 2.0 / vnorm2;
    f.tau[k] = tau;

    symv_lower(a, k + 1, v, p, tau, partials, parallel);
    double vdp = 0.0;
    for (std::int64_t i = 0; i < len; ++i) vdp += real_of(conj_of(v[i]) * p[i]);
    const double kappa = 0.5 * tau * vdp;
    for (std::int64_t i = 0; i < len; ++i) w[i] = p[i] - kappa * v[i];
    rank2_update(a, k + 1, v, w, parallel);

    T* store = f.reflectors.data() + f.reflector_offset(k);
    for (std::int64_t i = 0; i < len; ++i) store[i] = v[i];
  }

  for (std::int64_t i = 0; i < n; ++i) f.diag[i] = real_of(a(i, i));
  if constexpr (std::is_same_v<T, cplx>) {
    f.phase.assign(n, cplx{1.0, 0.0});
    if (n > 1) {
      beta[n - 2] = a(n - 1, n - 2);
      for (std::int64_t k = 0; k + 1 < n; ++k) {
        const double mag = std::abs(beta[k]);
        const cplx u = (mag == 0.0) ? cplx{1.0, 0.0} : beta[k] / mag;
        f.phase[k + 1] = f.phase[k] * u;
        f.offdiag[k] = mag;
      }
    }
  } else {
    if (n > 1) f.offdiag[n - 2] = real_of(a(n - 1, n - 2));
  }
  return f;
}

template <class T>
void ql_diagonalize(std::vector<double>& d, std::vector<double>& e,
                    DenseMatrix<T>* v, bool parallel) {
  const auto n = static_cast<std::int64_t>(d.size());
  if (n <= 1) return;
  std::vector<double> ew(n, 0.0);
  std::copy(e.begin(), e.end(), ew.begin());
  std::vector<double> cs(n, 0.0), sn(n, 0.0);
  constexpr double eps = DBL_EPSILON;

  for (std::int64_t l = 0; l < n; ++l) {
    int iter = 0;
    while (true) {
      std::int64_t m = l;
      while (m < n - 1) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(ew[m]) <= eps * dd) break;
        ++m;
      }
      if (m == l) break;
      if (++iter > 30)
        throw ConvergenceError(
            "eigenvalue iteration exceeded 30 sweeps at index " +
            std::to_string(l));
      double g = (d[l + 1] - d[l]) / (2.0 * ew[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + ew[l] / (g + std::copysign(r, g));
      double s = 1.0;
      double c = 1.0;
      double p = 0.0;
      std::int64_t stop = l;
      bool underflow = false;
      for (std::int64_t i = m - 1; i >= l; --i) {
        double f = s * ew[i];
        const double b = c * ew[i];
        r = std::hypot(f, g);
        ew[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          ew[m] = 0.0;
          stop = i + 1;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        f = (d[i] - g) * s + 2.0 * c * b;
        p = s * f;
        d[i + 1] = g + p;
        g = c * f - b;
        cs[i] = c;
        sn[i] = s;
      }
      if (!underflow) {
        d[l] -= p;
        ew[l] = g;
        ew[m] = 0.0;
      }
      if (v != nullptr && m - 1 >= stop) {
        const std::int64_t rows = v->dim();
#pragma omp parallel for schedule(static) if (parallel && rows > 512)
        for (std::int64_t row = 0; row < rows; ++row) {
          T* vr = v->row(row);
          for (std::int64_t i = m - 1; i >= stop; --i) {
            const T x = vr[i];
            const T y = vr[i + 1];
            vr[i + 1] = sn[i] * x + cs[i] * y;
            vr[i] = cs[i] * x - sn[i] * y;
          }
        }
      }
    }
  }
  e.assign(n - 1, 0.0);
}

std::vector<double> tridiagonal_eigenvalues(std::vector<double> d,
                                            std::vector<double> e) {
  ql_diagonalize<double>(d, e, nullptr, false);
  std::sort(d.begin(), d.end());
  return d;
}

std::vector<std::vector<double>> tridiagonal_eigenvectors(
    const std::vector<double>& d, const std::vector<double>& e,
    const std::vector<double>& lambdas) {
  const auto n = static_cast<std::int64_t>(d.size());
  const auto k = static_cast<std::int64_t>(lambdas.size());
  std::vector<std::vector<double>> out(k);
  if (k == 0) return out;
  double tnorm = 0.0;
  for (double x : d) tnorm = std::max(tnorm, std::abs(x));
  for (double x : e) tnorm = std::max(tnorm, std::abs(x));
  if (tnorm == 0.0) tnorm = 1.0;
  const double cluster_gap = 1e-6 * tnorm;
  const double pivot_floor = 1e-30 * tnorm;

  std::vector<double> dia(n), sup(n), sub(n), fill(n), b(n);
  std::int64_t cluster_start = 0;
  for (std::int64_t j = 0; j < k; ++j) {
    if (j > 0 && lambdas[j] - lambdas[j - 1] > cluster_gap) cluster_start = j;
    // tiny split keeps shifts distinct inside a numerically merged cluster
    const double shift =
        lambdas[j] + static_cast<double>(j - cluster_start) * 1e-12 * tnorm;

    RngStream start(0x756d6c6162ULL, StreamKind::internal,
                    static_cast<std::uint64_t>(j), 0, 0);
    for (std::int64_t i = 0; i < n; ++i) b[i] = 2.0 * start.next_uniform() - 1.0;

    for (int it = 0; it < 5; ++it) {
      for (std::int64_t i = 0; i < n; ++i) dia[i] = d[i] - shift;
      for (std::int64_t i = 0; i + 1 < n; ++i) {
        sup[i] = e[i];
        sub[i] = e[i];
      }
      banded_solve(dia, sup, sub, fill, b, pivot_floor);
      // orthogonalize against earlier members of the cluster
      for (std::int64_t q = cluster_start; q < j; ++q) {
        const auto& prev = out[q];
        double dot = 0.0;
        for (std::int64_t i = 0; i < n; ++i) dot += prev[i] * b[i];
        for (std::int64_t i = 0; i < n; ++i) b[i] -= dot * prev[i];
      }
      double norm2 = 0.0;
      for (std::int64_t i = 0; i < n; ++i) norm2 += b[i] * b[i];
      const double inv = 1.0 / std::sqrt(norm2);
      for (std::int64_t i = 0; i < n; ++i) b[i] *= inv;
      // residual ||(T - lambda) u||_inf
      double res = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        double r = (d[i] - lambdas[j]) * b[i];
        if (i > 0) r += e[i - 1] * b[i - 1];
        if (i + 1 < n) r += e[i] * b[i + 1];
        res = std::max(res, std::abs(r));
      }
      if (it >= 1 && res <= 1e-10 * tnorm) break;
    }
    out[j] = b;
  }
  return out;
}

void tridiagonal_solve(const std::vector<double>& d,
                       const std::vector<double>& e, cplx z,
                       std::vector<cplx>& b) {
  const auto n = static_cast<std::int64_t>(d.size());
  double tnorm = std::abs(z);
  for (double x : d) tnorm = std::max(tnorm, std::abs(x));
  for (double x : e) tnorm = std::max(tnorm, std::abs(x));
  if (tnorm == 0.0) tnorm = 1.0;
  std::vector<cplx> dia(n), sup(n), sub(n), fill(n);
  for (std::int64_t i = 0; i < n; ++i) dia[i] = d[i] - z;
  for (std::int64_t i = 0; i + 1 < n; ++i) {
    sup[i] = e[i];
    sub[i] = e[i];
  }
  banded_solve(dia, sup, sub, fill, b, 1e-30 * tnorm);
}

template <class T>
Spectrum<T> eigh(const DenseMatrix<T>& a, bool want_vectors, bool parallel) {
  const std::int64_t n = a.dim();
  Spectrum<T> s;
  if (n == 0) return s;
  TridiagonalForm<T> f = tridiagonalize(a, parallel);
  std::vector<double> d = f.diag;
  std::vector<double> e = f.offdiag;
  std::optional<DenseMatrix<T>> v;
  if (want_vectors) {
    v = f.accumulate_q(parallel);
    ql_diagonalize(d, e, &*v, parallel);
  } else {
    ql_diagonalize<T>(d, e, nullptr, parallel);
  }
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t i, std::int64_t j) {
    return d[i] != d[j] ? d[i] < d[j] : i < j;
  });
  s.eigenvalues.resize(n);
  for (std::int64_t j = 0; j < n; ++j) s.eigenvalues[j] = d[order[j]];
  if (want_vectors) {
#pragma omp parallel if (parallel && n > 512)
    {
      std::vector<T> buf(n);
#pragma omp for schedule(static)
      for (std::int64_t i = 0; i < n; ++i) {
        T* row = v->row(i);
        for (std::int64_t j = 0; j < n; ++j) buf[j] = row[order[j]];
        std::copy(buf.begin(), buf.end(), row);
      }
    }
    s.eigenvectors = std::move(v);
  }
  return s;
}

double poisson_kernel(double lambda, ComplexEnergy z) {
  const double dx = lambda - z.energy;
  return z.eta / (dx * dx + z.eta * z.eta);
}

template <class T>
double nu_trace(const Spectrum<T>& s, ComplexEnergy z) {
  double sum = 0.0;
  for (double lambda : s.eigenvalues) sum += poisson_kernel(lambda, z);
  return sum / static_cast<double>(s.dim());
}

template <class T>
cplx green_entry(const Spectrum<T>& s, SiteIndex x, SiteIndex y,
                 ComplexEnergy z) {
  if (!s.eigenvectors)
    throw std::invalid_argument("green_entry needs eigenvectors");
  check_site(x);
  check_site(y);
  if (sites_at_level(x.level) != s.dim() || sites_at_level(y.level) != s.dim())
    throw std::invalid_argument("green_entry: site level does not match spectrum");
  const std::int64_t n = s.dim();
  const T* rx = s.eigenvectors->row(x.value - 1);
  const T* ry = s.eigenvectors->row(y.value - 1);
  const cplx zz = z.value();
  cplx g{};
  for (std::int64_t j = 0; j < n; ++j)
    g += ry[j] * conj_of(rx[j]) / (s.eigenvalues[j] - zz);
  return g;
}

template <class T>
std::vector<cplx> resolvent_column(const TridiagonalForm<T>& f,
                                   std::int64_t x0, ComplexEnergy z) {
  const std::int64_t n = f.dim();
  if (x0 < 0 || x0 >= n)
    throw std::invalid_argument("resolvent_column: site out of range");
  std::vector<cplx> u(n, cplx{});
  u[x0] = 1.0;
  f.apply_q_adjoint(u);
  tridiagonal_solve(f.diag, f.offdiag, z.value(), u);
  f.apply_q(u);
  return u;
}

template struct TridiagonalForm<double>;
template struct TridiagonalForm<cplx>;
template TridiagonalForm<double> tridiagonalize<double>(DenseMatrix<double>,
                                                        bool);
template TridiagonalForm<cplx> tridiagonalize<cplx>(DenseMatrix<cplx>, bool);
template void ql_diagonalize<double>(std::vector<double>&,
                                     std::vector<double>&,
                                     DenseMatrix<double>*, bool);
template void ql_diagonalize<cplx>(std::vector<double>&, std::vector<double>&,
                                   DenseMatrix<cplx>*, bool);
template Spectrum<double> eigh<double>(const DenseMatrix<double>&, bool, bool);
template Spectrum<cplx> eigh<cplx>(const DenseMatrix<cplx>&, bool, bool);
template double nu_trace<double>(const Spectrum<double>&, ComplexEnergy);
template double nu_trace<cplx>(const Spectrum<cplx>&, ComplexEnergy);
template cplx green_entry<double>(const Spectrum<double>&, SiteIndex,
                                  SiteIndex, ComplexEnergy);
template cplx green_entry<cplx>(const Spectrum<cplx>&, SiteIndex, SiteIndex,
                                ComplexEnergy);
template std::vector<cplx> resolvent_column<double>(
    const TridiagonalForm<double>&, std::int64_t, ComplexEnergy);
template std::vector<cplx> resolvent_column<cplx>(const TridiagonalForm<cplx>&,
                                                  std::int64_t, ComplexEnergy);

}  // namespace umlab
