#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "umlab/ensemble.hpp"
#include "umlab/hierarchy.hpp"
#include "umlab/matrix.hpp"

namespace umlab {

// thrown when the eigenvalue iteration fails to deflate within its sweep cap
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A point E + i*eta in the upper half plane.
struct ComplexEnergy {
  double energy = 0.0;
  double eta = 1.0;

  std::complex<double> value() const { return {energy, eta}; }
};

struct SpectrumMeta {
  EnsembleParams params{};
  std::int64_t trial = -1;
  int m = -1;  // truncation depth the matrix was assembled at; -1 = untruncated
};

// Full eigendecomposition result. Eigenvalues ascend; column j of the
// eigenvector matrix pairs with eigenvalues[j].
template <class T>
struct Spectrum {
  std::vector<double> eigenvalues;
  std::optional<DenseMatrix<T>> eigenvectors;
  SpectrumMeta meta{};

  std::int64_t dim() const {
    return static_cast<std::int64_t>(eigenvalues.size());
  }
};

using RealSpectrum = Spectrum<double>;
using ComplexSpectrum = Spectrum<std::complex<double>>;

// Householder reduction A = Q T Q^H with T real symmetric tridiagonal. The
// step-k reflector (length dim-1-k) is stored contiguously in `reflectors`
// at offset(k); for the Hermitian class a diagonal phase absorbs the complex
// subdiagonal so T is real. Q is never formed unless asked for: resolvent
// plumbing only ever applies it.
template <class T>
struct TridiagonalForm {
  std::vector<double> diag;     // main diagonal of T
  std::vector<double> offdiag;  // subdiagonal, offdiag[k] couples k and k+1
  std::vector<T> reflectors;    // concatenated step vectors
  std::vector<double> tau;      // reflector scalars (0 marks a skipped step)
  std::vector<std::complex<double>> phase;  // unitary class only, else empty

  std::int64_t dim() const { return static_cast<std::int64_t>(diag.size()); }

  std::int64_t reflector_offset(std::int64_t k) const {
    const std::int64_t n = dim();
    return k * (n - 1) - k * (k - 1) / 2;
  }

  // v <- Q v and v <- Q^H v
  void apply_q(std::vector<std::complex<double>>& v) const;
  void apply_q_adjoint(std::vector<std::complex<double>>& v) const;
  // real-vector overload, orthogonal class only
  void apply_q(std::vector<double>& v) const;

  // dense Q, columns orthonormal; panel-blocked accumulation
  DenseMatrix<T> accumulate_q(bool parallel = false) const;
};

// Reduction consumes its input. `parallel` engages the deterministic
// chunk-split kernels; output is bit-identical for every thread count.
template <class T>
TridiagonalForm<T> tridiagonalize(DenseMatrix<T> a, bool parallel = false);

// Implicit-shift QL sweeps on (d, e) in place; d ends up holding the
// (unsorted) eigenvalues. If v is non-null its columns are rotated along, so
// pre-loading Q turns it into eigenvectors of the original matrix. The d/e
// arithmetic never depends on v, so eigenvalues match bit-for-bit whether or
// not vectors are accumulated. Throws ConvergenceError after 30 sweeps on a
// single eigenvalue.
template <class T>
void ql_diagonalize(std::vector<double>& d, std::vector<double>& e,
                    DenseMatrix<T>* v, bool parallel = false);

// ascending eigenvalues of the tridiagonal (d, e)
std::vector<double> tridiagonal_eigenvalues(std::vector<double> d,
                                            std::vector<double> e);

// Eigenvectors of the tridiagonal (d, e) at the given eigenvalues (a sorted
// subset of the spectrum), by inverse iteration with Gram-Schmidt inside
// near-degenerate clusters. Entry j pairs with lambdas[j].
std::vector<std::vector<double>> tridiagonal_eigenvectors(
    const std::vector<double>& d, const std::vector<double>& e,
    const std::vector<double>& lambdas);

// solve (T - z) u = b in place, T = tridiag(d, e); LU with partial pivoting
void tridiagonal_solve(const std::vector<double>& d,
                       const std::vector<double>& e, std::complex<double> z,
                       std::vector<std::complex<double>>& b);

// Full eigendecomposition: Householder reduction, then implicit-shift QL,
// then an ascending sort. Deterministic for fixed input, bit-identical for
// any thread count.
template <class T>
Spectrum<T> eigh(const DenseMatrix<T>& a, bool want_vectors,
                 bool parallel = false);

// Im 1/(lambda - z) = eta / ((lambda - E)^2 + eta^2)
double poisson_kernel(double lambda, ComplexEnergy z);

// dim^{-1} sum_j poisson_kernel(lambda_j, z); the per-site resolvent trace
template <class T>
double nu_trace(const Spectrum<T>& s, ComplexEnergy z);

// <delta_y, (H - z)^{-1} delta_x> from the eigendecomposition
template <class T>
std::complex<double> green_entry(const Spectrum<T>& s, SiteIndex x,
                                 SiteIndex y, ComplexEnergy z);

// Entire resolvent column (H - z)^{-1} delta_x through the tridiagonal form:
// two reflector sweeps and one banded solve instead of dense eigenvectors.
// x0 is 0-based.
template <class T>
std::vector<std::complex<double>> resolvent_column(const TridiagonalForm<T>& f,
                                                   std::int64_t x0,
                                                   ComplexEnergy z);

}  // namespace umlab
