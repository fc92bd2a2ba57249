#pragma once

#include <cstdint>
#include <type_traits>

#include "umlab/hierarchy.hpp"
#include "umlab/matrix.hpp"
#include "umlab/rng.hpp"

namespace umlab {

enum class SymmetryClass { orthogonal, unitary };

// Parameters of the hierarchical Gaussian model. The matrix at level n is a
// sum over tree depths r = 0..n of independent block-diagonal Gaussian
// matrices, with the level-r term damped by 2^{-(1+c)r/2}. `normalized`
// divides the sum by the constant that makes every row's total entry
// variance equal to 1.
struct EnsembleParams {
  int n = 8;
  double c = 1.0;
  SymmetryClass symmetry = SymmetryClass::orthogonal;
  bool normalized = true;
  std::uint64_t master_seed = 0;
};

// 2^{-(1+c)r/2}, the damping applied to the depth-r perturbation
double level_coefficient(double c, int r);

// Z^2 = sum_{r=0}^{n} 2^{-(1+c)r} (1 + 2^{-r}), by direct summation. The
// geometric closed form has poles at c = -1 and c = -2; direct summation
// needs no special cases.
double normalizer_squared(int n, double c);
double normalizer(int n, double c);

// E |H(x,y)|^2 for the assembled matrix: the depth-r term contributes
// 2^{-(1+c)r} * 2^{-r} * (2 on the diagonal, 1 off it) for every r >= d(x,y)
// with r >= 1 off the diagonal. Divided by Z^2 iff params.normalized.
double entry_variance(SiteIndex x, SiteIndex y, const EnsembleParams& params);

// Reciprocal of the largest normalized entry variance (attained on the
// diagonal): M_n = Z^2 / (2 sum_r 2^{-(2+c)r}).
double spread(int n, double c);

// The depth-r perturbation: block diagonal over blocks(n, r), each block an
// independent Gaussian symmetric (or Hermitian) matrix with entry variances
// 2^{-r}*2 on the diagonal and 2^{-r} off it. Entries are exactly zero
// outside the blocks and the matrix is symmetric/Hermitian bit-for-bit.
// Block b draws from substream (master_seed, matrix_blocks, trial, r, b), so
// the realization depends only on those coordinates.
template <class T>
DenseMatrix<T> sample_block_matrix(int n, int r, std::uint64_t master_seed,
                                   std::uint64_t trial);

// H += coeff * (depth-r perturbation); shares substreams with
// sample_block_matrix. `parallel` distributes independent blocks across
// threads; each block is a pure function of its substream, so the result is
// identical for any thread count.
template <class T>
void add_scaled_level(DenseMatrix<T>& h, int n, int r, double coeff,
                      std::uint64_t master_seed, std::uint64_t trial,
                      bool parallel = false);

// Sum of the depth-0..m perturbations for one trial, divided by the full
// level-n normalizer when params.normalized. Coupling contract: for fixed
// (seed, trial) the depth-r realizations are shared across different m, so
// assemble(m) and assemble(m') agree on all terms r <= min(m, m').
template <class T>
DenseMatrix<T> assemble(const EnsembleParams& params, std::uint64_t trial,
                        int m, bool parallel = false);

// m = n: the untruncated matrix
template <class T>
DenseMatrix<T> assemble(const EnsembleParams& params, std::uint64_t trial,
                        bool parallel = false);

// One diagonal block of the depth-m truncation, as its own 2^m x 2^m dense
// matrix. Draws from the same substreams as the full assembly, so the result
// equals the corresponding sub-block of assemble(params, trial, m)
// bit-for-bit.
template <class T>
DenseMatrix<T> assemble_block(const EnsembleParams& params,
                              std::uint64_t trial, int m,
                              const BlockRange& block);

// scalar type used by each symmetry class
template <SymmetryClass S>
using class_scalar_t =
    std::conditional_t<S == SymmetryClass::orthogonal, double,
                       std::complex<double>>;

}  // namespace umlab
