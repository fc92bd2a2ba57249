#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "umlab/hierarchy.hpp"
#include "umlab/matrix.hpp"

// Slow, simple, serial reference implementations. They exist to cross-check
// the production kernels (tests compare against them, the benchmark times
// them) and deliberately share no code with the fast paths.
namespace umlab::reference {

// tree distance by literally scanning the partitions P_0, P_1, ... until x
// and y land in a common block
int partition_scan_distance(SiteIndex x, SiteIndex y);

// Cyclic Jacobi eigendecomposition of a real symmetric matrix: repeated
// 2x2 rotations until all off-diagonal mass is gone. Returns ascending
// eigenvalues; vectors as columns of `vectors` when requested.
struct JacobiResult {
  std::vector<double> eigenvalues;
  DenseMatrix<double> vectors;
};
JacobiResult jacobi_eigh(DenseMatrix<double> a, bool want_vectors);

// Dense complex linear solve (A - z) x = b by LU with partial pivoting;
// `a` is any square complex matrix, consumed.
std::vector<std::complex<double>> lu_solve(
    DenseMatrix<std::complex<double>> a, std::complex<double> z,
    std::vector<std::complex<double>> b);

// Composite Simpson rule on [lo, hi] with `panels` panels (even count
// enforced internally).
double simpson(const std::function<double(double)>& f, double lo, double hi,
               int panels);

}  // namespace umlab::reference
