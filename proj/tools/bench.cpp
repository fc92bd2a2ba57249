// Timing harness for the hot kernels: assembly, Householder reduction, QL,
// full decomposition, dense Q accumulation, and the slow reference solver
// for contrast. Run with --smoke for a quick pass at small sizes.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>
#include <omp.h>

#include "umlab/ensemble.hpp"
#include "umlab/reference.hpp"
#include "umlab/spectral.hpp"

namespace {

using clk = std::chrono::steady_clock;

double run_secs(const char* label, int threads, double (*body)(int, int),
                int n) {
  const auto t0 = clk::now();
  const double checksum = body(n, threads);
  const double dt = std::chrono::duration<double>(clk::now() - t0).count();
  std::printf("%-22s n=%-2d threads=%d  %8.3fs  (checksum %.6g)\n", label, n,
              threads, dt, checksum);
  return dt;
}

umlab::EnsembleParams params_at(int n) {
  umlab::EnsembleParams p;
  p.n = n;
  p.c = 1.0;
  p.master_seed = 42;
  return p;
}

double bench_assemble(int n, int threads) {
  omp_set_num_threads(threads);
  const auto h = umlab::assemble<double>(params_at(n), 0, true);
  return h(0, 0);
}

double bench_tridiag(int n, int threads) {
  omp_set_num_threads(threads);
  auto h = umlab::assemble<double>(params_at(n), 0, true);
  const auto f = umlab::tridiagonalize<double>(std::move(h), true);
  return f.diag[0];
}

double bench_eigh_values(int n, int threads) {
  omp_set_num_threads(threads);
  const auto h = umlab::assemble<double>(params_at(n), 0, true);
  const auto s = umlab::eigh<double>(h, false, true);
  return s.eigenvalues.front();
}

double bench_eigh_vectors(int n, int threads) {
  omp_set_num_threads(threads);
  const auto h = umlab::assemble<double>(params_at(n), 0, true);
  const auto s = umlab::eigh<double>(h, true, true);
  return (*s.eigenvectors)(0, 0);
}

double bench_jacobi_reference(int n, int threads) {
  omp_set_num_threads(threads);
  const auto h = umlab::assemble<double>(params_at(n), 0, false);
  const auto r = umlab::reference::jacobi_eigh(h, false);
  return r.eigenvalues.front();
}

}  // namespace

int main(int argc, char** argv) {
  const bool smoke = argc > 1 && std::strcmp(argv[1], "--smoke") == 0;
  const int hw = omp_get_max_threads();

  const std::vector<int> sizes = smoke ? std::vector<int>{6, 7}
                                       : std::vector<int>{8, 9, 10};
  const int jacobi_n = smoke ? 6 : 8;

  std::vector<int> thread_counts{1};
  if (hw > 1) thread_counts.push_back(hw);

  std::printf("hardware threads: %d\n", hw);
  for (int n : sizes) {
    for (int threads : thread_counts) {
      run_secs("assemble", threads, bench_assemble, n);
      run_secs("tridiagonalize", threads, bench_tridiag, n);
      run_secs("eigh (values)", threads, bench_eigh_values, n);
      run_secs("eigh (vectors)", threads, bench_eigh_vectors, n);
    }
  }
  run_secs("jacobi reference", 1, bench_jacobi_reference, jacobi_n);
  return 0;
}
