#pragma once

#include <cstdint>
#include <vector>

#include "umlab/ensemble.hpp"
#include "umlab/result_table.hpp"

// Monte Carlo experiment drivers. Every experiment is a pure function of its
// config (master seed included): trials are independent work units spread
// over a bounded worker pool, results are aggregated in trial order, and the
// emitted table is byte-identical for any worker count.

namespace umlab {

struct ExperimentConfig {
  EnsembleParams params;

  double energy = 0.0;  // reference energy E
  int trials = 100;

  double w = 0.2;        // window exponent: W = E +- 2^{-(1-w)n}
  double epsilon = 0.25; // truncation exponent: m_cut = ceil((1-eps) n)
  double l_loc = 0.3;    // resolvent exponent: eta = 2^{-(1+l_loc)n}

  double z_re = 0.0;  // spectral parameter z for resolvent functionals
  double z_im = 1.0;

  int m_min = -1;  // truncation sweep range; -1 = auto [0, n]
  int m_max = -1;

  double box_width = 4.0;          // counting box |B|, rescaled units
  double window_halfwidth = 0.0;   // rescaled; 0 = auto from estimated DOS
  int sites_per_trial = 8;         // localization site draws per trial

  int bins = 40;  // DOS histogram layout
  double bin_lo = -2.5;
  double bin_hi = 2.5;

  std::vector<double> c_list;  // sweep axes; empty = {params.c} / {params.n}
  std::vector<int> n_list;

  int truncate_to_m = -1;  // >= 0: run on the depth-m truncation instead

  int workers = 1;
};

// ceil((1 - epsilon) * n), the truncation depth used by the localization and
// counting experiments.
int m_cutoff(int n, double epsilon);

// Checks every hard constraint (ranges, exponent windows) and throws
// std::invalid_argument on the first violation. Experiments call this before
// spending any compute.
void check_config(const ExperimentConfig& cfg);

// Quick ensemble summaries: entry magnitudes and row second moments.
ResultTable sample_summary(const ExperimentConfig& cfg);

// Spectral range and density at the reference energy.
ResultTable spectrum_summary(const ExperimentConfig& cfg);

// Density-of-states histogram, one row per bin, with a semicircle reference.
ResultTable dos_histogram(const ExperimentConfig& cfg);

// Local spectral statistics near E: pooled gap ratios, unfolded-gap KS
// distances, and box counting statistics against the estimated intensity.
ResultTable poisson_test(const ExperimentConfig& cfg);

// Block point processes of the depth-m_cut truncation: X(n,l) = expected
// number of blocks putting at least l rescaled eigenvalues in the box.
ResultTable component_counting(const ExperimentConfig& cfg);

// Coupled truncation error |nu_n - nu_{n,m}| at z_n = E + 2^{-n} z for each
// m in the range, with the fitted log2 slope and the reference decay line.
ResultTable truncation_flow(const ExperimentConfig& cfg);

// Eigenfunction mass outside ball(x, m_cut) for window eigenvalues, plus the
// off-ball resolvent tail, across an n sweep.
ResultTable localization_run(const ExperimentConfig& cfg);

// Bulk eigenvector spread (ipr, sup-norm), DOS distance to the semicircle,
// and gap ratios, across an n sweep.
ResultTable delocalization_run(const ExperimentConfig& cfg);

// (c, n) grid -> gap-ratio mean, median ipr * 2^n, median localization mass.
// Each cell reuses the single-experiment kernels, so a one-cell sweep equals
// the corresponding single runs bit for bit.
ResultTable phase_sweep(const ExperimentConfig& cfg);

// Reference constants the tables print alongside measured statistics.
// kGapRatioPoisson is exact (2 ln 2 - 1); kGapRatioGoe is a Monte Carlo
// value for bulk orthogonal-class spacings, frozen here.
inline constexpr double kGapRatioPoisson = 0.38629436111989062;
inline constexpr double kGapRatioGoe = 0.5307;

}  // namespace umlab
