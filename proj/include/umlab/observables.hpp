#pragma once

#include <cstdint>
#include <vector>

#include "umlab/hierarchy.hpp"
#include "umlab/spectral.hpp"

// Point-process and eigenvector statistics extracted from spectra: density of
// states, rescaled local samples, gap ratios, counting statistics,
// eigenfunction correlators, ball mass, IPR and sup-norms.

namespace umlab {

// Energy interval [center - halfwidth, center + halfwidth].
struct SpectralWindow {
  double center = 0.0;
  double halfwidth = 0.0;

  bool contains(double lambda) const {
    return lambda >= center - halfwidth && lambda <= center + halfwidth;
  }
};

// Eigenvalues near a reference energy, mapped to scale*(lambda - energy) and
// clipped to |point| <= window_halfwidth. Always sorted ascending.
struct PointSample {
  std::vector<double> points;
  int trial = -1;
  double energy = 0.0;
  double scale = 1.0;
  double window_halfwidth = 0.0;
};

PointSample rescale_values(const std::vector<double>& eigenvalues,
                           double energy, double scale, double halfwidth,
                           int trial = -1);

template <typename T>
PointSample rescale(const Spectrum<T>& s, double energy, double halfwidth) {
  const double scale =
      static_cast<double>(sites_at_level(s.meta.params.n));
  return rescale_values(s.eigenvalues, energy, scale, halfwidth, s.meta.trial);
}

// Histogram density of states, per site per unit energy, averaged over
// trials. integral(density * widths) equals the captured fraction.
struct DosEstimate {
  std::vector<double> edges;
  std::vector<double> density;
  std::vector<double> density_se;
  int trials = 0;
  double captured_fraction = 0.0;
};

DosEstimate dos_estimate(const std::vector<std::vector<double>>& pool,
                         std::int64_t dim, int bins, double lo, double hi);

// A point estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// Box-kernel density at one energy: mean over trials of
// #{lambda : |lambda - energy| <= bandwidth} / (dim * 2 * bandwidth).
Estimate density_near(const std::vector<std::vector<double>>& pool,
                      std::int64_t dim, double energy,
                      double bandwidth = 0.05);

// Consecutive-gap ratios min(s_j, s_{j+1}) / max(s_j, s_{j+1}).
// Points closer than kDegenerateGap are merged first and reported.
struct GapRatioStats {
  std::vector<double> ratios;
  std::int64_t degenerate = 0;
};

inline constexpr double kDegenerateGap = 1e-14;

GapRatioStats gap_ratios(const PointSample& sample);

// Consecutive gaps divided by their mean, after merging degenerate points.
std::vector<double> unit_mean_gaps(const PointSample& sample,
                                   std::int64_t* degenerate = nullptr);

// Distribution of per-sample point counts in one box.
struct CountingStats {
  std::vector<std::int64_t> histogram;  // histogram[k] = #samples with k points
  std::vector<double> p_geq;            // p_geq[l-1] = P(count >= l), l = 1..
  std::vector<double> p_geq_se;
  double mean = 0.0;
  double dispersion = 0.0;  // variance / mean; 0 when no points were seen
  std::int64_t samples = 0;
};

CountingStats counting_statistics(const std::vector<PointSample>& pool,
                                  double box_lo, double box_hi);

// Q(x,y;W) = sum over eigenvalues in W of |psi(x) psi(y)|.
template <typename T>
double eigenfunction_correlator(const Spectrum<T>& s, SiteIndex x, SiteIndex y,
                                SpectralWindow w);

// Sum of Q(x,y;W) over all sites y outside ball(x, m).
template <typename T>
double mass_outside_ball(const Spectrum<T>& s, SiteIndex x, int m,
                         SpectralWindow w);

// Both require an l2-normalized vector (tolerance 1e-8).
double ipr(const std::vector<double>& psi);
double ipr(const std::vector<std::complex<double>>& psi);
double sup_norm(const std::vector<double>& psi);
double sup_norm(const std::vector<std::complex<double>>& psi);

enum class GapReference { poisson_unit, goe_surmise };

// Kolmogorov-Smirnov distance between the empirical gap CDF and a unit-mean
// reference law: 1 - exp(-theta s) or 1 - exp(-pi s^2 / 4).
double ks_distance(const std::vector<double>& gaps, GapReference reference,
                   double theta = 1.0);

// Semicircle density sqrt((4 - E^2)_+) / (2 pi) and its CDF.
double semicircle_density(double energy);
double semicircle_cdf(double energy);

// Type-7 quantile (linear interpolation between order statistics).
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

Estimate mean_and_se(const std::vector<double>& values);

// Standard error for a pooled statistic: the pooled list is split into
// `sections` contiguous runs kept in trial order, and the spread of
// section means estimates the error of the grand mean.
Estimate pooled_mean_se(const std::vector<double>& pooled, int sections = 10);

}  // namespace umlab
