#include "umlab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace umlab {

namespace {

double abs_of(double v) { return std::abs(v); }
double abs_of(const std::complex<double>& v) { return std::abs(v); }
double abs_sq_of(double v) { return v * v; }
double abs_sq_of(const std::complex<double>& v) {
  return v.real() * v.real() + v.imag() * v.imag();
}

// Index range [lo, hi) of sorted eigenvalues falling inside the window.
std::pair<std::int64_t, std::int64_t> window_range(
    const std::vector<double>& ev, SpectralWindow w) {
  const auto lo = std::lower_bound(ev.begin(), ev.end(), w.center - w.halfwidth);
  const auto hi = std::upper_bound(ev.begin(), ev.end(), w.center + w.halfwidth);
  return {lo - ev.begin(), hi - ev.begin()};
}

// Merge runs of points closer than kDegenerateGap, keeping the first of each
// run, and report how many were dropped.
std::vector<double> merge_degenerate(const std::vector<double>& points,
                                     std::int64_t* dropped) {
  std::vector<double> kept;
  kept.reserve(points.size());
  std::int64_t n_dropped = 0;
  for (double p : points) {
    if (kept.empty() || p - kept.back() >= kDegenerateGap)
      kept.push_back(p);
    else
      ++n_dropped;
  }
  if (dropped) *dropped = n_dropped;
  return kept;
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

template <typename T>
void require_full_vectors(const Spectrum<T>& s, SiteIndex x) {
  if (!s.eigenvectors.has_value())
    throw std::invalid_argument("spectrum carries no eigenvectors");
  check_site(x);
  if (sites_at_level(x.level) != s.dim())
    throw std::invalid_argument("site level does not match spectrum dimension");
}

}  // namespace

PointSample rescale_values(const std::vector<double>& eigenvalues,
                           double energy, double scale, double halfwidth,
                           int trial) {
  PointSample out;
  out.trial = trial;
  out.energy = energy;
  out.scale = scale;
  out.window_halfwidth = halfwidth;
  out.points.reserve(eigenvalues.size());
  for (double lambda : eigenvalues) {
    const double p = scale * (lambda - energy);
    if (std::abs(p) <= halfwidth) out.points.push_back(p);
  }
  std::sort(out.points.begin(), out.points.end());
  return out;
}

DosEstimate dos_estimate(const std::vector<std::vector<double>>& pool,
                         std::int64_t dim, int bins, double lo, double hi) {
  if (pool.empty()) throw std::invalid_argument("dos_estimate: empty pool");
  if (dim < 1) throw std::invalid_argument("dos_estimate: dim must be >= 1");
  if (bins < 1 || !(hi > lo))
    throw std::invalid_argument("dos_estimate: bad bin layout");

  DosEstimate out;
  out.trials = static_cast<int>(pool.size());
  out.edges.resize(bins + 1);
  const double span = hi - lo;
  for (int b = 0; b <= bins; ++b)
    out.edges[b] = lo + span * static_cast<double>(b) / bins;

  // Bins are half-open [e_b, e_{b+1}) except the last, which is closed.
  std::vector<std::vector<double>> per_trial(
      bins, std::vector<double>(pool.size(), 0.0));
  std::vector<double> captured(pool.size(), 0.0);
  for (std::size_t t = 0; t < pool.size(); ++t) {
    std::int64_t in_range = 0;
    for (double lambda : pool[t]) {
      if (lambda < lo || lambda > hi) continue;
      int b = static_cast<int>((lambda - lo) / span * bins);
      if (b >= bins) b = bins - 1;
      per_trial[b][t] += 1.0;
      ++in_range;
    }
    captured[t] = static_cast<double>(in_range) / static_cast<double>(dim);
  }

  out.density.resize(bins);
  out.density_se.resize(bins);
  const double trials = static_cast<double>(pool.size());
  for (int b = 0; b < bins; ++b) {
    const double width = out.edges[b + 1] - out.edges[b];
    for (double& c : per_trial[b]) c /= static_cast<double>(dim) * width;
    const double mean =
        std::accumulate(per_trial[b].begin(), per_trial[b].end(), 0.0) / trials;
    out.density[b] = mean;
    out.density_se[b] = sample_sd(per_trial[b], mean) / std::sqrt(trials);
  }
  out.captured_fraction =
      std::accumulate(captured.begin(), captured.end(), 0.0) / trials;
  return out;
}

Estimate density_near(const std::vector<std::vector<double>>& pool,
                      std::int64_t dim, double energy, double bandwidth) {
  if (pool.empty()) throw std::invalid_argument("density_near: empty pool");
  if (!(bandwidth > 0.0))
    throw std::invalid_argument("density_near: bandwidth must be positive");
  std::vector<double> per_trial;
  per_trial.reserve(pool.size());
  for (const auto& ev : pool) {
    std::int64_t count = 0;
    for (double lambda : ev)
      if (std::abs(lambda - energy) <= bandwidth) ++count;
    per_trial.push_back(static_cast<double>(count) /
                        (static_cast<double>(dim) * 2.0 * bandwidth));
  }
  return mean_and_se(per_trial);
}

GapRatioStats gap_ratios(const PointSample& sample) {
  if (sample.points.size() < 3)
    throw std::invalid_argument("gap_ratios: need at least 3 points");
  GapRatioStats out;
  const std::vector<double> pts = merge_degenerate(sample.points, &out.degenerate);
  if (pts.size() < 3) return out;
  out.ratios.reserve(pts.size() - 2);
  for (std::size_t j = 0; j + 2 < pts.size(); ++j) {
    const double a = pts[j + 1] - pts[j];
    const double b = pts[j + 2] - pts[j + 1];
    out.ratios.push_back(std::min(a, b) / std::max(a, b));
  }
  return out;
}

std::vector<double> unit_mean_gaps(const PointSample& sample,
                                   std::int64_t* degenerate) {
  const std::vector<double> pts = merge_degenerate(sample.points, degenerate);
  if (pts.size() < 2)
    throw std::invalid_argument("unit_mean_gaps: need at least 2 distinct points");
  std::vector<double> gaps(pts.size() - 1);
  for (std::size_t j = 0; j + 1 < pts.size(); ++j) gaps[j] = pts[j + 1] - pts[j];
  const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) /
                      static_cast<double>(gaps.size());
  for (double& g : gaps) g /= mean;
  return gaps;
}

CountingStats counting_statistics(const std::vector<PointSample>& pool,
                                  double box_lo, double box_hi) {
  if (pool.empty())
    throw std::invalid_argument("counting_statistics: empty pool");
  if (!(box_hi > box_lo))
    throw std::invalid_argument("counting_statistics: empty box");

  // Boxes are half-open [lo, hi) so adjacent boxes tile without overlap.
  std::vector<std::int64_t> counts;
  counts.reserve(pool.size());
  std::int64_t max_count = 0;
  for (const PointSample& s : pool) {
    const auto lo = std::lower_bound(s.points.begin(), s.points.end(), box_lo);
    const auto hi = std::lower_bound(s.points.begin(), s.points.end(), box_hi);
    counts.push_back(hi - lo);
    max_count = std::max(max_count, counts.back());
  }

  CountingStats out;
  out.samples = static_cast<std::int64_t>(counts.size());
  out.histogram.assign(max_count + 1, 0);
  for (std::int64_t c : counts) ++out.histogram[c];

  const double n = static_cast<double>(out.samples);
  out.p_geq.resize(max_count);
  out.p_geq_se.resize(max_count);
  std::int64_t at_least = out.samples;
  for (std::int64_t l = 1; l <= max_count; ++l) {
    at_least -= out.histogram[l - 1];
    const double p = static_cast<double>(at_least) / n;
    out.p_geq[l - 1] = p;
    out.p_geq_se[l - 1] = std::sqrt(p * (1.0 - p) / n);
  }

  out.mean = static_cast<double>(
                 std::accumulate(counts.begin(), counts.end(), std::int64_t{0})) /
             n;
  double var = 0.0;
  if (counts.size() > 1) {
    for (std::int64_t c : counts) {
      const double d = static_cast<double>(c) - out.mean;
      var += d * d;
    }
    var /= n - 1.0;
  }
  out.dispersion = out.mean > 0.0 ? var / out.mean : 0.0;
  return out;
}

template <typename T>
double eigenfunction_correlator(const Spectrum<T>& s, SiteIndex x, SiteIndex y,
                                SpectralWindow w) {
  require_full_vectors(s, x);
  check_site(y);
  if (y.level != x.level)
    throw std::invalid_argument("sites must come from the same level");
  const auto [jlo, jhi] = window_range(s.eigenvalues, w);
  const T* rx = s.eigenvectors->row(x.value - 1);
  const T* ry = s.eigenvectors->row(y.value - 1);
  double q = 0.0;
  for (std::int64_t j = jlo; j < jhi; ++j) q += abs_of(rx[j]) * abs_of(ry[j]);
  return q;
}

template <typename T>
double mass_outside_ball(const Spectrum<T>& s, SiteIndex x, int m,
                         SpectralWindow w) {
  require_full_vectors(s, x);
  if (m < 0 || m > x.level)
    throw std::invalid_argument("ball radius must be in [0, level]");
  const auto [jlo, jhi] = window_range(s.eigenvalues, w);
  if (jlo == jhi) return 0.0;
  const BlockRange b = ball(x, m);
  const std::int64_t dim = s.dim();

  // acc[j] = sum over sites outside the ball of |psi_j(y)|; rows are
  // contiguous over j, so scan row by row.
  std::vector<double> acc(jhi - jlo, 0.0);
  for (std::int64_t y = 0; y < dim; ++y) {
    if (b.contains(y + 1)) continue;
    const T* ry = s.eigenvectors->row(y);
    for (std::int64_t j = jlo; j < jhi; ++j) acc[j - jlo] += abs_of(ry[j]);
  }
  const T* rx = s.eigenvectors->row(x.value - 1);
  double total = 0.0;
  for (std::int64_t j = jlo; j < jhi; ++j)
    total += abs_of(rx[j]) * acc[j - jlo];
  return total;
}

namespace {

template <typename T>
void require_normalized(const std::vector<T>& psi) {
  double norm2 = 0.0;
  for (const T& v : psi) norm2 += abs_sq_of(v);
  if (std::abs(norm2 - 1.0) > 1e-8)
    throw std::invalid_argument("vector is not l2-normalized");
}

template <typename T>
double ipr_impl(const std::vector<T>& psi) {
  require_normalized(psi);
  double acc = 0.0;
  for (const T& v : psi) {
    const double p = abs_sq_of(v);
    acc += p * p;
  }
  return acc;
}

template <typename T>
double sup_norm_impl(const std::vector<T>& psi) {
  require_normalized(psi);
  double best = 0.0;
  for (const T& v : psi) best = std::max(best, abs_sq_of(v));
  return std::sqrt(best);
}

}  // namespace

double ipr(const std::vector<double>& psi) { return ipr_impl(psi); }
double ipr(const std::vector<std::complex<double>>& psi) {
  return ipr_impl(psi);
}
double sup_norm(const std::vector<double>& psi) { return sup_norm_impl(psi); }
double sup_norm(const std::vector<std::complex<double>>& psi) {
  return sup_norm_impl(psi);
}

double ks_distance(const std::vector<double>& gaps, GapReference reference,
                   double theta) {
  if (gaps.size() < 10)
    throw std::invalid_argument("ks_distance: need at least 10 gaps");
  std::vector<double> s = gaps;
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double dist = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double x = std::max(s[i], 0.0);
    const double cdf = reference == GapReference::poisson_unit
                           ? 1.0 - std::exp(-theta * x)
                           : 1.0 - std::exp(-0.25 * std::numbers::pi * x * x);
    const double below = static_cast<double>(i) / n;
    const double above = static_cast<double>(i + 1) / n;
    dist = std::max({dist, cdf - below, above - cdf});
  }
  return dist;
}

double semicircle_density(double energy) {
  const double disc = 4.0 - energy * energy;
  if (disc <= 0.0) return 0.0;
  return std::sqrt(disc) / (2.0 * std::numbers::pi);
}

double semicircle_cdf(double energy) {
  if (energy <= -2.0) return 0.0;
  if (energy >= 2.0) return 1.0;
  const double disc = std::sqrt(4.0 - energy * energy);
  return 0.5 + energy * disc / (4.0 * std::numbers::pi) + std::asin(energy / 2.0) / std::numbers::pi;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  q = std::clamp(q, 0.0, 1.0);
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) {
  return quantile(std::move(values), 0.5);
}

Estimate mean_and_se(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_and_se: empty input");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  return {mean, sample_sd(values, mean) / std::sqrt(n)};
}

Estimate pooled_mean_se(const std::vector<double>& pooled, int sections) {
  if (pooled.empty())
    throw std::invalid_argument("pooled_mean_se: empty input");
  const std::int64_t n = static_cast<std::int64_t>(pooled.size());
  const std::int64_t s = std::min<std::int64_t>(std::max(sections, 1), n);
  std::vector<double> section_means;
  section_means.reserve(s);
  for (std::int64_t k = 0; k < s; ++k) {
    const std::int64_t lo = k * n / s;
    const std::int64_t hi = (k + 1) * n / s;
    double acc = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) acc += pooled[i];
    section_means.push_back(acc / static_cast<double>(hi - lo));
  }
  const double grand =
      std::accumulate(pooled.begin(), pooled.end(), 0.0) / static_cast<double>(n);
  const double sd = sample_sd(section_means, grand);
  return {grand, sd / std::sqrt(static_cast<double>(s))};
}

template double eigenfunction_correlator<double>(const Spectrum<double>&,
                                                 SiteIndex, SiteIndex,
                                                 SpectralWindow);
template double eigenfunction_correlator<std::complex<double>>(
    const Spectrum<std::complex<double>>&, SiteIndex, SiteIndex,
    SpectralWindow);
template double mass_outside_ball<double>(const Spectrum<double>&, SiteIndex,
                                          int, SpectralWindow);
template double mass_outside_ball<std::complex<double>>(
    const Spectrum<std::complex<double>>&, SiteIndex, int, SpectralWindow);

}  // namespace umlab
