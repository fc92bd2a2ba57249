#include "umlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>

#include "umlab/observables.hpp"
#include "umlab/rng.hpp"
#include "umlab/spectral.hpp"

namespace umlab {

namespace {

using std::int64_t;

// ---------------------------------------------------------------- rows

ResultRow base_row(const ExperimentConfig& cfg, const EnsembleParams& p,
                   const char* experiment) {
  ResultRow r;
  r.experiment = experiment;
  r.n = p.n;
  r.c = p.c;
  r.symmetry = to_string(p.symmetry);
  r.normalized = p.normalized;
  r.seed = p.master_seed;
  r.trials = cfg.trials;
  return r;
}

void push_row(ResultTable& table, ResultRow base, const std::string& statistic,
              const std::string& qualifier, double value, double se,
              int64_t count) {
  base.statistic = statistic;
  base.qualifier = qualifier;
  base.value = value;
  base.se = se;
  base.count = count;
  table.rows.push_back(std::move(base));
}

void mark_partial(ResultTable& table) {
  if (table.error.empty()) return;
  for (ResultRow& r : table.rows)
    if (r.flag.empty()) r.flag = "partial";
}

std::string q_n(int n) { return "n=" + std::to_string(n); }
std::string q_m(int m) { return "m=" + std::to_string(m); }
std::string q_cell(double c, int n) {
  return "c=" + format_double(c) + " " + q_n(n);
}

// Normal-approximation standard error of a quantile estimate, with the
// local density proxied by the interquartile range.
double median_se(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  const double iqr = quantile(s, 0.75) - quantile(s, 0.25);
  return 1.2533 * (iqr / 1.349) / std::sqrt(static_cast<double>(v.size()));
}

// ---------------------------------------------------------------- trials

// Runs `body(t)` for t in [0, trials) on a bounded worker pool. Failed
// trials record the first error message; surviving results come back in
// trial order, so aggregation is scheduler-independent.
template <class R, class F>
std::vector<R> run_trials(int trials, int workers, ResultTable& table,
                          F&& body) {
  std::vector<std::optional<R>> slots(trials);
  std::vector<std::string> errors(trials);
  const int pool = std::max(1, workers);
#pragma omp parallel for schedule(dynamic) num_threads(pool)
  for (int t = 0; t < trials; ++t) {
    try {
      slots[t].emplace(body(t));
    } catch (const std::exception& e) {
      errors[t] = e.what();
    }
  }
  std::vector<R> out;
  out.reserve(trials);
  for (int t = 0; t < trials; ++t) {
    if (!errors[t].empty()) {
      if (table.error.empty())
        table.error = "trial " + std::to_string(t) + ": " + errors[t];
    } else if (slots[t].has_value()) {
      out.push_back(std::move(*slots[t]));
    }
  }
  return out;
}

// ---------------------------------------------------------------- kernels

// Sorted eigenvalues of one trial. m < 0 or m = n: the full matrix; else the
// depth-m truncation, diagonalized block by block (the blocks are exact).
template <class T>
std::vector<double> trial_sorted_values_t(const EnsembleParams& p,
                                          std::uint64_t trial, int m) {
  if (m < 0 || m >= p.n) {
    auto f = tridiagonalize<T>(assemble<T>(p, trial, true), true);
    return tridiagonal_eigenvalues(std::move(f.diag), std::move(f.offdiag));
  }
  std::vector<double> all;
  all.reserve(sites_at_level(p.n));
  for (const BlockRange& b : blocks(p.n, m)) {
    auto f = tridiagonalize<T>(assemble_block<T>(p, trial, m, b), true);
    const auto vals =
        tridiagonal_eigenvalues(std::move(f.diag), std::move(f.offdiag));
    all.insert(all.end(), vals.begin(), vals.end());
  }
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<double> trial_sorted_values(const EnsembleParams& p,
                                        std::uint64_t trial, int m) {
  if (p.symmetry == SymmetryClass::orthogonal)
    return trial_sorted_values_t<double>(p, trial, m);
  return trial_sorted_values_t<std::complex<double>>(p, trial, m);
}

double nu_from_values(const std::vector<double>& values, int64_t dim,
                      ComplexEnergy z) {
  double acc = 0.0;
  for (double lambda : values) acc += poisson_kernel(lambda, z);
  return acc / static_cast<double>(dim);
}

// ---------------------------------------------------------------- windows

int64_t points_within(const std::vector<double>& sorted_values, double energy,
                      double scale, double halfwidth) {
  int64_t count = 0;
  for (double lambda : sorted_values)
    if (std::abs(scale * (lambda - energy)) <= halfwidth) ++count;
  return count;
}

struct GapPipeline {
  double halfwidth = 0.0;  // rescaled units
  Estimate nu;
  int widenings = 0;
  int64_t low_capture = 0;  // trials with < 3 window points at final width
  std::vector<PointSample> samples;
  std::vector<double> ratios;     // pooled consecutive-gap ratios, trial order
  std::vector<double> unit_gaps;  // pooled per-trial unit-mean gaps
  int64_t degenerate = 0;
  bool window_warned = false;
};

// Shared local-statistics pipeline: pick the window, rescale every trial,
// pool gap ratios and unfolded gaps. Used verbatim by poisson_test,
// delocalization_run and phase_sweep so their shared statistics agree
// bit for bit.
GapPipeline gap_pipeline(const ExperimentConfig& cfg, const EnsembleParams& p,
                         const std::vector<std::vector<double>>& pool,
                         ResultTable& table) {
  GapPipeline out;
  const int64_t dim = sites_at_level(p.n);
  const double scale = static_cast<double>(dim);
  out.nu = density_near(pool, dim, cfg.energy, 0.05);

  if (cfg.window_halfwidth > 0.0) {
    out.halfwidth = cfg.window_halfwidth;
  } else if (out.nu.value > 0.0) {
    const double target =
        std::clamp(static_cast<double>(dim) / 8.0, 32.0, 300.0);
    out.halfwidth = target / (2.0 * out.nu.value);
  } else {
    out.halfwidth = scale;  // no density at E: fall back to order-one width
    table.warnings.push_back(q_n(p.n) +
                             ": estimated density at E is zero, using an "
                             "order-one window");
    out.window_warned = true;
  }

  // Widen until more than half the trials catch at least 3 points.
  const int64_t trials = static_cast<int64_t>(pool.size());
  for (;;) {
    out.low_capture = 0;
    for (const auto& values : pool)
      if (points_within(values, cfg.energy, scale, out.halfwidth) < 3)
        ++out.low_capture;
    if (2 * out.low_capture <= trials || out.widenings >= 3) break;
    out.halfwidth *= 2.0;
    ++out.widenings;
  }
  if (out.widenings > 0)
    table.warnings.push_back(
        q_n(p.n) + ": window too sparse, widened " +
        std::to_string(out.widenings) + "x to " + format_double(out.halfwidth));
  if (2 * out.low_capture > trials) {
    table.warnings.push_back(q_n(p.n) +
                             ": window still captured < 3 eigenvalues in more "
                             "than half the trials after widening");
    out.window_warned = true;
  }

  out.samples.reserve(pool.size());
  for (std::size_t t = 0; t < pool.size(); ++t)
    out.samples.push_back(rescale_values(pool[t], cfg.energy, scale,
                                         out.halfwidth,
                                         static_cast<int>(t)));

  for (const PointSample& s : out.samples) {
    if (s.points.size() < 3) continue;
    GapRatioStats gr = gap_ratios(s);
    out.degenerate += gr.degenerate;
    out.ratios.insert(out.ratios.end(), gr.ratios.begin(), gr.ratios.end());
    try {
      const auto gaps = unit_mean_gaps(s);
      out.unit_gaps.insert(out.unit_gaps.end(), gaps.begin(), gaps.end());
    } catch (const std::invalid_argument&) {
      // all points degenerate; nothing to unfold
    }
  }
  return out;
}

void push_window_rows(ResultTable& table, const ResultRow& base,
                      const std::string& qual, const GapPipeline& g,
                      int trials) {
  push_row(table, base, "nu_hat", qual, g.nu.value, g.nu.se, trials);
  push_row(table, base, "window_halfwidth_rescaled", qual, g.halfwidth, 0.0,
           trials);
  push_row(table, base, "low_capture_trials", qual,
           static_cast<double>(g.low_capture), 0.0, trials);
}

void push_gap_rows(ResultTable& table, const ResultRow& base,
                   const std::string& qual, const GapPipeline& g,
                   int trials) {
  if (!g.ratios.empty()) {
    const Estimate e = pooled_mean_se(g.ratios);
    push_row(table, base, "gap_ratio_mean", qual, e.value, e.se,
             static_cast<int64_t>(g.ratios.size()));
  } else {
    table.warnings.push_back(qual + ": no gap ratios (too few window points)");
  }
  push_row(table, base, "degenerate_gaps", qual,
           static_cast<double>(g.degenerate), 0.0, trials);
  if (g.unit_gaps.size() >= 10) {
    push_row(table, base, "ks_unfolded_poisson", qual,
             ks_distance(g.unit_gaps, GapReference::poisson_unit), 0.0,
             static_cast<int64_t>(g.unit_gaps.size()));
    push_row(table, base, "ks_unfolded_goe", qual,
             ks_distance(g.unit_gaps, GapReference::goe_surmise), 0.0,
             static_cast<int64_t>(g.unit_gaps.size()));
  }
}

// ---------------------------------------------------------------- counting

int64_t count_in_box(const std::vector<double>& sorted_points, double lo,
                     double hi) {
  const auto a =
      std::lower_bound(sorted_points.begin(), sorted_points.end(), lo);
  const auto b =
      std::lower_bound(sorted_points.begin(), sorted_points.end(), hi);
  return b - a;
}

// ---------------------------------------------------------------- mass

struct MassTrial {
  std::vector<double> masses;  // one per sampled site, window nonempty only
  std::vector<double> tails;   // off-ball resolvent tail, one per site
  int64_t window_count = 0;
  bool conditioned = false;    // window held at least one eigenvalue
};

template <class T>
void append_window_absvecs(const TridiagonalForm<T>& f,
                           const std::vector<double>& lambdas_sorted,
                           SpectralWindow w, int64_t offset, int64_t dim,
                           std::vector<std::vector<double>>* absvecs,
                           int64_t* window_count) {
  const auto lo = std::lower_bound(lambdas_sorted.begin(),
                                   lambdas_sorted.end(), w.center - w.halfwidth);
  const auto hi = std::upper_bound(lambdas_sorted.begin(),
                                   lambdas_sorted.end(), w.center + w.halfwidth);
  const std::vector<double> inside(lo, hi);
  *window_count += static_cast<int64_t>(inside.size());
  if (inside.empty()) return;
  const auto tvecs = tridiagonal_eigenvectors(f.diag, f.offdiag, inside);
  for (const auto& tv : tvecs) {
    std::vector<double> a(dim, 0.0);
    if constexpr (std::is_same_v<T, double>) {
      std::vector<double> psi = tv;
      f.apply_q(psi);
      for (std::size_t i = 0; i < psi.size(); ++i)
        a[offset + i] = std::abs(psi[i]);
    } else {
      std::vector<std::complex<double>> psi(tv.begin(), tv.end());
      f.apply_q(psi);
      for (std::size_t i = 0; i < psi.size(); ++i)
        a[offset + i] = std::abs(psi[i]);
    }
    absvecs->push_back(std::move(a));
  }
}

// Mass outside ball(x, m_cut) for window eigenfunctions, plus the resolvent
// tail, at uniformly sampled sites. The truncated variant keeps structural
// zeros exact: eigenvectors live inside their blocks, so masses and tails
// vanish identically once the ball covers the block.
template <class T>
MassTrial mass_trial_t(const EnsembleParams& p, std::uint64_t trial,
                       const ExperimentConfig& cfg) {
  const int n = p.n;
  const int64_t dim = sites_at_level(n);
  const int mcut = m_cutoff(n, cfg.epsilon);
  const SpectralWindow w{cfg.energy, std::exp2(-(1.0 - cfg.w) * n)};
  const ComplexEnergy z{cfg.energy, std::exp2(-(1.0 + cfg.l_loc) * n)};

  RngStream site_rng(p.master_seed, StreamKind::site_picks, trial, n, 0);
  std::vector<int64_t> sites(cfg.sites_per_trial);
  for (auto& s : sites)
    s = 1 + static_cast<int64_t>(site_rng.next_below(dim));

  const bool truncated = cfg.truncate_to_m >= 0 && cfg.truncate_to_m < n;
  std::vector<BlockRange> regions;
  if (truncated)
    regions = blocks(n, cfg.truncate_to_m);
  else
    regions.push_back(BlockRange{1, dim, n});

  MassTrial out;
  std::vector<TridiagonalForm<T>> factors;
  factors.reserve(regions.size());
  std::vector<std::vector<double>> absvecs;
  for (const BlockRange& b : regions) {
    DenseMatrix<T> h = truncated
                           ? assemble_block<T>(p, trial, cfg.truncate_to_m, b)
                           : assemble<T>(p, trial, true);
    factors.push_back(tridiagonalize<T>(std::move(h), true));
    const auto lambdas =
        tridiagonal_eigenvalues(factors.back().diag, factors.back().offdiag);
    append_window_absvecs<T>(factors.back(), lambdas, w, b.start - 1, dim,
                             &absvecs, &out.window_count);
  }
  out.conditioned = !absvecs.empty();

  // prefix[j][y] = sum of |psi_j| over sites < y; off-ball sums then cost
  // O(1) per site with no cancellation.
  std::vector<std::vector<double>> prefix(absvecs.size());
  for (std::size_t j = 0; j < absvecs.size(); ++j) {
    prefix[j].assign(dim + 1, 0.0);
    for (int64_t y = 0; y < dim; ++y)
      prefix[j][y + 1] = prefix[j][y] + absvecs[j][y];
  }

  for (int64_t x : sites) {
    const BlockRange inner = ball(SiteIndex{x, n}, mcut);
    if (out.conditioned) {
      double mass = 0.0;
      for (std::size_t j = 0; j < absvecs.size(); ++j) {
        const double outside = prefix[j][inner.start - 1] +
                               (prefix[j][dim] - prefix[j][inner.end]);
        mass += absvecs[j][x - 1] * outside;
      }
      out.masses.push_back(mass);
    }
    // resolvent tail: the column is supported on x's region
    std::size_t rx = 0;
    while (!regions[rx].contains(x)) ++rx;
    const BlockRange& reg = regions[rx];
    const auto col = resolvent_column<T>(factors[rx], x - reg.start, z);
    double tail = 0.0;
    for (int64_t y = reg.start; y <= reg.end; ++y) {
      if (inner.contains(y)) continue;
      tail += std::abs(col[y - reg.start].imag());
    }
    out.tails.push_back(tail / static_cast<double>(dim));
  }
  return out;
}

MassTrial mass_trial(const EnsembleParams& p, std::uint64_t trial,
                     const ExperimentConfig& cfg) {
  if (p.symmetry == SymmetryClass::orthogonal)
    return mass_trial_t<double>(p, trial, cfg);
  return mass_trial_t<std::complex<double>>(p, trial, cfg);
}

// ---------------------------------------------------------------- vectors

struct DelocTrial {
  std::vector<double> values;  // full sorted spectrum
  std::vector<double> iprs;    // bulk ipr * 2^n
  std::vector<double> sups;    // bulk sup_norm * 2^{n/2}
};

template <class T>
DelocTrial deloc_trial_t(const EnsembleParams& p, std::uint64_t trial,
                         const ExperimentConfig& cfg) {
  DenseMatrix<T> h = cfg.truncate_to_m >= 0
                         ? assemble<T>(p, trial, cfg.truncate_to_m, true)
                         : assemble<T>(p, trial, true);
  const Spectrum<T> s = eigh<T>(h, true, true);
  const int64_t dim = s.dim();

  DelocTrial out;
  out.values = s.eigenvalues;
  const double fdim = static_cast<double>(dim);
  std::vector<T> col(dim);
  for (int64_t j = dim / 4; j < 3 * dim / 4; ++j) {
    for (int64_t i = 0; i < dim; ++i) col[i] = (*s.eigenvectors)(i, j);
    out.iprs.push_back(ipr(col) * fdim);
    out.sups.push_back(sup_norm(col) * std::sqrt(fdim));
  }
  return out;
}

DelocTrial deloc_trial(const EnsembleParams& p, std::uint64_t trial,
                       const ExperimentConfig& cfg) {
  if (p.symmetry == SymmetryClass::orthogonal)
    return deloc_trial_t<double>(p, trial, cfg);
  return deloc_trial_t<std::complex<double>>(p, trial, cfg);
}

// ---------------------------------------------------------------- fits

struct LineFit {
  double slope = 0.0;
  double se = 0.0;
  int points = 0;
};

LineFit fit_slope(const std::vector<std::pair<double, double>>& xy) {
  LineFit out;
  out.points = static_cast<int>(xy.size());
  if (xy.size() < 2) return out;
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : xy) {
    mx += x;
    my += y;
  }
  mx /= xy.size();
  my /= xy.size();
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : xy) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  out.slope = sxy / sxx;
  if (xy.size() > 2) {
    const double intercept = my - out.slope * mx;
    double ss = 0.0;
    for (const auto& [x, y] : xy) {
      const double r = y - (intercept + out.slope * x);
      ss += r * r;
    }
    out.se = std::sqrt(ss / static_cast<double>(xy.size() - 2) / sxx);
  }
  return out;
}

std::vector<int> resolved_n_list(const ExperimentConfig& cfg) {
  if (!cfg.n_list.empty()) return cfg.n_list;
  return {cfg.params.n};
}

std::vector<double> resolved_c_list(const ExperimentConfig& cfg) {
  if (!cfg.c_list.empty()) return cfg.c_list;
  return {cfg.params.c};
}

}  // namespace

// ---------------------------------------------------------------- config

int m_cutoff(int n, double epsilon) {
  return static_cast<int>(std::ceil((1.0 - epsilon) * n));
}

void check_config(const ExperimentConfig& cfg) {
  const auto fail = [](const std::string& msg) {
    throw std::invalid_argument(msg);
  };
  const auto check_n = [&](int n) {
    if (n < 0 || n > 13)
      fail("n must be in [0, 13], got " + std::to_string(n));
  };
  check_n(cfg.params.n);
  for (int n : cfg.n_list) check_n(n);
  if (cfg.trials < 1) fail("trials must be >= 1");
  if (!(cfg.w > 0.0 && cfg.w < 1.0)) fail("w must be in (0, 1)");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
    fail("epsilon must be in (0, 1)");
  if (!(cfg.l_loc > 0.0 && cfg.l_loc < 1.0)) fail("l_loc must be in (0, 1)");
  if (!(cfg.z_im > 0.0)) fail("z must lie in the upper half plane (z.im > 0)");
  if (!(cfg.box_width > 0.0)) fail("box_width must be positive");
  if (cfg.window_halfwidth < 0.0) fail("window_halfwidth must be >= 0");
  if (cfg.sites_per_trial < 1) fail("sites_per_trial must be >= 1");
  if (cfg.bins < 1) fail("bins must be >= 1");
  if (!(cfg.bin_hi > cfg.bin_lo)) fail("bin range must be nonempty");
  if (cfg.workers < 1) fail("workers must be >= 1");
  if (cfg.truncate_to_m > cfg.params.n)
    fail("truncate_to_m must be <= n");
}

// ---------------------------------------------------------------- summaries

ResultTable sample_summary(const ExperimentConfig& cfg) {
  check_config(cfg);
  ResultTable table;
  const EnsembleParams p = cfg.params;
  const int64_t dim = sites_at_level(p.n);

  struct Moments {
    double max_abs, row2, diag2;
  };
  const auto body = [&](int t) -> Moments {
    const auto stats = [&](const auto& h) {
      Moments m{0.0, 0.0, 0.0};
      for (int64_t i = 0; i < dim; ++i) {
        double row = 0.0;
        for (int64_t j = 0; j < dim; ++j) {
          const double a = std::abs(h(i, j));
          m.max_abs = std::max(m.max_abs, a);
          row += a * a;
        }
        m.row2 += row;
        const double d = std::abs(h(i, i));
        m.diag2 += d * d;
      }
      m.row2 /= static_cast<double>(dim);
      m.diag2 /= static_cast<double>(dim);
      return m;
    };
    const int m = cfg.truncate_to_m;
    if (p.symmetry == SymmetryClass::orthogonal)
      return stats(m >= 0 ? assemble<double>(p, t, m, true)
                          : assemble<double>(p, t, true));
    using cplx = std::complex<double>;
    return stats(m >= 0 ? assemble<cplx>(p, t, m, true)
                        : assemble<cplx>(p, t, true));
  };
  const auto pool = run_trials<Moments>(cfg.trials, cfg.workers, table, body);

  const ResultRow base = base_row(cfg, p, "sample");
  if (!pool.empty()) {
    std::vector<double> v(pool.size());
    const auto emit = [&](const char* name, auto field) {
      for (std::size_t i = 0; i < pool.size(); ++i) v[i] = field(pool[i]);
      const Estimate e = mean_and_se(v);
      push_row(table, base, name, "", e.value, e.se,
               static_cast<int64_t>(pool.size()));
    };
    emit("max_abs_entry", [](const Moments& m) { return m.max_abs; });
    emit("row_second_moment_mean", [](const Moments& m) { return m.row2; });
    emit("diag_second_moment_mean", [](const Moments& m) { return m.diag2; });

    double row2 = 0.0;
    const SiteIndex x{1, p.n};
    for (int64_t y = 1; y <= dim; ++y)
      row2 += entry_variance(x, SiteIndex{y, p.n}, p);
    push_row(table, base, "row_second_moment_analytic", "", row2, 0.0, 0);
    push_row(table, base, "diag_second_moment_analytic", "",
             entry_variance(x, x, p), 0.0, 0);
  }
  mark_partial(table);
  return table;
}

ResultTable spectrum_summary(const ExperimentConfig& cfg) {
  check_config(cfg);
  ResultTable table;
  const EnsembleParams p = cfg.params;
  const int64_t dim = sites_at_level(p.n);
  const auto pool = run_trials<std::vector<double>>(
      cfg.trials, cfg.workers, table,
      [&](int t) { return trial_sorted_values(p, t, cfg.truncate_to_m); });

  const ResultRow base = base_row(cfg, p, "spectrum");
  if (!pool.empty()) {
    std::vector<double> lo(pool.size()), hi(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      lo[i] = pool[i].front();
      hi[i] = pool[i].back();
    }
    const Estimate elo = mean_and_se(lo);
    const Estimate ehi = mean_and_se(hi);
    const int64_t trials = static_cast<int64_t>(pool.size());
    push_row(table, base, "lambda_min_mean", "", elo.value, elo.se, trials);
    push_row(table, base, "lambda_max_mean", "", ehi.value, ehi.se, trials);
    const Estimate nu = density_near(pool, dim, cfg.energy);
    push_row(table, base, "nu_hat", "", nu.value, nu.se, trials);
  }
  mark_partial(table);
  return table;
}

ResultTable dos_histogram(const ExperimentConfig& cfg) {
  check_config(cfg);
  ResultTable table;
  const EnsembleParams p = cfg.params;
  const int64_t dim = sites_at_level(p.n);
  const auto pool = run_trials<std::vector<double>>(
      cfg.trials, cfg.workers, table,
      [&](int t) { return trial_sorted_values(p, t, cfg.truncate_to_m); });

  const ResultRow base = base_row(cfg, p, "dos");
  if (!pool.empty()) {
    const DosEstimate dos =
        dos_estimate(pool, dim, cfg.bins, cfg.bin_lo, cfg.bin_hi);
    const int64_t trials = static_cast<int64_t>(pool.size());
    for (int b = 0; b < cfg.bins; ++b) {
      const double lo = dos.edges[b];
      const double hi = dos.edges[b + 1];
      const std::string qual = "bin=" + format_double(0.5 * (lo + hi));
      push_row(table, base, "density", qual, dos.density[b], dos.density_se[b],
               trials);
      push_row(table, base, "density_semicircle", qual,
               (semicircle_cdf(hi) - semicircle_cdf(lo)) / (hi - lo), 0.0, 0);
    }
    push_row(table, base, "captured_fraction", "", dos.captured_fraction, 0.0,
             trials);
  }
  mark_partial(table);
  return table;
}

// ---------------------------------------------------------------- poisson

ResultTable poisson_test(const ExperimentConfig& cfg) {
  check_config(cfg);
  ResultTable table;
  const EnsembleParams p = cfg.params;
  const auto pool = run_trials<std::vector<double>>(
      cfg.trials, cfg.workers, table,
      [&](int t) { return trial_sorted_values(p, t, cfg.truncate_to_m); });
  if (pool.empty()) {
    if (table.error.empty()) table.error = "no successful trials";
    return table;
  }

  const GapPipeline g = gap_pipeline(cfg, p, pool, table);
  const ResultRow base = base_row(cfg, p, "poisson-test");
  const int64_t trials = static_cast<int64_t>(pool.size());
  push_window_rows(table, base, "", g, trials);
  push_gap_rows(table, base, "", g, trials);
  push_row(table, base, "gap_ratio_reference_poisson", "", kGapRatioPoisson,
           0.0, 0);
  push_row(table, base, "gap_ratio_reference_goe", "", kGapRatioGoe, 0.0, 0);

  // Counting statistics: one central box, then a tiling of the window.
  const double half_box = cfg.box_width / 2.0;
  const CountingStats cs = counting_statistics(g.samples, -half_box, half_box);
  const double mean_se =
      cs.mean > 0.0
          ? std::sqrt(cs.dispersion * cs.mean / static_cast<double>(cs.samples))
          : 0.0;
  push_row(table, base, "count_mean_central_box", "", cs.mean, mean_se,
           cs.samples);
  push_row(table, base, "intensity_reference", "",
           g.nu.value * cfg.box_width, g.nu.se * cfg.box_width, trials);
  if (!cs.p_geq.empty())
    push_row(table, base, "p_count_geq_1", "", cs.p_geq[0], cs.p_geq_se[0],
             cs.samples);
  if (cs.p_geq.size() >= 2)
    push_row(table, base, "p_count_geq_2", "", cs.p_geq[1], cs.p_geq_se[1],
             cs.samples);

  const int boxes =
      static_cast<int>(std::floor(2.0 * g.halfwidth / cfg.box_width));
  if (boxes >= 1) {
    std::vector<double> counts;
    counts.reserve(g.samples.size() * boxes);
    for (const PointSample& s : g.samples)
      for (int k = 0; k < boxes; ++k)
        counts.push_back(static_cast<double>(
            count_in_box(s.points, -g.halfwidth + k * cfg.box_width,
                         -g.halfwidth + (k + 1) * cfg.box_width)));
    const Estimate cm = mean_and_se(counts);
    double var = 0.0;
    for (double v : counts) var += (v - cm.value) * (v - cm.value);
    if (counts.size() > 1) var /= static_cast<double>(counts.size() - 1);
    push_row(table, base, "count_dispersion_tiled", "",
             cm.value > 0.0 ? var / cm.value : 0.0, 0.0,
             static_cast<int64_t>(counts.size()));
  }
  mark_partial(table);
  return table;
}

// ---------------------------------------------------------------- counting

ResultTable component_counting(const ExperimentConfig& cfg) {
  check_config(cfg);
  ResultTable table;
  for (int n : resolved_n_list(cfg)) {
    EnsembleParams p = cfg.params;
    p.n = n;
    const int mcut = m_cutoff(n, cfg.epsilon);
    if (mcut < 1 || mcut >= n)
      throw std::invalid_argument("m_cutoff " + std::to_string(mcut) +
                                  " out of range (0, n) at n=" +
                                  std::to_string(n));
    const int64_t dim = sites_at_level(n);
    const double scale = static_cast<double>(dim);
    const double half_box = cfg.box_width / 2.0;

    struct CountTrial {
      int64_t x1 = 0, x2 = 0;
      std::vector<double> values;
    };
    const auto body = [&](int t) {
      CountTrial out;
      out.values.reserve(dim);
      const auto run = [&](auto tag) {
        using T = decltype(tag);
        for (const BlockRange& b : blocks(n, mcut)) {
          auto f = tridiagonalize<T>(assemble_block<T>(p, t, mcut, b), true);
          const auto vals = tridiagonal_eigenvalues(std::move(f.diag),
                                                    std::move(f.offdiag));
          int64_t count = 0;
          for (double lambda : vals) {
            const double pt = scale * (lambda - cfg.energy);
            if (pt >= -half_box && pt < half_box) ++count;
          }
          if (count >= 1) ++out.x1;
          if (count >= 2) ++out.x2;
          out.values.insert(out.values.end(), vals.begin(), vals.end());
        }
      };
      if (p.symmetry == SymmetryClass::orthogonal)
        run(double{});
      else
        run(std::complex<double>{});
      std::sort(out.values.begin(), out.values.end());
      return out;
    };
    const auto pool =
        run_trials<CountTrial>(cfg.trials, cfg.workers, table, body);
    if (pool.empty()) continue;

    const ResultRow base = base_row(cfg, p, "counting");
    const std::string qual = q_n(n);
    const int64_t trials = static_cast<int64_t>(pool.size());
    push_row(table, base, "m_cut", qual, mcut, 0.0, trials);

    std::vector<double> x1(pool.size()), x2(pool.size());
    std::vector<std::vector<double>> values;
    values.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      x1[i] = static_cast<double>(pool[i].x1);
      x2[i] = static_cast<double>(pool[i].x2);
      values.push_back(pool[i].values);
    }
    const Estimate e1 = mean_and_se(x1);
    const Estimate e2 = mean_and_se(x2);
    push_row(table, base, "x1", qual, e1.value, e1.se, trials);
    push_row(table, base, "x2", qual, e2.value, e2.se, trials);
    const Estimate nu = density_near(values, dim, cfg.energy);
    push_row(table, base, "nu_hat", qual, nu.value, nu.se, trials);
    push_row(table, base, "intensity_reference", qual,
             nu.value * cfg.box_width, nu.se * cfg.box_width, trials);
  }
  mark_partial(table);
  return table;
}

// ---------------------------------------------------------------- truncation

ResultTable truncation_flow(const ExperimentConfig& cfg) {
  check_config(cfg);
  ResultTable table;
  const EnsembleParams p = cfg.params;
  const int n = p.n;
  const int mlo = cfg.m_min < 0 ? 0 : cfg.m_min;
  const int mhi = cfg.m_max < 0 ? n : cfg.m_max;
  if (mlo > mhi || mlo < 0 || mhi > n)
    throw std::invalid_argument("m range must satisfy 0 <= m_min <= m_max <= n");

  const int64_t dim = sites_at_level(n);
  const ComplexEnergy zn{cfg.energy + std::exp2(-n) * cfg.z_re,
                         std::exp2(-n) * cfg.z_im};

  // Coupled trials: the full matrix and every truncation share their
  // level realizations, so the m = n column cancels exactly.
  const auto body = [&](int t) {
    std::vector<double> diffs;
    diffs.reserve(mhi - mlo + 1);
    const double nu_full =
        nu_from_values(trial_sorted_values(p, t, -1), dim, zn);
    for (int m = mlo; m <= mhi; ++m) {
      const double nu_m =
          nu_from_values(trial_sorted_values(p, t, m), dim, zn);
      diffs.push_back(std::abs(nu_full - nu_m));
    }
    return diffs;
  };
  const auto pool =
      run_trials<std::vector<double>>(cfg.trials, cfg.workers, table, body);

  const ResultRow base = base_row(cfg, p, "truncation-flow");
  if (!pool.empty()) {
    const double delta = p.c / 6.0;
    const int64_t trials = static_cast<int64_t>(pool.size());
    std::vector<std::pair<double, double>> log_points;
    std::vector<double> column(pool.size());
    for (int m = mlo; m <= mhi; ++m) {
      for (std::size_t i = 0; i < pool.size(); ++i)
        column[i] = pool[i][m - mlo];
      const Estimate e = mean_and_se(column);
      push_row(table, base, "truncation_gap_mean", q_m(m), e.value, e.se,
               trials);
      push_row(table, base, "reference_line_log2", q_m(m),
               3.0 * (n - (1.0 + delta) * m), 0.0, 0);
      if (e.value > 0.0) log_points.push_back({m, std::log2(e.value)});
    }
    if (log_points.size() >= 2) {
      const LineFit fit = fit_slope(log_points);
      push_row(table, base, "fitted_log2_slope", "", fit.slope, fit.se,
               fit.points);
    } else {
      table.warnings.push_back(
          "too few positive truncation gaps to fit a slope");
    }
  }
  mark_partial(table);
  return table;
}

// ---------------------------------------------------------------- localization

namespace {

struct MassAggregate {
  std::vector<double> masses;
  std::vector<double> tails;
  std::vector<double> window_counts;
  int64_t conditioned = 0;
  int64_t trials = 0;
};

MassAggregate aggregate_mass(const std::vector<MassTrial>& pool) {
  MassAggregate agg;
  agg.trials = static_cast<int64_t>(pool.size());
  for (const MassTrial& t : pool) {
    agg.masses.insert(agg.masses.end(), t.masses.begin(), t.masses.end());
    agg.tails.insert(agg.tails.end(), t.tails.begin(), t.tails.end());
    agg.window_counts.push_back(static_cast<double>(t.window_count));
    if (t.conditioned) ++agg.conditioned;
  }
  return agg;
}

void push_mass_rows(ResultTable& table, const ResultRow& base,
                    const std::string& qual, const MassAggregate& agg) {
  const double rate = static_cast<double>(agg.conditioned) /
                      static_cast<double>(agg.trials);
  const double rate_se =
      std::sqrt(rate * (1.0 - rate) / static_cast<double>(agg.trials));
  const std::string flag = agg.conditioned < agg.trials ? "conditioned" : "";
  if (!agg.masses.empty()) {
    ResultRow b = base;
    b.flag = flag;
    push_row(table, b, "mass_median", qual, median(agg.masses),
             median_se(agg.masses), static_cast<int64_t>(agg.masses.size()));
    push_row(table, b, "mass_q90", qual, quantile(agg.masses, 0.9),
             median_se(agg.masses), static_cast<int64_t>(agg.masses.size()));
  } else {
    table.warnings.push_back(qual + ": window never held an eigenvalue");
  }
  push_row(table, base, "conditioning_rate", qual, rate, rate_se, agg.trials);
  if (10 * agg.conditioned < agg.trials)
    table.warnings.push_back(
        qual + ": window was empty in more than 90% of trials");
  if (!agg.tails.empty())
    push_row(table, base, "green_tail_median", qual, median(agg.tails),
             median_se(agg.tails), static_cast<int64_t>(agg.tails.size()));
  const Estimate wc = mean_and_se(agg.window_counts);
  push_row(table, base, "window_count_mean", qual, wc.value, wc.se,
           agg.trials);
}

}  // namespace

ResultTable localization_run(const ExperimentConfig& cfg) {
  check_config(cfg);
  ResultTable table;
  for (int n : resolved_n_list(cfg)) {
    EnsembleParams p = cfg.params;
    p.n = n;
    if (m_cutoff(n, cfg.epsilon) < 1 || m_cutoff(n, cfg.epsilon) > n)
      throw std::invalid_argument("m_cutoff out of range [1, n] at n=" +
                                  std::to_string(n));
    const auto pool = run_trials<MassTrial>(
        cfg.trials, cfg.workers, table,
        [&](int t) { return mass_trial(p, t, cfg); });
    if (pool.empty()) continue;
    const ResultRow base = base_row(cfg, p, "localization");
    const MassAggregate agg = aggregate_mass(pool);
    push_row(table, base, "m_cut", q_n(n), m_cutoff(n, cfg.epsilon), 0.0,
             agg.trials);
    push_mass_rows(table, base, q_n(n), agg);
  }
  mark_partial(table);
  return table;
}

// ------------------------------------------------------------ delocalization

namespace {

void push_deloc_rows(ResultTable& table, const ResultRow& base,
                     const std::string& qual,
                     const std::vector<DelocTrial>& pool,
                     const ExperimentConfig& cfg, int n) {
  const int64_t dim = sites_at_level(n);
  std::vector<double> iprs, sups;
  std::vector<std::vector<double>> values;
  values.reserve(pool.size());
  for (const DelocTrial& t : pool) {
    iprs.insert(iprs.end(), t.iprs.begin(), t.iprs.end());
    sups.insert(sups.end(), t.sups.begin(), t.sups.end());
    values.push_back(t.values);
  }
  const int64_t trials = static_cast<int64_t>(pool.size());

  if (!iprs.empty()) {
    push_row(table, base, "ipr_x_dim_median", qual, median(iprs),
             median_se(iprs), static_cast<int64_t>(iprs.size()));
    push_row(table, base, "ipr_x_dim_q90", qual, quantile(iprs, 0.9),
             median_se(iprs), static_cast<int64_t>(iprs.size()));
    push_row(table, base, "supnorm_scaled_median", qual, median(sups),
             median_se(sups), static_cast<int64_t>(sups.size()));
    push_row(table, base, "supnorm_scaled_q90", qual, quantile(sups, 0.9),
             median_se(sups), static_cast<int64_t>(sups.size()));
  }

  const DosEstimate dos =
      dos_estimate(values, dim, cfg.bins, cfg.bin_lo, cfg.bin_hi);
  double l1 = 0.0;
  double se2 = 0.0;
  for (int b = 0; b < cfg.bins; ++b) {
    const double width = dos.edges[b + 1] - dos.edges[b];
    const double sc = semicircle_cdf(dos.edges[b + 1]) -
                      semicircle_cdf(dos.edges[b]);
    l1 += std::abs(dos.density[b] * width - sc);
    se2 += width * dos.density_se[b] * width * dos.density_se[b];
  }
  const double outside_sc =
      1.0 - (semicircle_cdf(cfg.bin_hi) - semicircle_cdf(cfg.bin_lo));
  l1 += std::abs((1.0 - dos.captured_fraction) - outside_sc);
  push_row(table, base, "dos_l1_vs_semicircle", qual, l1, std::sqrt(se2),
           trials);
}

}  // namespace

ResultTable delocalization_run(const ExperimentConfig& cfg) {
  check_config(cfg);
  ResultTable table;
  for (int n : resolved_n_list(cfg)) {
    EnsembleParams p = cfg.params;
    p.n = n;
    const auto pool = run_trials<DelocTrial>(
        cfg.trials, cfg.workers, table,
        [&](int t) { return deloc_trial(p, t, cfg); });
    if (pool.empty()) continue;
    const ResultRow base = base_row(cfg, p, "delocalization");
    const std::string qual = q_n(n);
    push_deloc_rows(table, base, qual, pool, cfg, n);

    std::vector<std::vector<double>> values;
    values.reserve(pool.size());
    for (const DelocTrial& t : pool) values.push_back(t.values);
    const GapPipeline g = gap_pipeline(cfg, p, values, table);
    const int64_t trials = static_cast<int64_t>(pool.size());
    push_window_rows(table, base, qual, g, trials);
    push_gap_rows(table, base, qual, g, trials);
    push_row(table, base, "gap_ratio_reference_goe", qual, kGapRatioGoe, 0.0,
             0);
  }
  mark_partial(table);
  return table;
}

// ---------------------------------------------------------------- sweep

ResultTable phase_sweep(const ExperimentConfig& cfg) {
  check_config(cfg);
  ResultTable table;
  for (double c : resolved_c_list(cfg)) {
    for (int n : resolved_n_list(cfg)) {
      EnsembleParams p = cfg.params;
      p.c = c;
      p.n = n;
      const std::string qual = q_cell(c, n);

      struct SweepTrial {
        DelocTrial vec;
        MassTrial mass;
      };
      const auto pool = run_trials<SweepTrial>(
          cfg.trials, cfg.workers, table, [&](int t) {
            return SweepTrial{deloc_trial(p, t, cfg), mass_trial(p, t, cfg)};
          });
      if (pool.empty()) continue;

      const ResultRow base = base_row(cfg, p, "sweep");

      // gap ratios from the same sorted spectra the single runs see
      std::vector<std::vector<double>> values;
      values.reserve(pool.size());
      std::vector<double> iprs;
      std::vector<MassTrial> mass_pool;
      mass_pool.reserve(pool.size());
      for (const SweepTrial& t : pool) {
        values.push_back(t.vec.values);
        iprs.insert(iprs.end(), t.vec.iprs.begin(), t.vec.iprs.end());
        mass_pool.push_back(t.mass);
      }
      const GapPipeline g = gap_pipeline(cfg, p, values, table);
      if (!g.ratios.empty()) {
        const Estimate e = pooled_mean_se(g.ratios);
        push_row(table, base, "gap_ratio_mean", qual, e.value, e.se,
                 static_cast<int64_t>(g.ratios.size()));
      } else {
        table.warnings.push_back(qual + ": no gap ratios");
      }
      if (!iprs.empty())
        push_row(table, base, "ipr_x_dim_median", qual, median(iprs),
                 median_se(iprs), static_cast<int64_t>(iprs.size()));

      const MassAggregate agg = aggregate_mass(mass_pool);
      if (!agg.masses.empty()) {
        ResultRow b = base;
        b.flag = agg.conditioned < agg.trials ? "conditioned" : "";
        push_row(table, b, "mass_median", qual, median(agg.masses),
                 median_se(agg.masses),
                 static_cast<int64_t>(agg.masses.size()));
      } else {
        table.warnings.push_back(qual + ": window never held an eigenvalue");
      }
      const double rate = static_cast<double>(agg.conditioned) /
                          static_cast<double>(agg.trials);
      push_row(table, base, "conditioning_rate", qual, rate,
               std::sqrt(rate * (1.0 - rate) /
                         static_cast<double>(agg.trials)),
               agg.trials);
    }
  }
  mark_partial(table);
  return table;
}

}  // namespace umlab
