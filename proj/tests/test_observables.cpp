#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "umlab/ensemble.hpp"
#include "umlab/observables.hpp"
#include "umlab/reference.hpp"
#include "umlab/spectral.hpp"

using umlab::DenseMatrix;
using umlab::EnsembleParams;
using umlab::PointSample;
using umlab::SpectralWindow;

namespace {

// GOE with entry variance 1/N (2/N on the diagonal): semicircle on [-2, 2].
DenseMatrix<double> sample_goe(std::int64_t dim, std::uint64_t seed,
                               std::uint64_t trial) {
  umlab::RngStream s(seed, umlab::StreamKind::synthetic, trial, 0, 0);
  DenseMatrix<double> a(dim);
  const double off = std::sqrt(1.0 / double(dim));
  const double diag = std::sqrt(2.0 / double(dim));
  for (std::int64_t i = 0; i < dim; ++i) {
    a(i, i) = diag * s.next_gaussian();
    for (std::int64_t j = 0; j < i; ++j)
      a(i, j) = a(j, i) = off * s.next_gaussian();
  }
  return a;
}

// Pool of GOE(64) spectra shared by the reference-statistics tests.
const std::vector<std::vector<double>>& goe64_pool() {
  static const std::vector<std::vector<double>> pool = [] {
    std::vector<std::vector<double>> out;
    for (int t = 0; t < 400; ++t)
      out.push_back(umlab::eigh<double>(sample_goe(64, 404, t), false)
                        .eigenvalues);
    return out;
  }();
  return pool;
}

EnsembleParams make_params(int n, double c, std::uint64_t seed,
                           bool normalized = true) {
  EnsembleParams p;
  p.n = n;
  p.c = c;
  p.master_seed = seed;
  p.normalized = normalized;
  return p;
}

PointSample sample_of(std::vector<double> points) {
  PointSample s;
  s.points = std::move(points);
  s.window_halfwidth = 1e300;
  return s;
}

}  // namespace

TEST_SUITE("observables") {

TEST_CASE("rescaling maps eigenvalues through scale*(lambda - E)") {
  const auto s = umlab::rescale_values({0.25}, 0.0, 4.0, 2.0);
  REQUIRE(s.points.size() == 1);
  CHECK(s.points[0] == 1.0);

  // the window boundary is inclusive, beyond it is dropped
  const auto t = umlab::rescale_values({0.0, 0.25, 0.5, 3.0}, 0.0, 4.0, 1.0);
  REQUIRE(t.points.size() == 2);
  CHECK(t.points[0] == 0.0);
  CHECK(t.points[1] == 1.0);

  const auto far = umlab::rescale_values({5.0, 6.0}, 0.0, 4.0, 1.0);
  CHECK(far.points.empty());

  const auto shifted = umlab::rescale_values({1.0, 1.25}, 1.0, 4.0, 2.0);
  REQUIRE(shifted.points.size() == 2);
  CHECK(shifted.points[0] == 0.0);
  CHECK(shifted.points[1] == 1.0);
}

TEST_CASE("density histogram basics") {
  const auto one = umlab::dos_estimate({{0.0}}, 1, 1, -1.0, 1.0);
  REQUIRE(one.density.size() == 1);
  CHECK(one.density[0] == doctest::Approx(0.5));
  CHECK(one.captured_fraction == doctest::Approx(1.0));

  // integral of the histogram equals the captured fraction
  std::vector<std::vector<double>> pool;
  for (int t = 0; t < 10; ++t)
    pool.push_back(umlab::eigh<double>(sample_goe(32, 7, t), false)
                       .eigenvalues);
  const auto dos = umlab::dos_estimate(pool, 32, 13, -1.5, 1.5);
  double integral = 0.0;
  for (std::size_t b = 0; b < dos.density.size(); ++b)
    integral += dos.density[b] * (dos.edges[b + 1] - dos.edges[b]);
  CHECK(integral == doctest::Approx(dos.captured_fraction).epsilon(1e-12));
  CHECK(dos.captured_fraction < 1.0);
  CHECK(dos.captured_fraction > 0.5);
}

TEST_CASE("gap ratios on hand-built samples") {
  const auto r1 = umlab::gap_ratios(sample_of({0.0, 1.0, 3.0}));
  REQUIRE(r1.ratios.size() == 1);
  CHECK(r1.ratios[0] == doctest::Approx(0.5));
  CHECK(r1.degenerate == 0);

  const auto r2 = umlab::gap_ratios(sample_of({0.0, 1.0, 2.0, 3.0, 4.0}));
  REQUIRE(r2.ratios.size() == 3);
  for (double r : r2.ratios) CHECK(r == doctest::Approx(1.0));

  // affine rescaling leaves the ratios unchanged
  std::vector<double> pts{0.1, 0.7, 1.1, 2.9, 3.0};
  std::vector<double> scaled;
  for (double p : pts) scaled.push_back(4.0 * p);
  const auto ra = umlab::gap_ratios(sample_of(pts));
  const auto rb = umlab::gap_ratios(sample_of(scaled));
  REQUIRE(ra.ratios.size() == rb.ratios.size());
  for (std::size_t i = 0; i < ra.ratios.size(); ++i) {
    CHECK(ra.ratios[i] == rb.ratios[i]);
    CHECK(ra.ratios[i] >= 0.0);
    CHECK(ra.ratios[i] <= 1.0);
  }

  CHECK_THROWS_AS(umlab::gap_ratios(sample_of({0.0, 1.0})),
                  std::invalid_argument);
}

TEST_CASE("numerically coincident points are merged and reported") {
  const auto r = umlab::gap_ratios(sample_of({0.0, 0.0, 1.0, 3.0}));
  CHECK(r.degenerate == 1);
  REQUIRE(r.ratios.size() == 1);
  CHECK(r.ratios[0] == doctest::Approx(0.5));

  std::int64_t degenerate = 0;
  const auto gaps =
      umlab::unit_mean_gaps(sample_of({0.0, 5e-15, 2.0, 6.0}), &degenerate);
  CHECK(degenerate == 1);
  REQUIRE(gaps.size() == 2);
  const double mean = (gaps[0] + gaps[1]) / 2.0;
  CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("independent exponential gaps reproduce their ratio constant") {
  umlab::RngStream s(2, umlab::StreamKind::synthetic, 5, 0, 0);
  const int count = 1000000;
  std::vector<double> pts(count);
  double x = 0.0;
  for (int i = 0; i < count; ++i) {
    x += -std::log1p(-s.next_uniform());
    pts[i] = x;
  }
  const auto r = umlab::gap_ratios(sample_of(std::move(pts)));
  double mean = 0.0;
  for (double v : r.ratios) mean += v;
  mean /= double(r.ratios.size());
  CHECK(std::abs(mean - (2.0 * std::log(2.0) - 1.0)) < 0.005);
}

TEST_CASE("goe bulk gap ratios reproduce their reference constant") {
  const auto& pool = goe64_pool();
  std::vector<double> ratios;
  for (const auto& vals : pool) {
    const std::size_t lo = vals.size() / 4, hi = 3 * vals.size() / 4;
    const auto r = umlab::gap_ratios(
        sample_of(std::vector<double>(vals.begin() + lo, vals.begin() + hi)));
    ratios.insert(ratios.end(), r.ratios.begin(), r.ratios.end());
  }
  const auto est = umlab::mean_and_se(ratios);
  CHECK(std::abs(est.value - 0.5307) < 0.02);
}

TEST_CASE("counting statistics against a synthetic poisson stream") {
  {
    const std::vector<PointSample> empty_pool(50, sample_of({}));
    const auto cs = umlab::counting_statistics(empty_pool, -1.0, 1.0);
    CHECK(cs.samples == 50);
    CHECK(cs.histogram[0] == 50);
    CHECK(cs.p_geq.empty());
    CHECK(cs.mean == 0.0);
  }

  const double theta = 1.5;
  std::vector<PointSample> pool;
  umlab::RngStream s(3, umlab::StreamKind::synthetic, 9, 0, 0);
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> pts;
    double x = 0.0;
    for (;;) {
      x += -std::log1p(-s.next_uniform()) / theta;
      if (x >= 10.0) break;
      pts.push_back(x);
    }
    pool.push_back(sample_of(std::move(pts)));
  }

  const auto cs = umlab::counting_statistics(pool, 0.0, 2.0);
  const double lam = theta * 2.0;
  CHECK(std::abs(cs.mean - lam) < 5.0 * std::sqrt(lam / 10000.0));
  CHECK(cs.dispersion > 0.9);
  CHECK(cs.dispersion < 1.1);
  REQUIRE(cs.p_geq.size() >= 1);
  CHECK(std::abs(cs.p_geq[0] - (1.0 - std::exp(-lam))) <
        5.0 * cs.p_geq_se[0] + 0.01);

  // small box: P(count >= 2) obeys the quadratic bound
  const auto tight = umlab::counting_statistics(pool, 0.0, 0.2);
  const double rate = theta * 0.2;
  if (tight.p_geq.size() >= 2)
    CHECK(tight.p_geq[1] <= rate * rate / 2.0 + 5.0 * tight.p_geq_se[1]);
}

TEST_CASE("eigenfunction correlator: completeness and block support") {
  {
    DenseMatrix<double> a(1);
    a(0, 0) = 0.3;
    auto s = umlab::eigh<double>(a, true);
    s.meta.params.n = 0;
    CHECK(umlab::eigenfunction_correlator(s, {1, 0}, {1, 0}, {0.0, 1.0}) ==
          doctest::Approx(1.0));
  }

  const int n = 5;
  const EnsembleParams p = make_params(n, 0.5, 19);
  auto s = umlab::eigh<double>(umlab::assemble<double>(p, 0), true);
  s.meta.params = p;
  const SpectralWindow everything{0.0, 1e12};
  const std::int64_t dim = umlab::sites_at_level(n);

  for (std::int64_t x = 1; x <= dim; ++x)
    CHECK(umlab::eigenfunction_correlator(s, {x, n}, {x, n}, everything) ==
          doctest::Approx(1.0).epsilon(1e-10));

  const SpectralWindow w{0.1, 0.4};
  for (std::int64_t x = 1; x <= dim; x += 3)
    for (std::int64_t y = 1; y <= dim; y += 5) {
      const double qxy = umlab::eigenfunction_correlator(s, {x, n}, {y, n}, w);
      const double qxx = umlab::eigenfunction_correlator(s, {x, n}, {x, n}, w);
      const double qyy = umlab::eigenfunction_correlator(s, {y, n}, {y, n}, w);
      CHECK(qxy * qxy <= qxx * qyy + 1e-12);
    }

  // truncated matrices have exactly block-supported eigenvectors
  const int m = 2;
  auto st = umlab::eigh<double>(umlab::assemble<double>(p, 1, m), true);
  st.meta.params = p;
  st.meta.m = m;
  for (std::int64_t x = 1; x <= dim; x += 7)
    for (std::int64_t y = 1; y <= dim; ++y)
      if (umlab::distance({x, n}, {y, n}) > m)
        CHECK(umlab::eigenfunction_correlator(st, {x, n}, {y, n},
                                              everything) == 0.0);
}

TEST_CASE("mass outside a ball: exact zeros and the direct-sum oracle") {
  const int n = 5;
  const EnsembleParams p = make_params(n, 1.0, 29);
  auto s = umlab::eigh<double>(umlab::assemble<double>(p, 0), true);
  s.meta.params = p;
  const SpectralWindow w{0.0, 0.3};
  const umlab::SiteIndex x{11, n};

  CHECK(umlab::mass_outside_ball(s, x, n, w) == 0.0);

  // direct-sum oracle: recompute by brute force over sites and window levels
  for (int m : {1, 3}) {
    const double got = umlab::mass_outside_ball(s, x, m, w);
    const auto b = umlab::ball(x, m);
    double brute = 0.0;
    for (std::int64_t y = 1; y <= s.dim(); ++y)
      if (!b.contains(y))
        brute += umlab::eigenfunction_correlator(s, x, {y, n}, w);
    CHECK(got == doctest::Approx(brute).epsilon(1e-12));

    double bound = 0.0;
    const auto& v = *s.eigenvectors;
    for (std::int64_t j = 0; j < s.dim(); ++j) {
      if (!w.contains(s.eigenvalues[j])) continue;
      double l1 = 0.0;
      for (std::int64_t i = 0; i < s.dim(); ++i) l1 += std::abs(v(i, j));
      bound += std::abs(v(x.value - 1, j)) * l1;
    }
    CHECK(got <= bound + 1e-12);
  }

  // block-diagonal input: zero as soon as the ball covers the block
  const int mcut = 2;
  auto st = umlab::eigh<double>(umlab::assemble<double>(p, 2, mcut), true);
  st.meta.params = p;
  CHECK(umlab::mass_outside_ball(st, x, mcut, w) == 0.0);
  CHECK(umlab::mass_outside_ball(st, x, mcut + 1, w) == 0.0);
}

TEST_CASE("participation and sup norms") {
  std::vector<double> delta(16, 0.0);
  delta[5] = 1.0;
  CHECK(umlab::ipr(delta) == doctest::Approx(1.0));
  CHECK(umlab::sup_norm(delta) == doctest::Approx(1.0));

  std::vector<double> flat(16, 0.25);
  CHECK(umlab::ipr(flat) == doctest::Approx(1.0 / 16.0));
  CHECK(umlab::sup_norm(flat) == doctest::Approx(0.25));

  std::vector<double> unnormalized(4, 1.0);
  CHECK_THROWS_AS(umlab::ipr(unnormalized), std::invalid_argument);
  CHECK_THROWS_AS(umlab::sup_norm(unnormalized), std::invalid_argument);

  std::vector<std::complex<double>> cflat(4, {0.5, 0.0});
  CHECK(umlab::ipr(cflat) == doctest::Approx(0.25));
  CHECK(umlab::sup_norm(cflat) == doctest::Approx(0.5));
}

TEST_CASE("goe bulk eigenvectors have participation ratio near three") {
  const std::int64_t dim = 256;
  double sum = 0.0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    const auto s = umlab::eigh<double>(sample_goe(dim, 808, t), true);
    std::vector<double> psi(dim);
    for (std::int64_t i = 0; i < dim; ++i) psi[i] = (*s.eigenvectors)(i, dim / 2);
    sum += umlab::ipr(psi) * double(dim);
  }
  const double mean = sum / trials;
  CHECK(mean > 3.0 * 0.8);
  CHECK(mean < 3.0 * 1.2);
}

TEST_CASE("ks distance separates the two gap references") {
  umlab::RngStream s(12, umlab::StreamKind::synthetic, 0, 0, 0);
  std::vector<double> exp_gaps(10000);
  for (auto& g : exp_gaps) g = -std::log1p(-s.next_uniform());

  CHECK(umlab::ks_distance(exp_gaps, umlab::GapReference::poisson_unit) <
        0.03);
  CHECK(umlab::ks_distance(
            std::vector<double>(exp_gaps.begin(), exp_gaps.begin() + 1000),
            umlab::GapReference::goe_surmise) > 0.1);

  // unfolded goe bulk gaps sit close to the surmise
  const auto& pool = goe64_pool();
  std::vector<double> gaps;
  for (const auto& vals : pool) {
    std::vector<double> unfolded;
    for (std::size_t j = vals.size() / 4; j < 3 * vals.size() / 4; ++j)
      unfolded.push_back(double(vals.size()) * umlab::semicircle_cdf(vals[j]));
    for (std::size_t j = 1; j < unfolded.size(); ++j)
      gaps.push_back(unfolded[j] - unfolded[j - 1]);
  }
  double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / gaps.size();
  for (auto& g : gaps) g /= mean;
  CHECK(gaps.size() >= 10000);
  CHECK(umlab::ks_distance(gaps, umlab::GapReference::goe_surmise) < 0.05);

  CHECK_THROWS_AS(
      umlab::ks_distance({1.0, 2.0}, umlab::GapReference::poisson_unit),
      std::invalid_argument);
}

TEST_CASE("scaled poisson reference uses theta") {
  umlab::RngStream s(13, umlab::StreamKind::synthetic, 0, 0, 0);
  std::vector<double> gaps(20000);
  for (auto& g : gaps) g = -std::log1p(-s.next_uniform()) / 2.0;
  CHECK(umlab::ks_distance(gaps, umlab::GapReference::poisson_unit, 2.0) <
        0.03);
  CHECK(umlab::ks_distance(gaps, umlab::GapReference::poisson_unit, 1.0) >
        0.1);
}

TEST_CASE("semicircle density and cdf") {
  CHECK(umlab::semicircle_density(0.0) ==
        doctest::Approx(1.0 / std::numbers::pi));
  CHECK(umlab::semicircle_density(2.0) == 0.0);
  CHECK(umlab::semicircle_density(-3.0) == 0.0);
  CHECK(umlab::semicircle_cdf(-2.0) == doctest::Approx(0.0));
  CHECK(umlab::semicircle_cdf(0.0) == doctest::Approx(0.5));
  CHECK(umlab::semicircle_cdf(2.0) == doctest::Approx(1.0));
  CHECK(umlab::semicircle_cdf(5.0) == doctest::Approx(1.0));

  const double x = 0.7;
  const double integral = umlab::reference::simpson(
      umlab::semicircle_density, -2.0, x, 20000);
  CHECK(integral == doctest::Approx(umlab::semicircle_cdf(x)).epsilon(1e-6));
}

TEST_CASE("quantiles, medians and pooled errors") {
  CHECK(umlab::quantile({5.0, 1.0, 3.0, 2.0, 4.0}, 0.5) == doctest::Approx(3.0));
  CHECK(umlab::quantile({0.0, 1.0}, 0.25) == doctest::Approx(0.25));
  CHECK(umlab::quantile({3.0, 1.0, 2.0}, 0.0) == doctest::Approx(1.0));
  CHECK(umlab::quantile({3.0, 1.0, 2.0}, 1.0) == doctest::Approx(3.0));
  CHECK(umlab::median({4.0, 1.0, 3.0, 2.0}) == doctest::Approx(2.5));

  const auto constant = umlab::mean_and_se({2.0, 2.0, 2.0});
  CHECK(constant.value == doctest::Approx(2.0));
  CHECK(constant.se == doctest::Approx(0.0));

  const auto pooled =
      umlab::pooled_mean_se(std::vector<double>(100, 7.0), 10);
  CHECK(pooled.value == doctest::Approx(7.0));
  CHECK(pooled.se == doctest::Approx(0.0));

  umlab::RngStream s(14, umlab::StreamKind::synthetic, 0, 0, 0);
  std::vector<double> noise(4000);
  for (auto& v : noise) v = s.next_gaussian();
  const auto a = umlab::mean_and_se(noise);
  const auto b = umlab::pooled_mean_se(noise, 10);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
  CHECK(b.se > 0.3 * a.se);
  CHECK(b.se < 3.0 * a.se);
}

TEST_CASE("rescaled kernel sums equal the resolvent trace") {
  const int n = 6;
  const EnsembleParams p = make_params(n, 1.0, 37);
  auto s = umlab::eigh<double>(umlab::assemble<double>(p, 0), false);
  s.meta.params = p;
  const double dim = double(s.dim());
  const double e0 = -0.2;
  const umlab::ComplexEnergy z{0.4, 1.1};

  const auto sample = umlab::rescale(s, e0, 1e300);
  REQUIRE(sample.points.size() == s.eigenvalues.size());
  double mu = 0.0;
  for (double pt : sample.points) mu += umlab::poisson_kernel(pt, z);

  const umlab::ComplexEnergy zn{e0 + z.energy / dim, z.eta / dim};
  CHECK(mu == doctest::Approx(umlab::nu_trace(s, zn)).epsilon(1e-12));
}

TEST_CASE("truncated ensembles share the density of their block law") {
  const int n = 6, m = 4;
  const int trials = 800;
  const double znorm = umlab::normalizer(n, 1.0);

  std::vector<std::vector<double>> pool_a, pool_b;
  const EnsembleParams pa = make_params(n, 1.0, 71);
  EnsembleParams pb = make_params(m, 1.0, 72);
  pb.normalized = false;
  for (int t = 0; t < trials; ++t) {
    pool_a.push_back(
        umlab::eigh<double>(umlab::assemble<double>(pa, t, m), false)
            .eigenvalues);
    auto vals =
        umlab::eigh<double>(umlab::assemble<double>(pb, t), false).eigenvalues;
    for (auto& v : vals) v /= znorm;
    pool_b.push_back(std::move(vals));
  }

  const auto da = umlab::dos_estimate(pool_a, 1 << n, 16, -2.0, 2.0);
  const auto db = umlab::dos_estimate(pool_b, 1 << m, 16, -2.0, 2.0);
  for (int b = 0; b < 16; ++b) {
    const double se =
        std::sqrt(da.density_se[b] * da.density_se[b] +
                  db.density_se[b] * db.density_se[b]);
    CHECK(std::abs(da.density[b] - db.density[b]) <= 3.0 * se + 1e-9);
  }
}

}  // TEST_SUITE
