#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "condex/constraints.hpp"
#include "condex/errors.hpp"
#include "condex/rng.hpp"
#include "testutil.hpp"

using namespace condex;

TEST_CASE("DFunction value and derivative") {
  const DFunction d{0.4, 0.3, 1.2, 0.1, 0.6, -0.5};
  const double x = 3.7;
  const double expect =
      0.3 * x + std::pow(x, 0.3) * 1.2 - std::pow(x, 0.6) * (-0.5);
  CHECK(d.value(x) == doctest::Approx(expect).epsilon(1e-13));
  const double h = 1e-6;
  const double fd = (d.value(x + h) - d.value(x - h)) / (2.0 * h);
  CHECK(d.deriv(x) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("two-dip example: gap with two stationary points") {
  // D(x) = 0.1 x + 0.6 x^0.2 - 0.6 x^0.5 rises, dips, then rises again.
  const DFunction d{0.2, 0.2, 0.6, 0.1, 0.5, 0.6};

  SUBCASE("low cut captures both stationary points") {
    const auto rep = classify_stationary(d, {0.05});
    REQUIRE(rep.count == 2);
    REQUIRE(rep.points.size() == 2);
    CHECK(rep.points[0] > 0.05);
    CHECK(rep.points[0] < rep.points[1]);
    REQUIRE(rep.inflection.has_value());
    CHECK(*rep.inflection == doctest::Approx(0.22596).epsilon(5e-3));
    // derivative is negative at the inflection, which is what forces the
    // second stationary point
    CHECK(d.deriv(*rep.inflection) == doctest::Approx(-0.1367).epsilon(2e-2));
    for (double p : rep.points) {
      CHECK(std::fabs(d.deriv(p)) < 1e-7);
    }
    // local max then local min
    CHECK(d.value(rep.points[0]) > d.value(rep.points[1]));
  }

  SUBCASE("raising the cut leaves a single minimum") {
    const auto rep = classify_stationary(d, {1.0});
    REQUIRE(rep.count == 1);
    CHECK(rep.points[0] > 5.0);
    CHECK(rep.points[0] < 6.0);
  }

  SUBCASE("cutting past both stationary points leaves none") {
    const auto rep = classify_stationary(d, {10.0});
    CHECK(rep.count == 0);
  }
}

TEST_CASE("monotone gap has no stationary points") {
  const DFunction d{0.5, 0.2, 0.6, 0.1, 0.5, 0.6};
  const auto rep = classify_stationary(d, {0.05});
  CHECK(rep.count == 0);
}

TEST_CASE("classify handles equal exponents") {
  // b_hi == b_lo: D = 0.2 x - 1.5 x^0.4, a single stationary point
  const DFunction d{0.5, 0.4, 0.5, 0.3, 0.4, 2.0};
  const auto rep = classify_stationary(d, {0.01});
  CHECK_FALSE(rep.inflection.has_value());
  REQUIRE(rep.count == 1);
  CHECK(std::fabs(d.deriv(rep.points[0])) < 1e-7);
}

TEST_CASE("keef half margin closed forms") {
  // interior dip: g(x) = 0.1 x - 2 sqrt(x), minimum -10 at x = 100
  CHECK(detail::keef_half_margin(0.9, 0.5, 2.0, 0.0, 5.0) ==
        doctest::Approx(-10.0).epsilon(1e-10));
  // no beta z term: linear, minimum at v
  CHECK(detail::keef_half_margin(0.5, 0.0, 0.3, 0.1, 5.0) ==
        doctest::Approx(2.3).epsilon(1e-12));
  // alpha at one: g = -sqrt(x), minimum at the far end
  CHECK(detail::keef_half_margin(1.0, 0.5, 1.0, 0.0, 5.0) ==
        doctest::Approx(-1e4).epsilon(1e-10));
  // negative beta with positive z: increasing, minimum at v
  CHECK(detail::keef_half_margin(0.2, -1.0, 1.0, 0.0, 5.0) ==
        doctest::Approx(0.8 * 5.0 - 0.2).epsilon(1e-12));
}

TEST_CASE("keef margin combines both envelopes by reflection") {
  const double v = 5.0;
  CHECK(detail::keef_margin_at(0.0, 0.0, 0.0, 1.0, 1.0, v) ==
        doctest::Approx(4.0));  // binding side is the lower envelope
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(900 + s);
    const double a = -0.99 + 1.98 * rng.u01();
    const double b = -2.0 + 2.9 * rng.u01();
    const double z = -2.0 + 4.0 * rng.u01();
    const double zp = -2.0 + 4.0 * rng.u01();
    const double zm = -2.0 + 4.0 * rng.u01();
    const double m = detail::keef_margin_at(a, b, z, zp, zm, v);
    const double m1 = detail::keef_half_margin(a, b, z, zp, v);
    const double m2 = detail::keef_half_margin(-a, b, -z, -zm, v);
    CHECK(m == doctest::Approx(std::min(m1, m2)).epsilon(1e-13));
    CHECK(detail::keef_feasible_at(a, b, z, zp, zm, v) == (m >= -kFeasTol));
  }
}

TEST_CASE("keef closed form agrees with a brute-force grid") {
  // 1000 random coherent draws against a 200-point log grid on [v, 1e6].
  // Skipped draws are the documented grid artifacts: margins inside the grid
  // resolution band, and minima beyond the scanned range (the closed form
  // covers [v, 1e8] plus the interior stationary point wherever it falls).
  Rng rng(7001);
  int checked = 0, skipped = 0;
  while (checked < 1000) {
    REQUIRE(skipped < 20000);
    const auto c = testutil::draw_tail_config(rng);
    const double v = 3.0 + 5.0 * rng.u01();
    const double q = (rng.u01() < 0.5) ? 0.0 : 1.0;
    const double z = c.summary.z_quantile(q);
    const double zp = c.summary.z_plus_quantile(q);
    const double zm = c.summary.z_minus_quantile(q);
    const auto g1 = testutil::keef_half_grid(c.alpha, c.beta, z, zp, v, 200);
    const auto g2 = testutil::keef_half_grid(-c.alpha, c.beta, -z, -zm, v, 200);
    const double m1 = detail::keef_half_margin(c.alpha, c.beta, z, zp, v);
    const double m2 = detail::keef_half_margin(-c.alpha, c.beta, -z, -zm, v);
    const bool blind1 = testutil::keef_half_end_slope(c.alpha, c.beta, z) < 0.0 &&
                        g1.min_value >= -kFeasTol;
    const bool blind2 = testutil::keef_half_end_slope(-c.alpha, c.beta, -z) < 0.0 &&
                        g2.min_value >= -kFeasTol;
    if (blind1 || blind2 || std::fabs(m1 + kFeasTol) <= g1.band ||
        std::fabs(m2 + kFeasTol) <= g2.band) {
      ++skipped;
      continue;
    }
    const bool closed = detail::keef_feasible_at(c.alpha, c.beta, z, zp, zm, v);
    const bool grid = g1.min_value >= -kFeasTol && g2.min_value >= -kFeasTol;
    CHECK(closed == grid);
    // the grid can never fall below the closed-form minimum (|alpha| <= 1)
    CHECK(g1.min_value >= m1 - 1e-9 - 1e-12 * std::fabs(m1));
    CHECK(g2.min_value >= m2 - 1e-9 - 1e-12 * std::fabs(m2));
    ++checked;
  }
}

TEST_CASE("so pair margin closed forms") {
  const double v = 5.0;
  // identical groups: D == 0 everywhere
  CHECK(detail::so_pair_margin_at(0.3, 0.2, 1.0, 0.3, 0.2, 1.0, v) ==
        doctest::Approx(0.0));
  CHECK(detail::so_pair_feasible_at(0.3, 0.2, 1.0, 0.3, 0.2, 1.0, v));
  // pure resampling-quantile gap, increasing: minimum at v
  CHECK(detail::so_pair_margin_at(0.3, 0.4, 2.0, 0.3, 0.4, 1.0, v) ==
        doctest::Approx(std::pow(5.0, 0.4)).epsilon(1e-12));
  // slope condition fails: dominated by the limit term
  const double mg = detail::so_pair_margin_at(0.2, 0.3, 1.0, 0.5, 0.3, 1.0, v);
  CHECK(mg <= -1e7);
  CHECK_FALSE(detail::so_pair_feasible_at(0.2, 0.3, 1.0, 0.5, 0.3, 1.0, v));
  // late crossing beyond any moderate grid: caught through the kXMax end
  const double late =
      detail::so_pair_margin_at(0.3, 0.3, 20.0, 0.3, 0.5, 1.0, v);
  CHECK(late ==
        doctest::Approx(20.0 * std::pow(kXMax, 0.3) - std::pow(kXMax, 0.5))
            .epsilon(1e-10));
  CHECK_FALSE(detail::so_pair_feasible_at(0.3, 0.3, 20.0, 0.3, 0.5, 1.0, v));
}

TEST_CASE("so closed form agrees with a brute-force grid") {
  // 1000 random pairs against a 500-point log grid on [v, 1e6].  The grid is
  // blind to the slope condition at infinity (a_hi >= a_lo) and to minima
  // beyond its range, so draws where only those bind are skipped.
  Rng rng(7101);
  int checked = 0, skipped = 0;
  while (checked < 1000) {
    REQUIRE(skipped < 40000);
    const auto hi = testutil::draw_tail_config(rng);
    const auto lo = testutil::draw_tail_config(rng);
    const double v = 3.0 + 5.0 * rng.u01();
    const double q = (rng.u01() < 0.5) ? 0.0 : 1.0;
    const double zh = hi.summary.z_quantile(q);
    const double zl = lo.summary.z_quantile(q);
    const auto scan =
        testutil::so_grid(hi.alpha, hi.beta, zh, lo.alpha, lo.beta, zl, v, 500);
    const double m = detail::so_pair_margin_at(hi.alpha, hi.beta, zh,
                                               lo.alpha, lo.beta, zl, v);
    const bool beyond_scope =
        hi.alpha < lo.alpha ||
        testutil::so_end_slope(hi.alpha, hi.beta, zh, lo.alpha, lo.beta, zl) <
            0.0;
    if ((beyond_scope && scan.min_value >= -kFeasTol) ||
        std::fabs(m + kFeasTol) <= scan.band) {
      ++skipped;
      continue;
    }
    const bool closed = detail::so_pair_feasible_at(hi.alpha, hi.beta, zh,
                                                    lo.alpha, lo.beta, zl, v);
    const bool grid = scan.min_value >= -kFeasTol;
    CHECK(closed == grid);
    ++checked;
  }
}

TEST_CASE("endpoint levels are at least as restrictive as interior ones") {
  // Two residual pools that are exact location-scale maps of one another, so
  // every interior-q ordering condition is a convex-type combination of the
  // q=0 and q=1 conditions.
  Rng rng(7301);
  std::vector<double> w(60);
  for (auto& e : w) e = rng.normal();
  std::vector<double> zh(w.size()), zl(w.size());
  ExceedanceData dh, dl;
  dh.threshold_u = dl.threshold_u = 1.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    zh[i] = 0.3 + 1.1 * w[i];
    zl[i] = -0.2 + 0.8 * w[i];
    const double x = 1.0 + rng.exponential();
    dh.y_cond.push_back(x);
    dh.y_dep.push_back(x);
    dl.y_cond.push_back(x);
    dl.y_dep.push_back(x);
  }
  const auto sh = ResidualSummary::from(zh, dh);
  const auto sl = ResidualSummary::from(zl, dl);
  const ConstraintLevel lvl{5.0};
  const std::vector<double> ends = {0.0, 1.0};
  const double a_lo = 0.3, b_lo = 0.2;
  const TailView lo{a_lo, b_lo, &sl};
  int feasible_seen = 0;
  for (int ia = 0; ia < 50; ++ia) {
    for (int ib = 0; ib < 50; ++ib) {
      const double a = -1.0 + 2.0 * ia / 49.0;
      const double b = -2.0 + 2.9 * ib / 49.0;
      const TailView hi{a, b, &sh};
      if (!so_feasible(hi, lo, lvl, ends)) continue;
      ++feasible_seen;
      for (double q : {0.25, 0.5, 0.75}) {
        const std::vector<double> single = {q};
        CHECK(so_feasible(hi, lo, lvl, single));
      }
    }
  }
  CHECK(feasible_seen > 0);  // the check must not be vacuous
}

TEST_CASE("raising the level never shrinks the feasible set") {
  Rng rng(7401);
  for (int rep = 0; rep < 100; ++rep) {
    const auto hi = testutil::draw_tail_config(rng);
    const auto lo = testutil::draw_tail_config(rng);
    const double v1 = 2.0 + 3.0 * rng.u01();
    const double v2 = v1 + 0.5 + 4.0 * rng.u01();
    const double q = (rng.u01() < 0.5) ? 0.0 : 1.0;
    {
      const double z = hi.summary.z_quantile(q);
      const double zp = hi.summary.z_plus_quantile(q);
      const double zm = hi.summary.z_minus_quantile(q);
      CHECK(detail::keef_margin_at(hi.alpha, hi.beta, z, zp, zm, v2) >=
            detail::keef_margin_at(hi.alpha, hi.beta, z, zp, zm, v1) - 1e-12);
    }
    {
      const double zh = hi.summary.z_quantile(q);
      const double zl = lo.summary.z_quantile(q);
      const double m1 = detail::so_pair_margin_at(hi.alpha, hi.beta, zh,
                                                  lo.alpha, lo.beta, zl, v1);
      const double m2 = detail::so_pair_margin_at(hi.alpha, hi.beta, zh,
                                                  lo.alpha, lo.beta, zl, v2);
      CHECK(m2 >= m1 - 1e-9 - 1e-12 * std::fabs(m1));
    }
  }
}

TEST_CASE("level-set feasibility splits over quantile levels") {
  Rng rng(7201);
  for (int rep = 0; rep < 50; ++rep) {
    const auto hi = testutil::draw_tail_config(rng);
    const auto lo = testutil::draw_tail_config(rng);
    const ConstraintLevel lvl{4.0 + 3.0 * rng.u01()};
    const std::vector<double> both = {0.0, 1.0};
    const std::vector<double> q0 = {0.0};
    const std::vector<double> q1 = {1.0};
    const TailView h{hi.alpha, hi.beta, &hi.summary};
    const TailView l{lo.alpha, lo.beta, &lo.summary};
    CHECK(so_feasible(h, l, lvl, both) ==
          (so_feasible(h, l, lvl, q0) && so_feasible(h, l, lvl, q1)));
    CHECK(keef_feasible(hi.alpha, hi.beta, hi.summary, lvl, both) ==
          (keef_feasible(hi.alpha, hi.beta, hi.summary, lvl, q0) &&
           keef_feasible(hi.alpha, hi.beta, hi.summary, lvl, q1)));
  }
}

TEST_CASE("chain checks adjacent pairs, weakest first") {
  // zero residual spread reduces the gap to (a_hi - a_lo) x
  const auto s = ResidualSummary::from_sorted({0.0, 0.0}, {0.0, 0.0},
                                              {0.0, 0.0});
  const ConstraintLevel lvl{5.0};
  const std::vector<double> qs = {0.0, 1.0};
  const TailView weak{0.1, 0.0, &s};
  const TailView mid{0.2, 0.0, &s};
  const TailView strong{0.3, 0.0, &s};
  {
    const std::vector<TailView> groups = {weak, mid, strong};
    CHECK(so_feasible_chain(groups, lvl, qs));
  }
  {
    const std::vector<TailView> groups = {weak, strong, mid};
    CHECK_FALSE(so_feasible_chain(groups, lvl, qs));
  }
  {
    // a single group is vacuously ordered
    const std::vector<TailView> groups = {mid};
    CHECK(so_feasible_chain(groups, lvl, qs));
  }
}

TEST_CASE("constraint argument validation") {
  const auto s = ResidualSummary::from_sorted({0.0, 1.0}, {0.0, 1.0},
                                              {0.0, 1.0});
  const std::vector<double> qs = {0.0, 1.0};
  CHECK_THROWS_AS((void)keef_feasible(0.5, 1.2, s, {5.0}, qs), DomainError);
  CHECK_THROWS_AS((void)keef_feasible(0.5, 0.2, s, {-1.0}, qs), DomainError);
  const TailView a{0.5, 1.2, &s};
  const TailView b{0.1, 0.0, &s};
  CHECK_THROWS_AS((void)so_feasible(a, b, {5.0}, qs), DomainError);
  const DFunction d{0.2, 0.2, 0.6, 0.1, 0.5, 0.6};
  CHECK_THROWS_AS((void)classify_stationary(d, {0.0}), DomainError);
}
