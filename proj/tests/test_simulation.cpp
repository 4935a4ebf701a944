// Tests for the exact bivariate families, exact-model simulation, fitted-model
// sampling, and the RMSE comparison study harness.
//
// The closed-form residual distributions are pinned with hand-derived values
// and independent moment identities; simulated draws are checked against the
// stated distributions with a Kolmogorov-Smirnov statistic.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "condex/errors.hpp"
#include "condex/ht_model.hpp"
#include "condex/margins.hpp"
#include "condex/simulation.hpp"
#include "condex/stats.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace condex;

namespace {

// Kolmogorov-Smirnov distance between a sample and a cdf.
double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max(d, std::fabs((static_cast<double>(i) + 1.0) / n - f));
    d = std::max(d, std::fabs(static_cast<double>(i) / n - f));
  }
  return d;
}

std::vector<double> implied_residuals(const ExceedanceData& d, double alpha,
                                      double beta) {
  std::vector<double> z(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    z[i] = (d.y_dep[i] - alpha * d.y_cond[i]) / std::pow(d.y_cond[i], beta);
  return z;
}

}  // namespace

TEST_CASE("family names round trip and reject unknowns") {
  for (Family f :
       {Family::logistic, Family::inverted_logistic, Family::gaussian}) {
    CHECK(family_from_name(family_name(f)) == f);
  }
  CHECK(family_name(Family::logistic) == "logistic");
  CHECK(family_name(Family::inverted_logistic) == "inverted_logistic");
  CHECK(family_name(Family::gaussian) == "gaussian");
  CHECK(family_from_name("inverted-logistic") == Family::inverted_logistic);
  CHECK(family_from_name("normal") == Family::gaussian);
  CHECK_THROWS_AS((void)family_from_name("cauchy"), DomainError);
}

TEST_CASE("dependence parameter ranges are enforced") {
  CHECK_NOTHROW(validate_dep(Family::logistic, 0.5));
  CHECK_THROWS_AS(validate_dep(Family::logistic, 0.0), DomainError);
  // lambda = 1 is exact independence: the conditional representation with
  // alpha = 1, beta = 0 no longer holds there, so it is rejected.
  CHECK_THROWS_AS(validate_dep(Family::logistic, 1.0), DomainError);
  CHECK_THROWS_AS(validate_dep(Family::logistic, -0.2), DomainError);

  CHECK_NOTHROW(validate_dep(Family::inverted_logistic, 1.0));
  CHECK_NOTHROW(validate_dep(Family::inverted_logistic, 0.05));
  CHECK_THROWS_AS(validate_dep(Family::inverted_logistic, 0.0), DomainError);
  CHECK_THROWS_AS(validate_dep(Family::inverted_logistic, 1.5), DomainError);

  CHECK_NOTHROW(validate_dep(Family::gaussian, 0.0));
  CHECK_NOTHROW(validate_dep(Family::gaussian, 0.99));
  CHECK_THROWS_AS(validate_dep(Family::gaussian, 1.0), DomainError);
  CHECK_THROWS_AS(validate_dep(Family::gaussian, -0.1), DomainError);
}

TEST_CASE("exact normalisation exponents") {
  CHECK(exact_alpha(Family::logistic, 0.3) == doctest::Approx(1.0));
  CHECK(exact_beta(Family::logistic, 0.3) == doctest::Approx(0.0));

  CHECK(exact_alpha(Family::inverted_logistic, 0.3) == doctest::Approx(0.0));
  CHECK(exact_beta(Family::inverted_logistic, 0.3) == doctest::Approx(0.7));
  CHECK(exact_beta(Family::inverted_logistic, 1.0) == doctest::Approx(0.0));

  CHECK(exact_alpha(Family::gaussian, 0.7) == doctest::Approx(0.49));
  CHECK(exact_beta(Family::gaussian, 0.7) == doctest::Approx(0.5));
  CHECK(exact_alpha(Family::gaussian, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("logistic residual distribution hand values") {
  // G(z) = (1 + exp(-z/lambda))^(lambda-1); at lambda = 1/2 and z = 0 this is
  // 2^(-1/2).
  CHECK(exact_residual_cdf(Family::logistic, 0.5, 0.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(exact_residual_quantile(Family::logistic, 0.5, 1.0 / std::sqrt(2.0)) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  // Inverting u = (1+e^(-2z))^(-1/2) at u = 1/4 gives e^(-2z) = 15.
  CHECK(exact_residual_quantile(Family::logistic, 0.5, 0.25) ==
        doctest::Approx(-0.5 * std::log(15.0)).epsilon(1e-14));
  for (double u : {0.02, 0.2, 0.5, 0.8, 0.98}) {
    const double z = exact_residual_quantile(Family::logistic, 0.7, u);
    CHECK(exact_residual_cdf(Family::logistic, 0.7, z) ==
          doctest::Approx(u).epsilon(1e-10));
  }
  CHECK_THROWS_AS((void)exact_residual_quantile(Family::logistic, 0.5, 0.0),
                  DomainError);
  CHECK_THROWS_AS((void)exact_residual_quantile(Family::logistic, 0.5, 1.0),
                  DomainError);
}

TEST_CASE("inverted logistic residual distribution hand values") {
  // G(z) = 1 - exp(-kappa z^(1/kappa)) on z >= 0.  At kappa = 1 it is the
  // unit exponential.
  CHECK(exact_residual_cdf(Family::inverted_logistic, 1.0, 1.0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  CHECK(exact_residual_quantile(Family::inverted_logistic, 1.0,
                                1.0 - std::exp(-1.0)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact_residual_cdf(Family::inverted_logistic, 0.5, -0.3) == 0.0);
  // kappa = 1/2: Z = (2 E)^(1/2) with E unit exponential, so the level
  // u = 1 - exp(-1/2) maps to z = 1.
  CHECK(exact_residual_quantile(Family::inverted_logistic, 0.5,
                                1.0 - std::exp(-0.5)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  for (double u : {0.02, 0.2, 0.5, 0.8, 0.98}) {
    const double z = exact_residual_quantile(Family::inverted_logistic, 0.3, u);
    CHECK(exact_residual_cdf(Family::inverted_logistic, 0.3, z) ==
          doctest::Approx(u).epsilon(1e-10));
  }
}

TEST_CASE("gaussian residual distribution hand values") {
  // G is centred normal with variance 2 rho^2 (1 - rho^2).
  const double sd = std::sqrt(2.0 * 0.49 * 0.51);
  CHECK(sd == doctest::Approx(0.7069653456853595).epsilon(1e-12));
  CHECK(exact_residual_cdf(Family::gaussian, 0.7, 0.0) == doctest::Approx(0.5));
  CHECK(exact_residual_quantile(Family::gaussian, 0.7, 0.975) ==
        doctest::Approx(sd * 1.959963984540054).epsilon(1e-10));
  // Independence case rho = 0: the dependent coordinate is standard Laplace
  // regardless of the conditioning value, so G itself is standard Laplace
  // (the rho > 0 normal form would degenerate to a point mass instead).
  CHECK(exact_residual_quantile(Family::gaussian, 0.0, 0.3) ==
        doctest::Approx(std::log(0.6)).epsilon(1e-12));
  CHECK(exact_residual_cdf(Family::gaussian, 0.0, 0.0) == doctest::Approx(0.5));
  CHECK(exact_residual_cdf(Family::gaussian, 0.0, std::log(0.6)) ==
        doctest::Approx(0.3).epsilon(1e-12));
  for (double u : {0.02, 0.2, 0.5, 0.8, 0.98}) {
    const double z = exact_residual_quantile(Family::gaussian, 0.4, u);
    CHECK(exact_residual_cdf(Family::gaussian, 0.4, z) ==
          doctest::Approx(u).epsilon(1e-10));
  }
}

TEST_CASE("true conditional quantiles follow the closed forms") {
  // Gaussian with rho = 0: exact independence, so the conditional quantile
  // is the standard Laplace quantile whatever the conditioning value.
  CHECK(true_conditional_quantile(Family::gaussian, 0.0, 3.7, 0.9) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(true_conditional_quantile(Family::gaussian, 0.0, 50.0, 0.1) ==
        doctest::Approx(std::log(0.2)).epsilon(1e-12));

  // Logistic: alpha = 1, beta = 0, so the quantile is x plus a constant.
  const double d1 = true_conditional_quantile(Family::logistic, 0.6, 2.0, 0.7) - 2.0;
  const double d2 = true_conditional_quantile(Family::logistic, 0.6, 7.0, 0.7) - 7.0;
  CHECK(d1 == doctest::Approx(d2).epsilon(1e-12));
  CHECK(d1 == doctest::Approx(exact_residual_quantile(Family::logistic, 0.6, 0.7))
                  .epsilon(1e-12));

  // Inverted logistic kappa = 1/2 at the level whose residual quantile is 1:
  // the conditional quantile is sqrt(x).
  const double q = 1.0 - std::exp(-0.5);
  CHECK(true_conditional_quantile(Family::inverted_logistic, 0.5, 4.0, q) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(true_conditional_quantile(Family::inverted_logistic, 0.5, 9.0, q) ==
        doctest::Approx(3.0).epsilon(1e-12));

  CHECK_THROWS_AS(
      (void)true_conditional_quantile(Family::logistic, 0.5, 0.0, 0.5),
      DomainError);
  CHECK_THROWS_AS(
      (void)true_conditional_quantile(Family::logistic, 0.5, -2.0, 0.5),
      DomainError);
}

TEST_CASE("stronger dependence dominates across residual levels") {
  // For the logistic family a smaller lambda means stronger extremal
  // dependence; its conditional quantiles dominate at every level.
  for (double x : {1.5, 2.0, 5.0, 10.0, 50.0}) {
    for (double q : {0.1, 0.25, 0.5, 0.75, 0.9, 0.99}) {
      const double strong = true_conditional_quantile(Family::logistic, 0.6, x, q);
      const double weak = true_conditional_quantile(Family::logistic, 0.9, x, q);
      CHECK(strong > weak);
    }
  }
}

TEST_CASE("exact simulation draws match the stated distributions") {
  struct Case {
    Family family;
    double dep;
  };
  for (const Case& c : {Case{Family::logistic, 0.6},
                        Case{Family::inverted_logistic, 0.3},
                        Case{Family::gaussian, 0.7},
                        Case{Family::gaussian, 0.0}}) {
    CAPTURE(family_name(c.family));
    const ExactModelSpec spec{c.family, c.dep, 1.5, 10000};
    const ExceedanceData d = simulate_exact(spec, 2718);
    REQUIRE(d.size() == 10000);
    REQUIRE(d.threshold_u == doctest::Approx(1.5));
    for (double x : d.y_cond) REQUIRE(x > 1.5);

    // Conditioning coordinate: threshold plus unit exponential.
    const double ks_x = ks_statistic(
        d.y_cond, [](double x) { return 1.0 - std::exp(-(x - 1.5)); });
    CHECK(ks_x < 0.02);

    // Implied residuals under the exact normalisation follow G.
    auto z = implied_residuals(d, exact_alpha(c.family, c.dep),
                               exact_beta(c.family, c.dep));
    const double ks_z = ks_statistic(z, [&](double t) {
      return exact_residual_cdf(c.family, c.dep, t);
    });
    CHECK(ks_z < 0.02);
  }
}

TEST_CASE("simulated residual moments match closed-form moments") {
  // Gaussian: the residual distribution is centred.
  {
    const ExceedanceData d =
        simulate_exact({Family::gaussian, 0.7, 1.0, 10000}, 99);
    const auto z = implied_residuals(d, 0.49, 0.5);
    CHECK(std::fabs(mean(z)) < 0.03);
  }
  // Inverted logistic kappa = 1/2: Z = sqrt(2 E) with E unit exponential,
  // so E[Z] = sqrt(pi / 2).
  {
    const ExceedanceData d =
        simulate_exact({Family::inverted_logistic, 0.5, 1.0, 10000}, 99);
    const auto z = implied_residuals(d, 0.0, 0.5);
    CHECK(mean(z) ==
          doctest::Approx(std::sqrt(std::acos(-1.0) / 2.0)).epsilon(0.05));
  }
}

TEST_CASE("exact simulation is seed-deterministic and validated") {
  const ExactModelSpec spec{Family::inverted_logistic, 0.4, 2.0, 300};
  const ExceedanceData a = simulate_exact(spec, 7);
  const ExceedanceData b = simulate_exact(spec, 7);
  const ExceedanceData c = simulate_exact(spec, 8);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.y_cond[i] == b.y_cond[i]);
    CHECK(a.y_dep[i] == b.y_dep[i]);
  }
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.y_cond[i] != c.y_cond[i]) differs = true;
  CHECK(differs);

  CHECK_THROWS_AS((void)simulate_exact({Family::logistic, 0.5, 0.0, 10}, 1),
                  DomainError);
  CHECK_THROWS_AS((void)simulate_exact({Family::logistic, 0.5, 1.0, 0}, 1),
                  DomainError);
  CHECK_THROWS_AS((void)simulate_exact({Family::logistic, 1.0, 1.0, 10}, 1),
                  DomainError);
}

TEST_CASE("independence gaussian keeps the draw stream aligned") {
  // rho = 0 consumes the same number of uniforms per pair as any other
  // gaussian, so the conditioning draws coincide across dependence levels,
  // while y_dep becomes an independent standard Laplace sample.
  const ExceedanceData dep = simulate_exact({Family::gaussian, 0.3, 1.0, 200}, 5);
  const ExceedanceData ind = simulate_exact({Family::gaussian, 0.0, 1.0, 200}, 5);
  REQUIRE(dep.size() == ind.size());
  std::size_t negative = 0;
  for (std::size_t i = 0; i < dep.size(); ++i) {
    CHECK(ind.y_cond[i] == dep.y_cond[i]);
    if (ind.y_dep[i] < 0.0) ++negative;
  }
  // Median of the residual law is zero: both signs appear in force.
  CHECK(negative > 50);
  CHECK(negative < 150);
}

TEST_CASE("fitted-model sampling stays above the conditioning threshold") {
  // Marginal models on exponential data, a dependence fit on synthetic
  // exceedances, then original-scale sampling.
  Rng rng(31415);
  std::vector<double> raw_c(1500), raw_d(1500);
  for (auto& v : raw_c) v = rng.exponential();
  for (auto& v : raw_d) v = 0.5 * rng.exponential() + 0.1;
  const MarginalModel mc = MarginalModel::fit(raw_c, 0.9);
  const MarginalModel md = MarginalModel::fit(raw_d, 0.9);

  const double u = to_laplace(0.9);
  ExceedanceData d;
  d.threshold_u = u;
  for (int i = 0; i < 400; ++i) {
    const double x = u + rng.exponential();
    d.y_cond.push_back(x);
    d.y_dep.push_back(0.6 * x + std::pow(x, 0.3) * rng.normal());
  }
  const HTFit fit = fit_unconstrained(d);

  Rng sampler(77);
  const auto pts = ht_sample(fit.params, fit.residuals, mc, md, u, 250, sampler);
  REQUIRE(pts.size() == 250);
  const double floor_c = mc.quantile(from_laplace(u));
  for (const auto& p : pts) {
    CHECK(p[0] >= floor_c - 1e-12);
    CHECK(std::isfinite(p[1]));
  }

  Rng sampler2(77);
  const auto pts2 = ht_sample(fit.params, fit.residuals, mc, md, u, 250, sampler2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(pts[i][0] == pts2[i][0]);
    CHECK(pts[i][1] == pts2[i][1]);
  }
}

TEST_CASE("rmse ratio convention") {
  CHECK(rmse_ratio(0.0, 0.0) == doctest::Approx(1.0));
  CHECK(rmse_ratio(5e-13, 8e-13) == doctest::Approx(1.0));
  CHECK(rmse_ratio(2.0, 4.0) == doctest::Approx(0.5));
  CHECK(rmse_ratio(0.0, 2.0) == doctest::Approx(0.0));
  CHECK(rmse_ratio(2.0, 1e-13) > 1.0);
}

TEST_CASE("study configuration for the desk run is pinned") {
  const StudyConfig cfg = desk_study_config();
  REQUIRE(cfg.pairs.size() == 5);
  CHECK(cfg.pairs[0].family == Family::logistic);
  CHECK(cfg.pairs[0].dep_strong == doctest::Approx(0.6));
  CHECK(cfg.pairs[0].dep_weak == doctest::Approx(0.9));
  CHECK(cfg.pairs[1].family == Family::inverted_logistic);
  CHECK(cfg.pairs[1].dep_strong == doctest::Approx(0.3));
  CHECK(cfg.pairs[1].dep_weak == doctest::Approx(0.7));
  CHECK(cfg.pairs[2].family == Family::inverted_logistic);
  CHECK(cfg.pairs[2].dep_strong == doctest::Approx(0.415));
  CHECK(cfg.pairs[2].dep_weak == doctest::Approx(1.0));
  CHECK(cfg.pairs[3].family == Family::gaussian);
  CHECK(cfg.pairs[3].dep_strong == doctest::Approx(0.7));
  CHECK(cfg.pairs[3].dep_weak == doctest::Approx(0.3));
  CHECK(cfg.pairs[4].family == Family::gaussian);
  CHECK(cfg.pairs[4].dep_strong == doctest::Approx(0.5));
  CHECK(cfg.pairs[4].dep_weak == doctest::Approx(0.0));
  CHECK(cfg.sample_size == 500);
  CHECK(cfg.replicates == 200);
  CHECK(cfg.seed == 42);
  REQUIRE(cfg.quantiles.size() == 2);
  CHECK(cfg.quantiles[0] == doctest::Approx(0.2));
  CHECK(cfg.quantiles[1] == doctest::Approx(0.8));
  REQUIRE(cfg.cond_levels.size() == 2);
  CHECK(cfg.cond_levels[0] == doctest::Approx(0.95));
  CHECK(cfg.cond_levels[1] == doctest::Approx(0.999));
  CHECK(cfg.threshold_quantile == doctest::Approx(0.95));
  CHECK(cfg.v_floor == doctest::Approx(5.0));
  REQUIRE(cfg.so_qs.size() == 2);
  CHECK(cfg.so_qs[0] == doctest::Approx(0.0));
  CHECK(cfg.so_qs[1] == doctest::Approx(1.0));
}

TEST_CASE("study harness: shape, determinism, and validation") {
  StudyConfig cfg;
  cfg.pairs = {{Family::logistic, 0.5, 0.8}};
  cfg.sample_size = 80;
  cfg.replicates = 3;
  cfg.quantiles = {0.5};
  cfg.cond_levels = {0.99};
  cfg.seed = 11;
  cfg.max_failure_rate = 1.0;  // keep the tiny smoke run robust

  const StudyResult r = run_rmse_study(cfg);
  REQUIRE(r.rows.size() == 2);  // one pair, two members, one q, one level
  REQUIRE(r.changed.size() == 2);
  CHECK(r.total_replicates == 3);
  CHECK(r.rows[0].family == Family::logistic);
  CHECK(r.rows[0].dep == doctest::Approx(0.5));   // strong member first
  CHECK(r.rows[1].dep == doctest::Approx(0.8));
  for (const auto& row : r.rows) {
    CHECK(row.q == doctest::Approx(0.5));
    CHECK(row.cond_level == doctest::Approx(0.99));
    CHECK(row.rmse_plain > 0.0);
    CHECK(std::isfinite(row.rmse_keef));
    CHECK(std::isfinite(row.rmse_so));
  }
  for (const auto& ch : r.changed) {
    CHECK(ch.frac_keef_vs_plain >= 0.0);
    CHECK(ch.frac_keef_vs_plain <= 1.0);
    CHECK(ch.frac_so_vs_plain >= 0.0);
    CHECK(ch.frac_so_vs_plain <= 1.0);
    CHECK(ch.frac_so_vs_keef >= 0.0);
    CHECK(ch.frac_so_vs_keef <= 1.0);
  }

  const StudyResult r2 = run_rmse_study(cfg);
  REQUIRE(r2.rows.size() == r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    CHECK(r.rows[i].rmse_plain == r2.rows[i].rmse_plain);
    CHECK(r.rows[i].rmse_keef == r2.rows[i].rmse_keef);
    CHECK(r.rows[i].rmse_so == r2.rows[i].rmse_so);
  }

  StudyConfig bad = cfg;
  bad.pairs.clear();
  CHECK_THROWS_AS((void)run_rmse_study(bad), DomainError);
  bad = cfg;
  bad.replicates = 0;
  CHECK_THROWS_AS((void)run_rmse_study(bad), DomainError);
  bad = cfg;
  bad.sample_size = 5;
  CHECK_THROWS_AS((void)run_rmse_study(bad), DomainError);
  bad = cfg;
  bad.threshold_quantile = 1.2;
  CHECK_THROWS_AS((void)run_rmse_study(bad), DomainError);
  bad = cfg;
  bad.quantiles = {0.0};
  CHECK_THROWS_AS((void)run_rmse_study(bad), DomainError);
  bad = cfg;
  bad.cond_levels = {1.0};
  CHECK_THROWS_AS((void)run_rmse_study(bad), DomainError);
}
