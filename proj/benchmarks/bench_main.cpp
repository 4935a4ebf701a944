#include <benchmark/benchmark.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "condex/constraints.hpp"
#include "condex/ht_model.hpp"
#include "condex/inference.hpp"
#include "condex/margins.hpp"
#include "condex/rng.hpp"
#include "condex/simulation.hpp"

namespace {

condex::ExceedanceData make_data(std::size_t n, std::uint64_t seed) {
  condex::Rng rng(seed);
  condex::ExceedanceData d;
  d.threshold_u = condex::to_laplace(0.9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = d.threshold_u + rng.exponential();
    const double z = 0.3 + 0.9 * rng.normal();
    d.y_cond.push_back(x);
    d.y_dep.push_back(0.6 * x + std::pow(x, 0.3) * z);
  }
  return d;
}

void bm_negloglik(benchmark::State& state) {
  const auto d = make_data(static_cast<std::size_t>(state.range(0)), 1);
  const condex::HTParams p{0.55, 0.25, 0.3, 0.9};
  for (auto _ : state) {
    benchmark::DoNotOptimize(condex::negloglik(p, d));
  }
}
BENCHMARK(bm_negloglik)->Arg(100)->Arg(500)->Arg(2000);

void bm_profile_point(benchmark::State& state) {
  const auto d = make_data(static_cast<std::size_t>(state.range(0)), 2);
  const condex::ProfileEvaluator ev(d);
  double a = 0.1;
  for (auto _ : state) {
    a = (a > 0.9) ? 0.1 : a + 1e-4;  // avoid caching one point
    benchmark::DoNotOptimize(ev.at(a, 0.2));
  }
}
BENCHMARK(bm_profile_point)->Arg(100)->Arg(500)->Arg(2000);

void bm_fit_unconstrained(benchmark::State& state) {
  const auto d = make_data(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(condex::fit_unconstrained(d));
  }
}
BENCHMARK(bm_fit_unconstrained)->Arg(100)->Arg(500)->Unit(benchmark::kMicrosecond);

void bm_keef_margin(benchmark::State& state) {
  condex::Rng rng(4);
  const auto d = make_data(200, 5);
  const auto fit = condex::fit_unconstrained(d);
  double a = -0.99;
  for (auto _ : state) {
    a = (a > 0.98) ? -0.99 : a + 1e-4;
    benchmark::DoNotOptimize(condex::detail::keef_margin_at(
        a, 0.3, fit.summary.z_quantile(1.0), fit.summary.z_plus_quantile(1.0),
        fit.summary.z_minus_quantile(1.0), 5.0));
  }
}
BENCHMARK(bm_keef_margin);

void bm_so_margin(benchmark::State& state) {
  double a = -0.99;
  for (auto _ : state) {
    a = (a > 0.98) ? -0.99 : a + 1e-4;
    benchmark::DoNotOptimize(
        condex::detail::so_pair_margin_at(a, 0.2, 0.6, 0.1, 0.5, 0.6, 5.0));
  }
}
BENCHMARK(bm_so_margin);

void bm_classify_stationary(benchmark::State& state) {
  const condex::DFunction d{0.2, 0.2, 0.6, 0.1, 0.5, 0.6};
  for (auto _ : state) {
    benchmark::DoNotOptimize(condex::classify_stationary(d, {0.05}));
  }
}
BENCHMARK(bm_classify_stationary);

void bm_simulate_exact(benchmark::State& state) {
  condex::ExactModelSpec spec;
  spec.family = condex::Family::logistic;
  spec.dep = 0.6;
  spec.n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(condex::simulate_exact(spec, seed++));
  }
}
BENCHMARK(bm_simulate_exact)->Arg(500)->Unit(benchmark::kMicrosecond);

void bm_fit_constrained_pair(benchmark::State& state) {
  std::map<std::string, condex::ExceedanceData> data;
  data["w"] = make_data(150, 7);
  data["s"] = make_data(150, 8);
  // strengthen the second group so the ordering binds occasionally
  for (std::size_t i = 0; i < data["s"].size(); ++i) {
    data["s"].y_dep[i] += 0.15 * data["s"].y_cond[i];
  }
  const std::vector<std::string> order = {"w", "s"};
  condex::ConstraintOptions opt;
  opt.ordering = true;
  for (auto _ : state) {
    benchmark::DoNotOptimize(condex::fit_constrained(data, order, opt));
  }
}
BENCHMARK(bm_fit_constrained_pair)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
