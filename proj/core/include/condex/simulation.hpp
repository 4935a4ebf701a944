#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "condex/ht_model.hpp"
#include "condex/margins.hpp"

namespace condex {

// Bivariate families whose conditional tail representation is known exactly:
// alpha, beta and the limiting residual distribution G have closed forms.
enum class Family { logistic, inverted_logistic, gaussian };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// dependence parameter ranges: logistic lambda in (0,1], inverted logistic
// kappa in (0,1], gaussian rho in [0,1)
void validate_dep(Family f, double dep);

double exact_alpha(Family f, double dep);
double exact_beta(Family f, double dep);
// residual distribution G: quantile and cdf
double exact_residual_quantile(Family f, double dep, double u);
double exact_residual_cdf(Family f, double dep, double z);

// Exact q-quantile of Y_dep | Y_cond = x on the Laplace scale:
// alpha x + x^beta G^{-1}(q).
double true_conditional_quantile(Family f, double dep, double x, double q);

struct ExactModelSpec {
  Family family = Family::logistic;
  double dep = 0.5;
  double threshold_u = 1.0;  // Laplace-scale threshold, > 0
  std::size_t n = 500;       // exceedance pairs to draw
};

// Draw exceedance pairs (Y_cond, Y_dep) from the exact conditional
// representation: Y_cond ~ Laplace | Y_cond > u, Z ~ G independent.
ExceedanceData simulate_exact(const ExactModelSpec& spec, Rng& rng);
ExceedanceData simulate_exact(const ExactModelSpec& spec, std::uint64_t seed);

// Fitted-model sampling on the original data scale (Algorithm-1 style):
// draws Y_cond above to_laplace-threshold u, combines with resampled
// residuals, and back-transforms both coordinates through the marginal
// models.  Every returned pair has its conditioning coordinate above
// margin_cond.quantile(from_laplace(u)).
std::vector<std::array<double, 2>> ht_sample(const HTParams& params,
                                             std::span<const double> residual_pool,
                                             const MarginalModel& margin_cond,
                                             const MarginalModel& margin_dep,
                                             double threshold_u, std::size_t n,
                                             Rng& rng);

// ---- RMSE comparison study ----------------------------------------------

struct StudyPair {
  Family family = Family::logistic;
  double dep_strong = 0.5;  // stronger extremal dependence
  double dep_weak = 0.9;    // weaker; fitted as the lower group
};

struct StudyConfig {
  std::vector<StudyPair> pairs;
  std::size_t sample_size = 500;   // exceedances per replicate and group
  std::size_t replicates = 200;
  std::vector<double> quantiles = {0.2, 0.8};      // residual levels q
  std::vector<double> cond_levels = {0.95, 0.999}; // Y_cond quantile levels
  double threshold_quantile = 0.9;  // Laplace threshold level for u
  double v_floor = 5.0;             // v = max(v_floor, largest y_cond seen)
  std::vector<double> so_qs = {0.0, 1.0};
  std::uint64_t seed = 1;
  double max_failure_rate = 0.05;
};

StudyConfig desk_study_config();

struct RmseRow {
  Family family;
  double dep;          // group dependence parameter
  double q;            // residual quantile level
  double cond_level;   // conditioning quantile level
  double rmse_plain;   // unconstrained fit
  double rmse_keef;    // self-consistency constraints only
  double rmse_so;      // ordering constraints across the pair
};

struct ChangedRow {
  Family family;
  double dep;
  double frac_keef_vs_plain;  // parameter estimates moved by the constraint
  double frac_so_vs_plain;
  double frac_so_vs_keef;
};

struct StudyResult {
  std::vector<RmseRow> rows;        // pairs x 2 groups x |q| x |levels|
  std::vector<ChangedRow> changed;  // pairs x 2 groups
  std::size_t failed_replicates = 0;
  std::size_t total_replicates = 0;
};

StudyResult run_rmse_study(const StudyConfig& cfg);

// RMSE ratio with the convention 1 when both sides are numerically zero
// (exactly dependent or exactly independent groups).
double rmse_ratio(double num, double den);

}  // namespace condex
