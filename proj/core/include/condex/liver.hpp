#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "condex/inference.hpp"
#include "condex/margins.hpp"

namespace condex {

// One patient: dose label, baseline and on-treatment measurements of ALT
// (alanine transaminase) and TBL (total bilirubin), raw scale.
struct TrialRecord {
  std::string dose;
  double alt_b, alt_m, tbl_b, tbl_m;
};

// CSV schema: header dose,ALT.B,ALT.M,TBL.B,TBL.M (extra columns ignored);
// measurements must be positive reals.
std::vector<TrialRecord> read_liver_csv(const std::string& path);

// Median (least-absolute-deviation) regression of the on-treatment value on
// the baseline, both on the log scale; the intercept is shifted so the
// residual median is zero.
struct MedianRegression {
  double gamma = 0.0;  // intercept
  double delta = 0.0;  // slope
  std::vector<double> residuals;
};
MedianRegression median_regression(std::span<const double> w_post,
                                   std::span<const double> w_base);

// Spearman correlation restricted to points whose coordinatewise ranks both
// lie in the top `level` fraction, re-ranked within the subset; level = 1
// reproduces the ordinary coefficient.
double conditional_spearman(std::span<const double> x,
                            std::span<const double> y, double level);

// Empirical tail dependence measures at probability level p:
//   chi(p)    = P(U > p, V > p) / (1 - p)            (independence: 1 - p)
//   chibar(p) = 2 log(1 - p) / log P(U > p, V > p) - 1
// computed on the rank scale.
struct ChiEstimate {
  double chi = 0.0;
  double chibar = 0.0;
};
ChiEstimate chi_measures(std::span<const double> x, std::span<const double> y,
                         double p);

struct PipelineConfig {
  double marg_q = 0.7;  // threshold quantile of the semiparametric margins
  double dep_q = 0.7;   // dependence threshold quantile (must exceed 0.5)
  std::vector<double> so_qs = {0.0, 1.0};
  double v_floor = 5.0;
  bool v_from_data = true;
  // dose labels weakest (lowest) first; default: sorted unique labels
  std::vector<std::string> dose_order;
};

// Everything fitted for one dose group.
struct DoseModel {
  std::string dose;
  std::size_t n = 0;
  MarginalModel base_alt, base_tbl;    // log-baseline margins
  MedianRegression adj_alt, adj_tbl;   // baseline adjustments
  MarginalModel marg_alt, marg_tbl;    // adjusted-residual margins
  std::vector<double> resid_alt, resid_tbl;  // paired residuals
  std::vector<double> lap_alt, lap_tbl;      // Laplace-transformed residuals
};

// Dependence fits in one conditioning direction across all doses.
struct DirectionFits {
  std::map<std::string, ExceedanceData> exceed;
  GroupFits plain;  // per-dose unconstrained
  GroupFits so;     // self-consistency + dose ordering
};

struct PipelineFit {
  PipelineConfig config;
  std::vector<std::string> dose_order;
  std::map<std::string, DoseModel> doses;
  DirectionFits tbl_given_alt;
  DirectionFits alt_given_tbl;
  double threshold_laplace = 0.0;  // to_laplace(dep_q)
};

PipelineFit fit_pipeline(const std::vector<TrialRecord>& records,
                         const PipelineConfig& cfg);

// Human-readable statements of the modelling conventions a configuration
// implies (v rule, thresholds); embedded in every output file.
std::vector<std::string> pipeline_notes(const PipelineConfig& cfg);

// Joint residual pairs (X_alt, X_tbl) for one dose: empirical resampling in
// the body, conditional-model draws (conditioning on the larger Laplace
// coordinate, rejection keeping it the larger) in the extreme region.
std::vector<std::array<double, 2>> simulate_joint_residuals(
    const PipelineFit& fit, const std::string& dose, bool use_so,
    std::size_t n, Rng& rng);

// Raw-scale patient pairs (ALT, TBL): baselines drawn from their margins,
// residuals from simulate_joint_residuals, recombined through the median
// regressions and exponentiated.
std::vector<std::array<double, 2>> simulate_patients(const PipelineFit& fit,
                                                     const std::string& dose,
                                                     bool use_so, std::size_t n,
                                                     Rng& rng);

struct SurvivalOptions {
  double x_cut = 108.0;               // ALT threshold (3 x upper limit 36)
  std::vector<double> y_cuts = {42.0};  // TBL thresholds (2 x upper limit 21)
  std::size_t n_sim = 200000;
  std::size_t n_boot = 0;  // 0: point estimates only
  std::uint64_t seed = 1;
};

struct PredictRow {
  std::string dose;
  bool so = false;  // ordering-constrained variant (else plain fits)
  double x_cut = 0.0;
  double y_cut = 0.0;
  double prob = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
};

// P(ALT > x_cut, TBL > y_cut) per dose and model variant, with bootstrap
// intervals when n_boot > 0 (the trial is regenerated from the fitted
// pipeline and refitted for every replicate).
std::vector<PredictRow> predict_table(const PipelineFit& fit,
                                      const SurvivalOptions& opt);

// Single-cell convenience wrapper.
PredictRow predict_survival(const PipelineFit& fit, const std::string& dose,
                            bool use_so, double x_cut, double y_cut,
                            const SurvivalOptions& opt);

// Synthetic trial records drawn from a fitted pipeline (used by the
// bootstrap and by round-trip tests); `use_so` picks the variant the
// residual dependence is sampled from.
std::vector<TrialRecord> regenerate_trial(const PipelineFit& fit, bool use_so,
                                          Rng& rng);

}  // namespace condex
