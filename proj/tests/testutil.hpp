#pragma once

// Shared synthetic-data helpers for the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "condex/constraints.hpp"
#include "condex/ht_model.hpp"
#include "condex/liver.hpp"
#include "condex/rng.hpp"

namespace testutil {

// Four-dose trial with residual dependence growing with dose (Gaussian
// dependence rho = .2/.35/.5/.65), lognormal baselines and fixed linear
// baseline adjustments.  Satisfies the ordering assumption by construction.
inline std::vector<condex::TrialRecord> synthetic_trial(
    std::uint64_t seed, std::size_t n_per_dose = 150) {
  condex::Rng rng(seed);
  const char* doses[4] = {"A", "B", "C", "D"};
  const double rho[4] = {0.2, 0.35, 0.5, 0.65};
  const double g_alt = 0.5, d_alt = 0.85, g_tbl = 0.4, d_tbl = 0.8;
  std::vector<condex::TrialRecord> out;
  for (int j = 0; j < 4; ++j) {
    const double a = std::sqrt(rho[j]), b = std::sqrt(1.0 - rho[j]);
    for (std::size_t i = 0; i < n_per_dose; ++i) {
      const double wb_alt = std::log(25.0) + 0.30 * rng.normal();
      const double wb_tbl = std::log(10.0) + 0.35 * rng.normal();
      const double zc = rng.normal();
      const double x_alt = 0.35 * (a * zc + b * rng.normal());
      const double x_tbl = 0.30 * (a * zc + b * rng.normal());
      condex::TrialRecord r;
      r.dose = doses[j];
      r.alt_b = std::exp(wb_alt);
      r.tbl_b = std::exp(wb_tbl);
      r.alt_m = std::exp(g_alt + d_alt * wb_alt + x_alt);
      r.tbl_m = std::exp(g_tbl + d_tbl * wb_tbl + x_tbl);
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline void write_trial_csv(const std::string& path,
                            const std::vector<condex::TrialRecord>& records) {
  std::ofstream out(path);
  out << "dose,ALT.B,ALT.M,TBL.B,TBL.M\n";
  out.precision(17);
  for (const auto& r : records)
    out << r.dose << "," << r.alt_b << "," << r.alt_m << "," << r.tbl_b << ","
        << r.tbl_m << "\n";
}

// Per-binary scratch directory under the system temp root.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("condex_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- brute-force grid oracle for the feasibility checks ---------------------
//
// The oracle scans a log-spaced grid over [v, kOracleXMax] (both end points
// included exactly).  A grid can miss a dip between neighbouring points by at
// most 1/2 max|x^2 f''| h^2 with h half the log step, where the curvature
// bound only needs to hold near the minimum; `band` doubles that bound for
// safety.  Callers skip configurations whose closed-form margin falls within
// `band` of the feasibility cut (the grid cannot classify them) and
// configurations whose minimum provably lies beyond the scanned range.
inline constexpr double kOracleXMax = 1e6;

struct GridScan {
  double min_value;
  double band;
};

template <typename F, typename Curv>
inline GridScan log_grid_scan(const F& f, const Curv& x2fxx, double lo,
                              double hi, int n) {
  const double la = std::log(lo), lb = std::log(hi);
  std::vector<double> xs(n + 1), fs(n + 1);
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    xs[i] = (i == 0) ? lo : (i == n) ? hi : std::exp(la + (lb - la) * i / n);
    fs[i] = f(xs[i]);
    m = std::min(m, fs[i]);
  }
  // curvature near the minimum is what controls the dip the grid can miss
  const double cutoff = m + std::max(1.0, 1e-3 * std::fabs(m));
  double c = 0.0;
  for (int i = 0; i <= n; ++i) {
    if (fs[i] <= cutoff) c = std::max(c, std::fabs(x2fxx(xs[i])));
  }
  const double half_step = 0.5 * (lb - la) / n;
  return {m, c * half_step * half_step + 1e-6};
}

// One side of the self-consistency bound, stated independently as the upper
// dependence envelope: x + zplus - (alpha x + x^beta z) must be nonnegative.
inline GridScan keef_half_grid(double alpha, double beta, double z,
                               double zplus, double v, int n) {
  return log_grid_scan(
      [&](double x) {
        return (x + zplus) - (alpha * x + std::pow(x, beta) * z);
      },
      [&](double x) { return -beta * (beta - 1.0) * std::pow(x, beta) * z; },
      v, kOracleXMax, n);
}

// The ordering gap D(x) = (a_hi - a_lo) x + x^b_hi z_hi - x^b_lo z_lo.
inline GridScan so_grid(double a_hi, double b_hi, double z_hi, double a_lo,
                        double b_lo, double z_lo, double v, int n) {
  return log_grid_scan(
      [&](double x) {
        return (a_hi - a_lo) * x + std::pow(x, b_hi) * z_hi -
               std::pow(x, b_lo) * z_lo;
      },
      [&](double x) {
        return b_hi * (b_hi - 1.0) * std::pow(x, b_hi) * z_hi -
               b_lo * (b_lo - 1.0) * std::pow(x, b_lo) * z_lo;
      },
      v, kOracleXMax, n);
}

// Derivatives at the far end of the oracle range, used to detect minima that
// lie beyond the scanned scope.
inline double keef_half_end_slope(double alpha, double beta, double z) {
  return (1.0 - alpha) - beta * z * std::pow(kOracleXMax, beta - 1.0);
}
inline double so_end_slope(double a_hi, double b_hi, double z_hi, double a_lo,
                           double b_lo, double z_lo) {
  return (a_hi - a_lo) + b_hi * z_hi * std::pow(kOracleXMax, b_hi - 1.0) -
         b_lo * z_lo * std::pow(kOracleXMax, b_lo - 1.0);
}

// Random, data-coherent tail configuration: parameters are drawn uniformly
// and the residual summary is built from data generated by the model
// equation itself, so the (z, z+, z-) quantile triples satisfy every
// relationship the real fitter would produce.
struct TailConfig {
  double alpha = 0.0;
  double beta = 0.0;
  condex::ResidualSummary summary;
};

inline TailConfig draw_tail_config(condex::Rng& rng) {
  TailConfig c;
  c.alpha = -0.99 + 1.98 * rng.u01();
  c.beta = -3.0 + 3.95 * rng.u01();  // capped at 0.95
  const std::size_t n = 30 + rng.index(40);
  condex::ExceedanceData d;
  d.threshold_u = 1.0;
  const double shift = -1.5 + 3.0 * rng.u01();
  const double scale = 0.2 + 1.3 * rng.u01();
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 1.0 + 1.5 * rng.exponential();
    z[i] = shift + scale * rng.normal();
    d.y_cond.push_back(x);
    d.y_dep.push_back(c.alpha * x + std::pow(x, c.beta) * z[i]);
  }
  c.summary = condex::ResidualSummary::from(z, d);
  return c;
}

}  // namespace testutil
