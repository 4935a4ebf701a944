#pragma once

#include <optional>
#include <span>
#include <vector>

#include "condex/ht_model.hpp"

namespace condex {

// Feasibility tolerance: constraint functions may dip this far below zero
// before a parameter vector is declared infeasible.
inline constexpr double kFeasTol = 1e-8;

// Upper end of the x-range searched for stationary points.  The ordering is
// enforced on [v, kXMax]; together with the slope condition at infinity
// (alpha_hi >= alpha_lo) this pins down the whole half-line in practice.
inline constexpr double kXMax = 1e8;

struct ConstraintLevel {
  double v = 5.0;  // must satisfy v >= threshold_u of the data in use
};

// Gap between two conditional quantile curves,
//   D(x) = (a_hi - a_lo) x + x^b_hi z_hi - x^b_lo z_lo,
// which must be >= 0 for all x > v for the curves to be stochastically
// ordered at this quantile level.
struct DFunction {
  double a_hi, b_hi, z_hi;
  double a_lo, b_lo, z_lo;

  double value(double x) const;
  double deriv(double x) const;
};

struct StationaryReport {
  int count = 0;                    // 0, 1 or 2
  std::vector<double> points;      // stationary points, all > v, ascending
  std::optional<double> inflection; // abscissa where D' turns, if real
};

// Classifies the stationary points of D on (v, kXMax) by splitting at the
// (at most one) inflection of D and bisecting each monotone piece of D'.
StationaryReport classify_stationary(const DFunction& d, ConstraintLevel lvl);

// Single-condition building blocks; quantile values are passed in directly.
namespace detail {
// Margin of the Keef-type bound at one quantile level: the minimum over
// [v, kXMax] of g(x) = (1-alpha)x - x^beta z + zplus, found in closed form
// from g(v), g(kXMax) and the interior stationary point.  The configuration
// is feasible iff the margin is >= -kFeasTol.
double keef_half_margin(double alpha, double beta, double z, double zplus,
                        double v);
double keef_margin_at(double alpha, double beta, double z, double zplus,
                      double zminus, double v);
bool keef_feasible_at(double alpha, double beta, double z, double zplus,
                      double zminus, double v);
// Margin of the ordering of two conditional quantile curves at one quantile
// level: min of D over {v, kXMax, stationary points}, with a strong negative
// term when the slope condition alpha_hi >= alpha_lo fails.
double so_pair_margin_at(double a_hi, double b_hi, double z_hi, double a_lo,
                         double b_lo, double z_lo, double v);
bool so_pair_feasible_at(double a_hi, double b_hi, double z_hi, double a_lo,
                         double b_lo, double z_lo, double v);
}  // namespace detail

// Self-consistency constraint of a single fitted tail model against the
// identity dependence bounds, checked at each quantile level in qs.
bool keef_feasible(double alpha, double beta, const ResidualSummary& s,
                   ConstraintLevel lvl, std::span<const double> qs);

// One tail model per group.  `summary` is not owned.
struct TailView {
  double alpha;
  double beta;
  const ResidualSummary* summary;
};

// Stochastic ordering of the hi-group conditional quantiles above the
// lo-group ones, at each level in qs.
bool so_feasible(const TailView& hi, const TailView& lo, ConstraintLevel lvl,
                 std::span<const double> qs);

// Whole chain, groups ordered weakest dependence first.  True iff every
// adjacent pair is ordered.
bool so_feasible_chain(std::span<const TailView> groups, ConstraintLevel lvl,
                       std::span<const double> qs);

}  // namespace condex
