#include "condex/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "condex/errors.hpp"

namespace condex {

double DFunction::value(double x) const {
  return (a_hi - a_lo) * x + std::pow(x, b_hi) * z_hi - std::pow(x, b_lo) * z_lo;
}

double DFunction::deriv(double x) const {
  return (a_hi - a_lo) + b_hi * z_hi * std::pow(x, b_hi - 1.0) -
         b_lo * z_lo * std::pow(x, b_lo - 1.0);
}

namespace {

// Root of a function monotone on [a, b] with a sign change between the ends.
template <typename F>
double bisect_monotone(const F& f, double a, double b, double fa) {
  double lo = a, hi = b, flo = fa;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::fabs(fm) < 1e-12 || (hi - lo) < 1e-10 * mid) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

StationaryReport classify_stationary(const DFunction& d, ConstraintLevel lvl) {
  const double v = lvl.v;
  if (!(v > 0.0)) throw DomainError("constraint level v must be positive");
  StationaryReport rep;

  // D'' changes sign at most once, at
  //   s = [ b_lo (b_lo-1) z_lo / (b_hi (b_hi-1) z_hi) ]^(1/(b_hi-b_lo));
  // when s is not real (or the curves share an exponent, or a power term is
  // absent) D' is monotone on the whole half-line.
  const double num = d.b_lo * (d.b_lo - 1.0) * d.z_lo;
  const double den = d.b_hi * (d.b_hi - 1.0) * d.z_hi;
  double s = std::numeric_limits<double>::quiet_NaN();
  if (std::fabs(d.b_hi - d.b_lo) >= 1e-9 && den != 0.0 && num / den > 0.0)
    s = std::pow(num / den, 1.0 / (d.b_hi - d.b_lo));
  if (std::isfinite(s) && s > 0.0) rep.inflection = s;

  auto dp = [&](double x) { return d.deriv(x); };

  std::vector<std::pair<double, double>> segs;
  if (rep.inflection && s > v && s < kXMax)
    segs = {{v, s}, {s, kXMax}};
  else
    segs = {{v, kXMax}};

  for (const auto& [a, b] : segs) {
    const double fa = dp(a), fb = dp(b);
    if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0)) {
      rep.points.push_back(bisect_monotone(dp, a, b, fa));
    } else if (fb == 0.0 && b == s) {
      rep.points.push_back(s);  // tangency exactly at the inflection
    }
  }
  std::sort(rep.points.begin(), rep.points.end());
  rep.points.erase(std::unique(rep.points.begin(), rep.points.end()),
                   rep.points.end());
  rep.count = static_cast<int>(rep.points.size());
  return rep;
}

namespace detail {

double keef_half_margin(double alpha, double beta, double z, double zplus,
                        double v) {
  // g(x) = (1-alpha) x - x^beta z + zplus on [v, kXMax].  g' is monotone, so
  // the minimum sits at an end point or at the unique interior stationary
  // point x* = (beta z / (1-alpha))^(1/(1-beta)), which exists only when
  // beta z > 0 and alpha < 1.
  auto g = [&](double x) {
    return (1.0 - alpha) * x - std::pow(x, beta) * z + zplus;
  };
  double m = std::min(g(v), g(kXMax));
  if (beta * z > 0.0 && alpha < 1.0) {
    const double gpv = (1.0 - alpha) - beta * z * std::pow(v, beta - 1.0);
    if (gpv < 0.0) {
      // decreasing at v, so x* > v: closed-form value of g at x*
      const double val = (1.0 - 1.0 / beta) *
                             std::pow(beta * z, 1.0 / (1.0 - beta)) *
                             std::pow(1.0 - alpha, -beta / (1.0 - beta)) +
                         zplus;
      m = std::min(m, val);
    }
  }
  return m;
}

double keef_margin_at(double alpha, double beta, double z, double zplus,
                      double zminus, double v) {
  // the lower-envelope condition is the upper one under the reflection
  // (alpha, z, z+) -> (-alpha, -z, -z-)
  return std::min(keef_half_margin(alpha, beta, z, zplus, v),
                  keef_half_margin(-alpha, beta, -z, -zminus, v));
}

bool keef_feasible_at(double alpha, double beta, double z, double zplus,
                      double zminus, double v) {
  return keef_margin_at(alpha, beta, z, zplus, zminus, v) >= -kFeasTol;
}

double so_pair_margin_at(double a_hi, double b_hi, double z_hi, double a_lo,
                         double b_lo, double z_lo, double v) {
  const DFunction d{a_hi, b_hi, z_hi, a_lo, b_lo, z_lo};
  const StationaryReport rep = classify_stationary(d, {v});
  double m = std::min(d.value(v), d.value(kXMax));
  for (double x : rep.points) m = std::min(m, d.value(x));
  // slope condition at infinity; dominates when violated beyond noise
  if (a_hi < a_lo - 1e-12) m = std::min(m, (a_hi - a_lo) * kXMax);
  return m;
}

bool so_pair_feasible_at(double a_hi, double b_hi, double z_hi, double a_lo,
                         double b_lo, double z_lo, double v) {
  return so_pair_margin_at(a_hi, b_hi, z_hi, a_lo, b_lo, z_lo, v) >= -kFeasTol;
}

}  // namespace detail

bool keef_feasible(double alpha, double beta, const ResidualSummary& s,
                   ConstraintLevel lvl, std::span<const double> qs) {
  if (!(lvl.v > 0.0)) throw DomainError("constraint level v must be positive");
  if (!(beta < 1.0)) throw DomainError("beta must be below 1");
  for (double q : qs) {
    if (!detail::keef_feasible_at(alpha, beta, s.z_quantile(q),
                                  s.z_plus_quantile(q), s.z_minus_quantile(q),
                                  lvl.v))
      return false;
  }
  return true;
}

bool so_feasible(const TailView& hi, const TailView& lo, ConstraintLevel lvl,
                 std::span<const double> qs) {
  if (!(lvl.v > 0.0)) throw DomainError("constraint level v must be positive");
  if (!(hi.beta < 1.0 && lo.beta < 1.0))
    throw DomainError("beta must be below 1");
  for (double q : qs) {
    if (!detail::so_pair_feasible_at(hi.alpha, hi.beta, hi.summary->z_quantile(q),
                                     lo.alpha, lo.beta, lo.summary->z_quantile(q),
                                     lvl.v))
      return false;
  }
  return true;
}

bool so_feasible_chain(std::span<const TailView> groups, ConstraintLevel lvl,
                       std::span<const double> qs) {
  for (std::size_t i = 1; i < groups.size(); ++i) {
    if (!so_feasible(groups[i], groups[i - 1], lvl, qs)) return false;
  }
  return true;
}

}  // namespace condex
