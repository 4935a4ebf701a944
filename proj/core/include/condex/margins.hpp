#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace condex {

// ---- standard Laplace scale -------------------------------------------------
//
// Data are mapped to standard Laplace margins before the dependence model is
// fitted.  to_laplace is the Laplace quantile function applied to a
// probability; from_laplace is its inverse (the Laplace cdf).

double to_laplace(double p);     // p in (0,1)
double from_laplace(double y);   // returns p in (0,1)
inline double laplace_quantile(double p) { return to_laplace(p); }

// ---- generalised Pareto tail ------------------------------------------------

struct GpdParams {
  double sigma = 1.0;  // scale, > 0
  double xi = 0.0;     // shape
};

double gpd_negloglik(const GpdParams& p, std::span<const double> excesses);
double gpd_cdf(double excess, const GpdParams& p);
double gpd_quantile(double prob, const GpdParams& p);

// Maximum-likelihood fit to threshold excesses (all >= 0, at least 5).
GpdParams fit_gpd(std::span<const double> excesses);

// ---- semiparametric marginal model ------------------------------------------
//
// Empirical distribution below a high threshold, generalised Pareto above it:
//   F(x) = Ftilde(x)                          x <= u
//   F(x) = 1 - (1-Ftilde(u)) (1 + xi (x-u)/sigma)^(-1/xi)   x > u
// with Ftilde the interpolated empirical cdf using denominator n+1.

class MarginalModel {
 public:
  MarginalModel() = default;  // unfitted; use fit() or from_parts()

  // Fit with the threshold placed at the `threshold_quantile` empirical
  // quantile of `sample`.
  static MarginalModel fit(std::span<const double> sample,
                           double threshold_quantile);

  double cdf(double x) const;
  double quantile(double p) const;

  double threshold() const { return threshold_u_; }
  double exceed_prob() const { return exceed_prob_; }
  const GpdParams& gpd() const { return gpd_; }
  const std::vector<double>& sample_sorted() const { return sorted_; }

  // Used by (de)serialisation; trusts its arguments.
  static MarginalModel from_parts(std::vector<double> sorted_sample,
                                  double threshold_u, double exceed_prob,
                                  GpdParams gpd);

 private:
  std::vector<double> sorted_;
  double threshold_u_ = 0.0;
  double exceed_prob_ = 0.0;
  GpdParams gpd_;
};

// Interpolated empirical cdf with denominator n+1 on a sorted sample:
// Ftilde(x_(k)) = k/(n+1), linear in between, clamped to [1,n]/(n+1) outside
// the observed range.
double ecdf_interp(std::span<const double> sorted, double x);
double ecdf_interp_inverse(std::span<const double> sorted, double p);

}  // namespace condex
