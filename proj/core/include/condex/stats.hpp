#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace condex {

double mean(std::span<const double> x);
// Maximum-likelihood standard deviation (divisor n, not n-1).
double sd_mle(std::span<const double> x);

// Type-7 sample quantile (the R default): linear interpolation between order
// statistics with h = (n-1)q.  `sorted` must be ascending and nonempty;
// q must lie in [0,1].  q=0 gives the minimum and q=1 the maximum.
double quantile_sorted(std::span<const double> sorted, double q);
// Convenience overload that sorts a copy.
double quantile(std::span<const double> x, double q);

// Midranks in 1..n (ties share the average rank).
std::vector<double> midranks(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

// Standard normal quantile, Wichura's PPND16 (AS 241); |error| < 1e-15 on
// (0,1).  Throws DomainError outside (0,1).
double normal_quantile(double p);
double normal_cdf(double x);

// Density helpers used by likelihoods and test oracles.
double gpd_logpdf(double excess, double sigma, double xi);

}  // namespace condex
