#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "condex/rng.hpp"

namespace condex {

// Conditional dependence model on standard Laplace margins: given the
// conditioning variable exceeding a high threshold u,
//   Y_dep = alpha * Y_cond + Y_cond^beta * Z,
// with Z treated as Normal(mu, sigma^2) for estimation only.

struct HTParams {
  double alpha = 0.0;  // in [-1, 1]
  double beta = 0.0;   // < 1
  double mu = 0.0;
  double sigma = 1.0;  // > 0
};

// Paired threshold exceedances on the Laplace scale; every y_cond must
// exceed threshold_u (> 0).
struct ExceedanceData {
  std::vector<double> y_cond;
  std::vector<double> y_dep;
  double threshold_u = 0.0;

  std::size_t size() const { return y_cond.size(); }
  void validate() const;  // throws DomainError on a broken invariant
};

// Empirical summaries of model residuals needed by the parameter-space
// constraints: quantiles of z, of y_dep - y_cond, and of y_dep + y_cond.
class ResidualSummary {
 public:
  static ResidualSummary from(std::span<const double> residuals,
                              const ExceedanceData& data);
  static ResidualSummary from_sorted(std::vector<double> z,
                                     std::vector<double> zplus,
                                     std::vector<double> zminus);

  double z_quantile(double q) const;        // q=0 min, q=1 max
  double z_plus_quantile(double q) const;   // quantile of y_dep - y_cond
  double z_minus_quantile(double q) const;  // quantile of y_dep + y_cond

  const std::vector<double>& z_sorted() const { return z_; }
  const std::vector<double>& z_plus_sorted() const { return zplus_; }
  const std::vector<double>& z_minus_sorted() const { return zminus_; }

 private:
  std::vector<double> z_, zplus_, zminus_;
};

struct HTFit {
  HTParams params;
  std::vector<double> residuals;  // (y_dep - alpha y_cond) / y_cond^beta
  double loglik = 0.0;
  ResidualSummary summary;
  // residual spread collapsed (sigma pinned at its lower bound); estimates
  // other than alpha are not meaningful
  bool degenerate = false;
};

double negloglik(const HTParams& p, const ExceedanceData& data);
std::vector<double> residuals(const HTParams& p, const ExceedanceData& data);

// Profile negative log-likelihood at (alpha, beta) with (mu, sigma) replaced
// by their closed-form optima; also returns those optima.
struct ProfilePoint {
  double negloglik;
  double mu;
  double sigma;
  bool degenerate;
};

// Cached evaluator for repeated profile computations on one data set.
class ProfileEvaluator {
 public:
  explicit ProfileEvaluator(const ExceedanceData& data);

  const ExceedanceData& data() const { return *data_; }
  double sum_log_x() const { return sum_log_x_; }

  ProfilePoint at(double alpha, double beta,
                  std::vector<double>* out_residuals = nullptr) const;

  // Full negative log-likelihood (mu, sigma free), same value as
  // negloglik() but using cached logarithms.
  double full_negloglik(const HTParams& p) const;

  // Empirical residual quantiles at (alpha, beta); a single pass when only
  // the extremes (q = 0 or 1) are requested.
  std::vector<double> residual_quantiles(double alpha, double beta,
                                         std::span<const double> qs) const;

 private:
  const ExceedanceData* data_;
  std::vector<double> log_x_;
  double sum_log_x_ = 0.0;
};

ProfilePoint profile_negloglik(double alpha, double beta,
                               const ExceedanceData& data);

// Profile log-likelihood surface over a grid (rows: alpha, cols: beta).
std::vector<std::vector<double>> profile_surface(const ExceedanceData& data,
                                                 std::span<const double> alphas,
                                                 std::span<const double> betas);

// Unconstrained maximum pseudo-likelihood fit; `extra_starts` adds
// caller-supplied (alpha, beta) starting points to the standard set.
HTFit fit_unconstrained(const ExceedanceData& data,
                        std::span<const std::pair<double, double>> extra_starts = {});

// Fit with (alpha, beta) held fixed; (mu, sigma) at their profile optimum.
HTFit fit_at(const ExceedanceData& data, double alpha, double beta);

// q-quantile of Y_dep given Y_cond = x (> 0), using the empirical residual
// quantile: alpha x + x^beta z(q).
double conditional_quantile(const HTParams& p, const ResidualSummary& s,
                            double x, double q);

// Draw n new exceedance pairs from a fitted model: Y_cond is Laplace given
// Y_cond > u, Z is resampled from the residual pool.
ExceedanceData sample_exceedances(const HTParams& p,
                                  std::span<const double> residual_pool,
                                  double threshold_u, std::size_t n, Rng& rng);

}  // namespace condex
