#include "condex/margins.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "condex/errors.hpp"
#include "condex/optim.hpp"
#include "condex/stats.hpp"

namespace condex {

double to_laplace(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("to_laplace needs p in (0,1)");
  return p < 0.5 ? std::log(2.0 * p) : -std::log(2.0 * (1.0 - p));
}

double from_laplace(double y) {
  return y < 0.0 ? 0.5 * std::exp(y) : 1.0 - 0.5 * std::exp(-y);
}

double gpd_negloglik(const GpdParams& p, std::span<const double> excesses) {
  double nll = 0.0;
  for (double e : excesses) {
    const double lp = gpd_logpdf(e, p.sigma, p.xi);
    if (!std::isfinite(lp)) return std::numeric_limits<double>::infinity();
    nll -= lp;
  }
  return nll;
}

double gpd_cdf(double excess, const GpdParams& p) {
  if (excess <= 0.0) return 0.0;
  if (std::fabs(p.xi) < 1e-12) return 1.0 - std::exp(-excess / p.sigma);
  const double t = 1.0 + p.xi * excess / p.sigma;
  if (t <= 0.0) return 1.0;  // past the upper endpoint (xi < 0)
  return 1.0 - std::pow(t, -1.0 / p.xi);
}

double gpd_quantile(double prob, const GpdParams& p) {
  if (!(prob >= 0.0 && prob < 1.0)) throw DomainError("gpd quantile needs p in [0,1)");
  if (std::fabs(p.xi) < 1e-12) return -p.sigma * std::log(1.0 - prob);
  return p.sigma / p.xi * (std::pow(1.0 - prob, -p.xi) - 1.0);
}

GpdParams fit_gpd(std::span<const double> excesses) {
  const std::size_t n = excesses.size();
  if (n < 5) throw InsufficientData("gpd fit needs at least 5 excesses");
  for (double e : excesses)
    if (e < 0.0) throw DomainError("gpd excesses must be nonnegative");

  const double m = mean(excesses);
  const double s = sd_mle(excesses);
  if (!(m > 0.0)) throw DomainError("gpd excesses are all zero");

  // objective over (log sigma, xi); out-of-support points get a big penalty
  auto obj = [&](std::span<const double> th) {
    const double sigma = std::exp(th[0]);
    const double xi = th[1];
    if (!(xi > -1.0 && xi <= 2.0) || !(sigma > 1e-12) || sigma > 1e12)
      return 1e30;
    const double nll = gpd_negloglik({sigma, xi}, excesses);
    return std::isfinite(nll) ? nll : 1e30;
  };

  // moment estimators assuming xi < 1/2, plus fixed offsets and a coarse grid
  const double cv2 = s > 0.0 ? (s * s) / (m * m) : 1.0;
  const double xi0 = 0.5 * (1.0 - 1.0 / cv2) > -0.9 ? 0.5 * (1.0 - 1.0 / cv2) : -0.9;
  const double sig0 = 0.5 * m * (1.0 / cv2 + 1.0);

  std::vector<std::vector<double>> starts = {
      {std::log(sig0 > 0.0 ? sig0 : m), std::min(std::max(xi0, -0.9), 1.5)},
      {std::log(m), 0.0},
      {std::log(m), 0.3},
      {std::log(m), -0.3},
  };
  // coarse profile over a grid, best point becomes the fifth start
  double best_g = std::numeric_limits<double>::infinity();
  std::vector<double> grid_start = {std::log(m), 0.0};
  for (double ls = std::log(0.2 * m); ls <= std::log(5.0 * m) + 1e-9;
       ls += std::log(25.0) / 10.0) {
    for (double xi = -0.6; xi <= 1.2 + 1e-9; xi += 0.2) {
      const double v = obj(std::vector<double>{ls, xi});
      if (v < best_g) {
        best_g = v;
        grid_start = {ls, xi};
      }
    }
  }
  starts.push_back(grid_start);

  OptimResult best;
  best.fmin = std::numeric_limits<double>::infinity();
  SimplexOptions opt;
  opt.max_iter = 500;
  for (const auto& st : starts) {
    OptimResult r = nelder_mead(obj, st, opt);
    if (r.fmin < best.fmin) best = r;
  }
  if (!std::isfinite(best.fmin) || best.fmin >= 1e29)
    throw FitDiverged("gpd fit produced no finite optimum");
  return {std::exp(best.x[0]), best.x[1]};
}

double ecdf_interp(std::span<const double> sorted, double x) {
  const std::size_t n = sorted.size();
  if (n == 0) throw InsufficientData("ecdf of empty sample");
  const double denom = static_cast<double>(n) + 1.0;
  if (x <= sorted.front()) return 1.0 / denom;
  if (x >= sorted.back()) return static_cast<double>(n) / denom;
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - sorted.begin());  // x < sorted[k]
  const double xlo = sorted[k - 1], xhi = sorted[k];
  const double flo = static_cast<double>(k) / denom;
  const double fhi = static_cast<double>(k + 1) / denom;
  if (xhi == xlo) return flo;
  return flo + (fhi - flo) * (x - xlo) / (xhi - xlo);
}

double ecdf_interp_inverse(std::span<const double> sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 0) throw InsufficientData("ecdf inverse of empty sample");
  const double denom = static_cast<double>(n) + 1.0;
  if (p <= 1.0 / denom) return sorted.front();
  if (p >= static_cast<double>(n) / denom) return sorted.back();
  const double h = p * denom;  // in (1, n)
  const std::size_t k = static_cast<std::size_t>(h);  // 1..n-1
  const double frac = h - static_cast<double>(k);
  return sorted[k - 1] + frac * (sorted[k] - sorted[k - 1]);
}

MarginalModel MarginalModel::fit(std::span<const double> sample,
                                 double threshold_quantile) {
  if (!(threshold_quantile > 0.0 && threshold_quantile < 1.0))
    throw DomainError("marginal threshold quantile must be in (0,1)");
  if (sample.size() < 20)
    throw InsufficientData("marginal fit needs at least 20 observations");
  MarginalModel m;
  m.sorted_.assign(sample.begin(), sample.end());
  std::sort(m.sorted_.begin(), m.sorted_.end());
  m.threshold_u_ = quantile_sorted(m.sorted_, threshold_quantile);
  m.exceed_prob_ = 1.0 - ecdf_interp(m.sorted_, m.threshold_u_);

  std::vector<double> excesses;
  for (auto it = std::upper_bound(m.sorted_.begin(), m.sorted_.end(), m.threshold_u_);
       it != m.sorted_.end(); ++it)
    excesses.push_back(*it - m.threshold_u_);
  if (excesses.size() < 5)
    throw InsufficientData("marginal fit has fewer than 5 threshold excesses");
  m.gpd_ = fit_gpd(excesses);
  return m;
}

MarginalModel MarginalModel::from_parts(std::vector<double> sorted_sample,
                                        double threshold_u, double exceed_prob,
                                        GpdParams gpd) {
  MarginalModel m;
  m.sorted_ = std::move(sorted_sample);
  m.threshold_u_ = threshold_u;
  m.exceed_prob_ = exceed_prob;
  m.gpd_ = gpd;
  return m;
}

double MarginalModel::cdf(double x) const {
  if (x <= threshold_u_) return ecdf_interp(sorted_, x);
  double p = 1.0 - exceed_prob_ * (1.0 - gpd_cdf(x - threshold_u_, gpd_));
  // keep strictly below 1 so the Laplace transform stays finite
  return std::min(p, 1.0 - 1e-10);
}

double MarginalModel::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("marginal quantile needs p in (0,1)");
  const double body_top = 1.0 - exceed_prob_;
  if (p <= body_top) return ecdf_interp_inverse(sorted_, p);
  return threshold_u_ + gpd_quantile(1.0 - (1.0 - p) / exceed_prob_, gpd_);
}

}  // namespace condex
