#include "condex/ht_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "condex/errors.hpp"
#include "condex/optim.hpp"
#include "condex/stats.hpp"

namespace condex {

namespace {
constexpr double kBig = 1e30;
constexpr double kSigmaFloor = 1e-8;
constexpr double kBetaMax = 1.0 - 1e-6;
constexpr double kBetaMin = -5.0;
constexpr double kLog2Pi = 1.8378770664093454836;
}  // namespace

void ExceedanceData::validate() const {
  if (y_cond.size() != y_dep.size())
    throw DomainError("exceedance pair vectors differ in length");
  if (y_cond.empty()) throw DomainError("exceedance data is empty");
  if (!(threshold_u > 0.0))
    throw DomainError("exceedance threshold must be positive");
  for (double x : y_cond) {
    if (!(x > threshold_u))
      throw DomainError("conditioning values must exceed the threshold");
  }
  for (double y : y_dep) {
    if (!std::isfinite(y)) throw DomainError("non-finite dependent value");
  }
}

ResidualSummary ResidualSummary::from(std::span<const double> residuals,
                                      const ExceedanceData& data) {
  if (residuals.size() != data.size())
    throw DomainError("residual vector does not match data");
  ResidualSummary s;
  s.z_.assign(residuals.begin(), residuals.end());
  s.zplus_.reserve(data.size());
  s.zminus_.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    s.zplus_.push_back(data.y_dep[i] - data.y_cond[i]);
    s.zminus_.push_back(data.y_dep[i] + data.y_cond[i]);
  }
  std::sort(s.z_.begin(), s.z_.end());
  std::sort(s.zplus_.begin(), s.zplus_.end());
  std::sort(s.zminus_.begin(), s.zminus_.end());
  return s;
}

ResidualSummary ResidualSummary::from_sorted(std::vector<double> z,
                                             std::vector<double> zplus,
                                             std::vector<double> zminus) {
  ResidualSummary s;
  s.z_ = std::move(z);
  s.zplus_ = std::move(zplus);
  s.zminus_ = std::move(zminus);
  return s;
}

double ResidualSummary::z_quantile(double q) const {
  return quantile_sorted(z_, q);
}
double ResidualSummary::z_plus_quantile(double q) const {
  return quantile_sorted(zplus_, q);
}
double ResidualSummary::z_minus_quantile(double q) const {
  return quantile_sorted(zminus_, q);
}

double negloglik(const HTParams& p, const ExceedanceData& data) {
  data.validate();
  if (!(p.sigma > 0.0)) throw DomainError("sigma must be positive");
  if (!(p.beta < 1.0)) throw DomainError("beta must be below 1");
  const double n = static_cast<double>(data.size());
  double nll = 0.5 * n * kLog2Pi;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double x = data.y_cond[i];
    const double xb = std::pow(x, p.beta);
    const double dev = data.y_dep[i] - p.alpha * x - p.mu * xb;
    nll += std::log(p.sigma * xb) + dev * dev / (2.0 * p.sigma * p.sigma * xb * xb);
  }
  return nll;
}

std::vector<double> residuals(const HTParams& p, const ExceedanceData& data) {
  data.validate();
  std::vector<double> r;
  r.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    r.push_back((data.y_dep[i] - p.alpha * data.y_cond[i]) /
                std::pow(data.y_cond[i], p.beta));
  return r;
}

ProfileEvaluator::ProfileEvaluator(const ExceedanceData& data) : data_(&data) {
  data.validate();
  log_x_.reserve(data.size());
  for (double x : data.y_cond) {
    log_x_.push_back(std::log(x));
    sum_log_x_ += log_x_.back();
  }
}

ProfilePoint ProfileEvaluator::at(double alpha, double beta,
                                  std::vector<double>* out_residuals) const {
  const auto& d = *data_;
  const std::size_t n = d.size();
  if (out_residuals) {
    out_residuals->clear();
    out_residuals->reserve(n);
  }
  double s = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double zi =
        (d.y_dep[i] - alpha * d.y_cond[i]) * std::exp(-beta * log_x_[i]);
    s += zi;
    ss += zi * zi;
    if (out_residuals) out_residuals->push_back(zi);
  }
  const double nn = static_cast<double>(n);
  const double mu = s / nn;
  const double var = std::max(ss / nn - mu * mu, 0.0);
  double sigma = std::sqrt(var);
  const bool degen = sigma < kSigmaFloor;
  if (degen) sigma = kSigmaFloor;
  const double nll =
      nn * std::log(sigma) + beta * sum_log_x_ + 0.5 * nn + 0.5 * nn * kLog2Pi;
  return {nll, mu, sigma, degen};
}

double ProfileEvaluator::full_negloglik(const HTParams& p) const {
  const auto& d = *data_;
  const double nn = static_cast<double>(d.size());
  double nll = nn * std::log(p.sigma) + p.beta * sum_log_x_ + 0.5 * nn * kLog2Pi;
  const double inv2s2 = 1.0 / (2.0 * p.sigma * p.sigma);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double xb = std::exp(p.beta * log_x_[i]);
    const double dev = d.y_dep[i] - p.alpha * d.y_cond[i] - p.mu * xb;
    nll += dev * dev * inv2s2 / (xb * xb);
  }
  return nll;
}

std::vector<double> ProfileEvaluator::residual_quantiles(
    double alpha, double beta, std::span<const double> qs) const {
  const auto& d = *data_;
  const std::size_t n = d.size();
  bool extremes_only = true;
  for (double q : qs) {
    if (q != 0.0 && q != 1.0) {
      extremes_only = false;
      break;
    }
  }
  std::vector<double> out;
  out.reserve(qs.size());
  if (extremes_only) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -mn;
    for (std::size_t i = 0; i < n; ++i) {
      const double zi =
          (d.y_dep[i] - alpha * d.y_cond[i]) * std::exp(-beta * log_x_[i]);
      mn = std::min(mn, zi);
      mx = std::max(mx, zi);
    }
    for (double q : qs) out.push_back(q == 0.0 ? mn : mx);
    return out;
  }
  std::vector<double> z;
  z.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    z.push_back((d.y_dep[i] - alpha * d.y_cond[i]) * std::exp(-beta * log_x_[i]));
  std::sort(z.begin(), z.end());
  for (double q : qs) out.push_back(quantile_sorted(z, q));
  return out;
}

ProfilePoint profile_negloglik(double alpha, double beta,
                               const ExceedanceData& data) {
  if (!(beta < 1.0)) throw DomainError("beta must be below 1");
  return ProfileEvaluator(data).at(alpha, beta);
}

std::vector<std::vector<double>> profile_surface(const ExceedanceData& data,
                                                 std::span<const double> alphas,
                                                 std::span<const double> betas) {
  ProfileEvaluator ev(data);
  std::vector<std::vector<double>> out(alphas.size(),
                                       std::vector<double>(betas.size()));
  for (std::size_t i = 0; i < alphas.size(); ++i)
    for (std::size_t j = 0; j < betas.size(); ++j)
      out[i][j] = -ev.at(alphas[i], betas[j]).negloglik;
  return out;
}

namespace {

double penalised_profile(double alpha, double beta, const ProfileEvaluator& ev) {
  if (!(alpha >= -1.0 && alpha <= 1.0) || !(beta <= kBetaMax) || beta < kBetaMin)
    return kBig;
  const double nll = ev.at(alpha, beta).negloglik;
  return std::isfinite(nll) ? nll : kBig;
}

HTFit build_fit(const ExceedanceData& data, const ProfileEvaluator& ev,
                double alpha, double beta) {
  HTFit fit;
  std::vector<double> resid;
  const ProfilePoint p = ev.at(alpha, beta, &resid);
  fit.params = {alpha, beta, p.mu, p.sigma};
  fit.residuals = std::move(resid);
  fit.loglik = -p.negloglik;
  fit.summary = ResidualSummary::from(fit.residuals, data);
  fit.degenerate = p.degenerate;
  return fit;
}

}  // namespace

HTFit fit_unconstrained(const ExceedanceData& data,
                        std::span<const std::pair<double, double>> extra_starts) {
  ProfileEvaluator ev(data);
  if (data.size() < 10)
    throw InsufficientData("dependence fit needs at least 10 exceedances");

  // coarse profile grid; its best point seeds one of the simplex starts
  double grid_best = std::numeric_limits<double>::infinity();
  double ga = 0.0, gb = 0.0;
  for (int i = 0; i < 21; ++i) {
    const double a = -1.0 + 2.0 * i / 20.0;
    for (int j = 0; j < 21; ++j) {
      const double b = -3.0 + (kBetaMax + 3.0) * j / 20.0;
      const double v = penalised_profile(a, b, ev);
      if (v < grid_best) {
        grid_best = v;
        ga = a;
        gb = b;
      }
    }
  }

  std::vector<std::pair<double, double>> starts = {
      {-0.5, 0.0}, {0.0, 0.0}, {0.5, 0.0},
      {-0.5, 0.5}, {0.0, 0.5}, {0.5, 0.5},
      {ga, gb}};
  starts.insert(starts.end(), extra_starts.begin(), extra_starts.end());

  // full simplex over (alpha, beta, mu, log sigma) with box penalties
  auto obj4 = [&](std::span<const double> th) {
    const double alpha = th[0], beta = th[1], mu = th[2];
    const double sigma = std::exp(th[3]);
    if (!(alpha >= -1.0 && alpha <= 1.0) || !(beta <= kBetaMax) ||
        beta < kBetaMin || !(sigma > 1e-10) || sigma > 1e10)
      return kBig;
    const double nll = ev.full_negloglik({alpha, beta, mu, sigma});
    return std::isfinite(nll) ? nll : kBig;
  };

  double best_nll = std::numeric_limits<double>::infinity();
  double best_a = ga, best_b = gb;
  SimplexOptions opt;
  opt.max_iter = 800;
  for (const auto& [a0, b0] : starts) {
    const ProfilePoint p0 = ev.at(a0, b0);
    std::vector<double> st = {a0, b0, p0.mu, std::log(p0.sigma)};
    OptimResult r = nelder_mead(obj4, st, opt);
    if (r.fmin >= kBig) continue;
    // snap (mu, sigma) to their exact profile optimum at the returned
    // (alpha, beta); never worse than the simplex point
    const double a = std::clamp(r.x[0], -1.0, 1.0);
    const double b = std::clamp(r.x[1], kBetaMin, kBetaMax);
    const double nll = ev.at(a, b).negloglik;
    if (nll < best_nll) {
      best_nll = nll;
      best_a = a;
      best_b = b;
    }
  }
  if (!std::isfinite(best_nll))
    throw FitDiverged("dependence fit produced no finite optimum");

  // polish on the 2-d profile surface
  auto obj2 = [&](std::span<const double> th) {
    return penalised_profile(th[0], th[1], ev);
  };
  SimplexOptions popt;
  popt.max_iter = 600;
  popt.init_step = 0.05;
  OptimResult pol = nelder_mead(obj2, std::vector<double>{best_a, best_b}, popt);
  if (pol.fmin < best_nll) {
    best_nll = pol.fmin;
    best_a = std::clamp(pol.x[0], -1.0, 1.0);
    best_b = std::clamp(pol.x[1], kBetaMin, kBetaMax);
  }

  return build_fit(data, ev, best_a, best_b);
}

HTFit fit_at(const ExceedanceData& data, double alpha, double beta) {
  if (!(alpha >= -1.0 && alpha <= 1.0)) throw DomainError("alpha outside [-1,1]");
  if (!(beta < 1.0)) throw DomainError("beta must be below 1");
  ProfileEvaluator ev(data);
  return build_fit(data, ev, alpha, beta);
}

double conditional_quantile(const HTParams& p, const ResidualSummary& s,
                            double x, double q) {
  if (!(x > 0.0)) throw DomainError("conditional quantile needs x > 0");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level outside [0,1]");
  return p.alpha * x + std::pow(x, p.beta) * s.z_quantile(q);
}

ExceedanceData sample_exceedances(const HTParams& p,
                                  std::span<const double> residual_pool,
                                  double threshold_u, std::size_t n, Rng& rng) {
  if (residual_pool.empty()) throw DomainError("empty residual pool");
  if (!(threshold_u > 0.0)) throw DomainError("threshold must be positive");
  ExceedanceData out;
  out.threshold_u = threshold_u;
  out.y_cond.reserve(n);
  out.y_dep.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Laplace above u > 0 is u + Exp(1)
    const double x = threshold_u + rng.exponential();
    const double z = residual_pool[rng.index(residual_pool.size())];
    out.y_cond.push_back(x);
    out.y_dep.push_back(p.alpha * x + std::pow(x, p.beta) * z);
  }
  return out;
}

}  // namespace condex
