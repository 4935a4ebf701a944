#include "condex/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "condex/errors.hpp"
#include "condex/optim.hpp"
#include "condex/stats.hpp"

namespace condex {

namespace {

constexpr double kPenalty = 1e12;
constexpr double kBetaMax = 1.0 - 1e-6;
constexpr double kBetaMin = -5.0;

struct GroupCtx {
  std::string name;
  const ExceedanceData* data;
  ProfileEvaluator ev;
  std::vector<double> zplus_q, zminus_q;  // fixed summaries, one per q

  GroupCtx(std::string n, const ExceedanceData& d,
           std::span<const double> qs)
      : name(std::move(n)), data(&d), ev(d) {
    std::vector<double> zp, zm;
    zp.reserve(d.size());
    zm.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      zp.push_back(d.y_dep[i] - d.y_cond[i]);
      zm.push_back(d.y_dep[i] + d.y_cond[i]);
    }
    std::sort(zp.begin(), zp.end());
    std::sort(zm.begin(), zm.end());
    for (double q : qs) {
      zplus_q.push_back(quantile_sorted(zp, q));
      zminus_q.push_back(quantile_sorted(zm, q));
    }
  }
};

// Constrained objective over the stacked vector (a_0, b_0, a_1, b_1, ...)
// in chain order (weakest group first).
class Engine {
 public:
  Engine(const std::map<std::string, ExceedanceData>& data,
         const std::vector<std::string>& order, const ConstraintOptions& opt,
         double v)
      : opt_(&opt), v_(v) {
    groups_.reserve(order.size());
    for (const auto& name : order)
      groups_.emplace_back(name, data.at(name), opt.qs);
  }

  std::size_t dim() const { return 2 * groups_.size(); }
  const std::vector<GroupCtx>& groups() const { return groups_; }
  double v() const { return v_; }
  const ConstraintOptions& options() const { return *opt_; }

  bool in_box(std::span<const double> ab) const {
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const double a = ab[2 * g], b = ab[2 * g + 1];
      if (!(a >= -1.0 && a <= 1.0 && b >= kBetaMin && b <= kBetaMax))
        return false;
    }
    return true;
  }

  // worst constraint margin over groups, quantile levels and adjacent pairs
  double margin(std::span<const double> ab) const {
    const auto& qs = opt_->qs;
    double m = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> zq(groups_.size());
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      zq[g] = groups_[g].ev.residual_quantiles(ab[2 * g], ab[2 * g + 1], qs);
      if (opt_->keef) {
        for (std::size_t qi = 0; qi < qs.size(); ++qi)
          m = std::min(m, detail::keef_margin_at(
                              ab[2 * g], ab[2 * g + 1], zq[g][qi],
                              groups_[g].zplus_q[qi], groups_[g].zminus_q[qi],
                              v_));
      }
    }
    if (opt_->ordering) {
      for (std::size_t g = 1; g < groups_.size(); ++g) {
        for (std::size_t qi = 0; qi < qs.size(); ++qi)
          m = std::min(m, detail::so_pair_margin_at(
                              ab[2 * g], ab[2 * g + 1], zq[g][qi],
                              ab[2 * (g - 1)], ab[2 * (g - 1) + 1],
                              zq[g - 1][qi], v_));
      }
    }
    return m;
  }

  bool feasible(std::span<const double> ab) const {
    return in_box(ab) && margin(ab) >= -kFeasTol;
  }

  // worst margin over the constraints that involve group g: its own
  // parameter-space constraint plus the ordering pairs shared with its
  // neighbours (whose parameters are read from ab but not constrained here)
  double margin_for(std::size_t g, std::span<const double> ab) const {
    const auto& qs = opt_->qs;
    const auto zq = [&](std::size_t h) {
      return groups_[h].ev.residual_quantiles(ab[2 * h], ab[2 * h + 1], qs);
    };
    const std::vector<double> zg = zq(g);
    double m = std::numeric_limits<double>::infinity();
    if (opt_->keef) {
      for (std::size_t qi = 0; qi < qs.size(); ++qi)
        m = std::min(m, detail::keef_margin_at(ab[2 * g], ab[2 * g + 1],
                                               zg[qi], groups_[g].zplus_q[qi],
                                               groups_[g].zminus_q[qi], v_));
    }
    if (opt_->ordering && g > 0) {
      const std::vector<double> zlo = zq(g - 1);
      for (std::size_t qi = 0; qi < qs.size(); ++qi)
        m = std::min(m, detail::so_pair_margin_at(
                            ab[2 * g], ab[2 * g + 1], zg[qi], ab[2 * (g - 1)],
                            ab[2 * (g - 1) + 1], zlo[qi], v_));
    }
    if (opt_->ordering && g + 1 < groups_.size()) {
      const std::vector<double> zhi = zq(g + 1);
      for (std::size_t qi = 0; qi < qs.size(); ++qi)
        m = std::min(m, detail::so_pair_margin_at(
                            ab[2 * (g + 1)], ab[2 * (g + 1) + 1], zhi[qi],
                            ab[2 * g], ab[2 * g + 1], zg[qi], v_));
    }
    return m;
  }

  double joint_negloglik(std::span<const double> ab) const {
    double nll = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g)
      nll += groups_[g].ev.at(ab[2 * g], ab[2 * g + 1]).negloglik;
    return nll;
  }

  double objective(std::span<const double> ab) const {
    if (!in_box(ab)) {
      double out = 0.0;
      for (std::size_t g = 0; g < groups_.size(); ++g) {
        const double a = ab[2 * g], b = ab[2 * g + 1];
        out += std::max(0.0, std::fabs(a) - 1.0) +
               std::max(0.0, b - kBetaMax) + std::max(0.0, kBetaMin - b);
      }
      return kPenalty * (2.0 + out);
    }
    const double m = margin(ab);
    if (m < -kFeasTol) return kPenalty * (1.0 + std::min(-m, 1e12));
    const double nll = joint_negloglik(ab);
    return std::isfinite(nll) ? nll : kPenalty;
  }

 private:
  std::vector<GroupCtx> groups_;
  const ConstraintOptions* opt_;
  double v_;
};

// Isotonic (nondecreasing) least-squares projection, pool-adjacent-violators.
std::vector<double> isotonic(std::vector<double> a) {
  std::vector<double> val, wt;
  std::vector<std::size_t> len;
  for (double x : a) {
    val.push_back(x);
    wt.push_back(1.0);
    len.push_back(1);
    while (val.size() > 1 && val[val.size() - 2] > val.back()) {
      const double w = wt[wt.size() - 2] + wt.back();
      val[val.size() - 2] =
          (wt[wt.size() - 2] * val[val.size() - 2] + wt.back() * val.back()) / w;
      wt[wt.size() - 2] = w;
      len[len.size() - 2] += len.back();
      val.pop_back();
      wt.pop_back();
      len.pop_back();
    }
  }
  std::vector<double> out;
  for (std::size_t b = 0; b < val.size(); ++b)
    out.insert(out.end(), len[b], val[b]);
  return out;
}

// Shift (or, if the span is too wide, rescale) a nondecreasing vector into
// [-limit, limit] without collapsing any of its gaps.
void squeeze_ordered(std::vector<double>& a, double limit) {
  const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  if (*hi - *lo > 2.0 * limit) {
    const double mid = 0.5 * (*hi + *lo), s = 2.0 * limit / (*hi - *lo);
    for (double& x : a) x = (x - mid) * s;
  } else if (*hi > limit) {
    for (double& x : a) x += limit - *hi;
  } else if (*lo < -limit) {
    for (double& x : a) x += -limit - *lo;
  }
}

// Exhaustive fallback: dynamic programme over per-group (alpha, beta) grids,
// maximizing the worst constraint margin along the chain.  Adjacent pairs are
// the only coupling, so the best chain is exact on the grid; the result is
// the grid point of the most feasible chain even when that margin is still
// negative (it then seeds a final restoration climb).
std::vector<double> dp_anchor(const Engine& eng) {
  const auto& qs = eng.options().qs;
  const bool keef = eng.options().keef;
  const bool ordering = eng.options().ordering;
  const double v = eng.v();
  const std::size_t G = eng.groups().size();

  constexpr int kNAlpha = 41;
  static constexpr double kBetaGrid[] = {-2.5, -1.5, -0.9, -0.5, -0.25,
                                         -0.1, 0.0,  0.1,  0.25, 0.4,
                                         0.55, 0.7,  0.85, 0.93};
  struct State {
    double a, b, keef_m;
    std::vector<double> zq;
  };
  std::vector<std::vector<State>> st(G);
  for (std::size_t g = 0; g < G; ++g) {
    const GroupCtx& ctx = eng.groups()[g];
    for (int ia = 0; ia < kNAlpha; ++ia) {
      const double a = -0.995 + 1.99 * ia / (kNAlpha - 1);
      for (double b : kBetaGrid) {
        State s;
        s.a = a;
        s.b = b;
        s.zq = ctx.ev.residual_quantiles(a, b, qs);
        s.keef_m = std::numeric_limits<double>::infinity();
        if (keef) {
          for (std::size_t qi = 0; qi < qs.size(); ++qi)
            s.keef_m = std::min(
                s.keef_m, detail::keef_margin_at(a, b, s.zq[qi],
                                                 ctx.zplus_q[qi],
                                                 ctx.zminus_q[qi], v));
        }
        st[g].push_back(std::move(s));
      }
    }
  }

  const std::size_t K = st[0].size();
  std::vector<double> cur(K);
  std::vector<std::vector<std::size_t>> parent(G, std::vector<std::size_t>(K, 0));
  for (std::size_t k = 0; k < K; ++k) cur[k] = st[0][k].keef_m;
  for (std::size_t g = 1; g < G; ++g) {
    std::vector<double> nxt(K);
    for (std::size_t k = 0; k < K; ++k) {
      const State& hi = st[g][k];
      double best = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t j = 0; j < K; ++j) {
        double m = cur[j];
        if (m <= best) continue;
        const State& lo = st[g - 1][j];
        if (ordering) {
          for (std::size_t qi = 0; qi < qs.size() && m > best; ++qi)
            m = std::min(m, detail::so_pair_margin_at(hi.a, hi.b, hi.zq[qi],
                                                      lo.a, lo.b, lo.zq[qi],
                                                      v));
        }
        if (m > best) {
          best = m;
          arg = j;
        }
      }
      nxt[k] = std::min(best, hi.keef_m);
      parent[g][k] = arg;
    }
    cur = std::move(nxt);
  }
  std::size_t bk = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (cur[k] > cur[bk]) bk = k;
  std::vector<double> ab(2 * G, 0.0);
  for (std::size_t g = G; g-- > 0;) {
    ab[2 * g] = st[g][bk].a;
    ab[2 * g + 1] = st[g][bk].b;
    if (g > 0) bk = parent[g][bk];
  }
  return ab;
}

std::optional<std::vector<double>> find_anchor(const Engine& eng,
                                               std::span<const double> ab0) {
  const std::size_t G = eng.groups().size();
  const double centre = (static_cast<double>(G) - 1.0) / 2.0;
  // best infeasible candidate seen, kept as a restoration start
  std::vector<double> best_cand;
  double best_cand_margin = -std::numeric_limits<double>::infinity();
  auto try_alphas = [&](const std::vector<double>& alpha)
      -> std::optional<std::vector<double>> {
    std::vector<double> ab(2 * G, 0.0);
    for (std::size_t g = 0; g < G; ++g) ab[2 * g] = alpha[g];
    const double m = eng.margin(ab);
    if (m >= -kFeasTol) return ab;
    if (m > best_cand_margin) {
      best_cand_margin = m;
      best_cand = std::move(ab);
    }
    return std::nullopt;
  };

  // Data-adaptive candidates first: the unconstrained alpha estimates
  // projected onto the ordered cone keep whatever spacing the groups actually
  // have, and widening sweeps buy room against residual-quantile noise.
  std::vector<double> base_alpha(G);
  for (std::size_t g = 0; g < G; ++g)
    base_alpha[g] = std::clamp(ab0[2 * g], -0.995, 0.995);
  const std::vector<double> iso = isotonic(base_alpha);
  for (double widen : {0.0, 0.02, 0.05, 0.1, 0.2, 0.35, 0.6, 1.0}) {
    for (double shrink : {1.0, 0.6, 0.3}) {
      std::vector<double> alpha(G);
      double mean = 0.0;
      for (double x : iso) mean += x / static_cast<double>(G);
      for (std::size_t g = 0; g < G; ++g)
        alpha[g] = mean + shrink * (iso[g] - mean) +
                   (static_cast<double>(g) - centre) * widen;
      squeeze_ordered(alpha, 0.995);
      if (auto ab = try_alphas(alpha)) return ab;
    }
  }

  // Generic fallback: evenly spaced lines over a grid of centres and gaps.
  static constexpr double kDeltas[] = {0.0, 0.02, 0.05, 0.1,  0.15, 0.2, 0.3,
                                       0.45, 0.6, 0.8,  1.0,  1.3,  1.6, 1.9};
  static constexpr double kBases[] = {0.0, 0.2, -0.2, 0.4, -0.4,
                                      0.6, -0.6, 0.8, -0.8};
  for (double delta : kDeltas) {
    for (double base : kBases) {
      std::vector<double> alpha(G);
      for (std::size_t g = 0; g < G; ++g)
        alpha[g] = base + (static_cast<double>(g) - centre) * delta;
      squeeze_ordered(alpha, 0.995);
      if (auto ab = try_alphas(alpha)) return ab;
    }
  }

  // Restoration phase: no closed-form candidate is feasible, so climb the
  // constraint margin itself.  Any point with a nonnegative margin will do;
  // feasible regions reachable only with beta away from zero are found here.
  std::vector<std::vector<double>> starts;
  if (!best_cand.empty()) starts.push_back(best_cand);
  {
    std::vector<double> ab(ab0.begin(), ab0.end());
    for (std::size_t g = 0; g < G; ++g) {
      ab[2 * g] = std::clamp(ab[2 * g], -0.995, 0.995);
      ab[2 * g + 1] = std::clamp(ab[2 * g + 1], kBetaMin + 0.1, 0.9);
    }
    starts.push_back(std::move(ab));
  }
  auto restore = [&](std::span<const double> ab) {
    if (!eng.in_box(ab)) {
      double out = 0.0;
      for (double x : ab) out += std::fabs(x);
      return kPenalty * (1.0 + out);
    }
    return -eng.margin(ab);
  };
  SimplexOptions ropt;
  ropt.max_iter = 400 * static_cast<int>(eng.dim());
  for (double step : {0.15, 0.45}) {
    ropt.init_step = step;
    for (const auto& st : starts) {
      const OptimResult r = nelder_mead(restore, st, ropt);
      if (eng.feasible(r.x)) return r.x;
    }
  }

  // Exhaustive coarse grid, then one last climb from its best chain.
  std::vector<double> dp = dp_anchor(eng);
  if (eng.feasible(dp)) return dp;
  ropt.init_step = 0.05;
  const OptimResult r = nelder_mead(restore, dp, ropt);
  if (eng.feasible(r.x)) return r.x;
  return std::nullopt;
}

// One pass of group-at-a-time refits: each group's (alpha, beta) is refit
// against its own likelihood subject to the constraints involving that group,
// with the neighbours held fixed.  Every constraint is enforced by some step
// whose groups never move afterwards, so the sweep returns a feasible chain
// whenever each two-parameter subproblem finds a feasible point.  `hint`
// supplies an extra per-group start (typically a known-feasible anchor).
std::optional<std::vector<double>> coordinate_sweep(const Engine& eng,
                                                    std::vector<double> ab,
                                                    std::span<const double> hint,
                                                    bool forward) {
  const std::size_t n_groups = eng.groups().size();
  SimplexOptions sopt;
  sopt.max_iter = 500;
  sopt.init_step = 0.1;
  for (std::size_t k = 0; k < n_groups; ++k) {
    const std::size_t g = forward ? k : n_groups - 1 - k;
    auto sub = [&](std::span<const double> p) {
      const double a = p[0], b = p[1];
      if (!(a >= -1.0 && a <= 1.0 && b >= kBetaMin && b <= kBetaMax)) {
        const double out = std::max(0.0, std::fabs(a) - 1.0) +
                           std::max(0.0, b - kBetaMax) +
                           std::max(0.0, kBetaMin - b);
        return kPenalty * (2.0 + out);
      }
      ab[2 * g] = a;
      ab[2 * g + 1] = b;
      const double m = eng.margin_for(g, ab);
      if (m < -kFeasTol) return kPenalty * (1.0 + std::min(-m, 1e12));
      const double nll = eng.groups()[g].ev.at(a, b).negloglik;
      return std::isfinite(nll) ? nll : kPenalty;
    };
    const std::vector<std::vector<double>> sub_starts{
        {ab[2 * g], ab[2 * g + 1]}, {hint[2 * g], hint[2 * g + 1]}};
    std::vector<double> best;
    double best_f = std::numeric_limits<double>::infinity();
    for (const auto& st : sub_starts) {
      const OptimResult r = nelder_mead(sub, st, sopt);
      if (r.fmin < best_f) {
        best_f = r.fmin;
        best = r.x;
      }
    }
    if (!(best_f < kPenalty)) return std::nullopt;
    ab[2 * g] = best[0];
    ab[2 * g + 1] = best[1];
  }
  if (!eng.feasible(ab)) return std::nullopt;
  return ab;
}

void check_order(const std::map<std::string, ExceedanceData>& data,
                 const std::vector<std::string>& order) {
  if (data.empty()) throw DomainError("no groups to fit");
  if (order.size() != data.size())
    throw DomainError("group order must list every group exactly once");
  std::vector<std::string> seen;
  for (const auto& name : order) {
    if (!data.count(name))
      throw DomainError("unknown group in order: " + name);
    if (std::find(seen.begin(), seen.end(), name) != seen.end())
      throw DomainError("duplicate group in order: " + name);
    seen.push_back(name);
  }
}

GroupFits plain_fits(const std::map<std::string, ExceedanceData>& data,
                     std::span<const std::pair<double, double>> extra = {}) {
  GroupFits out;
  out.joint_loglik = 0.0;
  for (const auto& [name, d] : data) {
    HTFit f = fit_unconstrained(d, extra);
    out.joint_loglik += f.loglik;
    out.by_group.emplace(name, std::move(f));
  }
  return out;
}

GroupFits constrained_impl(const std::map<std::string, ExceedanceData>& data,
                           const std::vector<std::string>& order,
                           const ConstraintOptions& opt,
                           GroupFits unconstrained) {
  const double v = opt.effective_v(data);
  for (const auto& [name, d] : data) {
    if (v < d.threshold_u)
      throw DomainError("constraint level v below the dependence threshold");
  }
  unconstrained.v = v;
  unconstrained.constrained = false;
  if (!opt.keef && !opt.ordering) return unconstrained;

  Engine eng(data, order, opt, v);
  std::vector<double> ab0(eng.dim());
  for (std::size_t g = 0; g < order.size(); ++g) {
    const HTFit& f = unconstrained.by_group.at(order[g]);
    ab0[2 * g] = f.params.alpha;
    ab0[2 * g + 1] = f.params.beta;
  }
  // constraints already satisfied: the unconstrained fit is the answer
  if (eng.feasible(ab0)) return unconstrained;

  const auto anchor = find_anchor(eng, ab0);
  if (!anchor)
    throw InfeasibleStart("no feasible starting point for the constrained fit");

  std::vector<std::vector<double>> starts;
  auto add_start = [&](std::vector<double> s) {
    for (const auto& t : starts) {
      double d = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i)
        d = std::max(d, std::fabs(s[i] - t[i]));
      if (d < 1e-7) return;
    }
    starts.push_back(std::move(s));
  };
  // walk from the unconstrained optimum towards the anchor; the first
  // feasible way point is the warmest start available
  for (double t = 0.95; t > 0.0; t -= 0.05) {
    std::vector<double> ab(eng.dim());
    for (std::size_t i = 0; i < ab.size(); ++i)
      ab[i] = (*anchor)[i] + t * (ab0[i] - (*anchor)[i]);
    if (eng.feasible(ab)) {
      add_start(std::move(ab));
      break;
    }
  }
  add_start(*anchor);
  // group-at-a-time projections of the unconstrained fit: sweeping the chain
  // in either direction yields the "lower groups duck under their stronger
  // neighbours" and "upper groups rise above their weaker neighbours"
  // geometries, which tend to sit in different basins of the joint objective
  if (auto s = coordinate_sweep(eng, ab0, *anchor, true))
    add_start(std::move(*s));
  if (auto s = coordinate_sweep(eng, ab0, *anchor, false))
    add_start(std::move(*s));
  // coordinate descent from the anchor tightens the restoration point into a
  // locally good feasible configuration before the joint search
  {
    std::vector<double> cd = *anchor;
    for (int pass = 0; pass < 3; ++pass) {
      auto s = coordinate_sweep(eng, cd, *anchor, pass % 2 == 0);
      if (!s) break;
      cd = std::move(*s);
    }
    add_start(std::move(cd));
  }

  auto obj = [&](std::span<const double> ab) { return eng.objective(ab); };
  SimplexOptions sopt;
  sopt.max_iter = 400 * static_cast<int>(eng.dim());
  sopt.init_step = 0.08;
  std::vector<OptimResult> results;
  results.reserve(starts.size());
  for (const auto& st : starts) results.push_back(nelder_mead(obj, st, sopt));
  std::sort(results.begin(), results.end(),
            [](const OptimResult& a, const OptimResult& b) {
              return a.fmin < b.fmin;
            });

  // polish the two best distinct candidates: pattern search slides along the
  // constraint boundary (the penalty cliff rejects infeasible probes), and a
  // small-step simplex finishes the interior refinement
  std::vector<const OptimResult*> picks{&results.front()};
  for (const auto& r : results) {
    if (picks.size() >= 2) break;
    double d = 0.0;
    for (std::size_t i = 0; i < r.x.size(); ++i)
      d = std::max(d, std::fabs(r.x[i] - picks.front()->x[i]));
    if (d >= 1e-4) picks.push_back(&r);
  }
  std::vector<double> best;
  double best_f = std::numeric_limits<double>::infinity();
  SimplexOptions popt = sopt;
  popt.init_step = 0.01;
  for (const OptimResult* p : picks) {
    std::vector<double> cand = p->x;
    double cand_f = p->fmin;
    const OptimResult ps =
        pattern_search(obj, cand, std::vector<double>(eng.dim(), 0.02), 1e-8);
    if (ps.fmin < cand_f) {
      cand_f = ps.fmin;
      cand = ps.x;
    }
    const OptimResult pol = nelder_mead(obj, cand, popt);
    if (pol.fmin < cand_f) {
      cand_f = pol.fmin;
      cand = pol.x;
    }
    if (cand_f < best_f) {
      best_f = cand_f;
      best = cand;
    }
  }
  if (!(best_f < kPenalty) || !eng.feasible(best))
    throw FitDiverged("constrained fit failed to stay feasible");

  GroupFits out;
  out.v = v;
  out.constrained = true;
  out.joint_loglik = 0.0;
  for (std::size_t g = 0; g < order.size(); ++g) {
    HTFit f = fit_at(data.at(order[g]), best[2 * g], best[2 * g + 1]);
    out.joint_loglik += f.loglik;
    out.by_group.emplace(order[g], std::move(f));
  }
  return out;
}

}  // namespace

double ConstraintOptions::effective_v(
    const std::map<std::string, ExceedanceData>& data) const {
  if (!v_from_data) return v_floor;
  double v = v_floor;
  for (const auto& [name, d] : data)
    for (double x : d.y_cond) v = std::max(v, x);
  return v;
}

GroupFits fit_unconstrained_groups(
    const std::map<std::string, ExceedanceData>& data) {
  if (data.empty()) throw DomainError("no groups to fit");
  return plain_fits(data);
}

GroupFits fit_constrained(const std::map<std::string, ExceedanceData>& data,
                          const std::vector<std::string>& order,
                          const ConstraintOptions& opt) {
  check_order(data, order);
  return constrained_impl(data, order, opt, plain_fits(data));
}

bool groups_feasible(const std::map<std::string, ExceedanceData>& data,
                     const std::vector<std::string>& order,
                     const std::map<std::string, std::pair<double, double>>& ab,
                     const ConstraintOptions& opt) {
  check_order(data, order);
  const double v = opt.effective_v(data);
  Engine eng(data, order, opt, v);
  std::vector<double> x(eng.dim());
  for (std::size_t g = 0; g < order.size(); ++g) {
    const auto& [a, b] = ab.at(order[g]);
    x[2 * g] = a;
    x[2 * g + 1] = b;
  }
  return eng.feasible(x);
}

namespace {

struct StatResult {
  double statistic;
  GroupFits constrained;
};

StatResult ordering_statistic(const std::map<std::string, ExceedanceData>& data,
                              const std::vector<std::string>& order,
                              const ConstraintOptions& opt) {
  GroupFits unc = plain_fits(data);
  GroupFits con = constrained_impl(data, order, opt, unc);
  double l1 = 0.0;
  for (const auto& name : order) {
    const HTFit& cf = con.by_group.at(name);
    const HTFit& uf = unc.by_group.at(name);
    if (cf.loglik > uf.loglik) {
      // make sure the unconstrained optimum dominates the constrained one
      const std::pair<double, double> extra{cf.params.alpha, cf.params.beta};
      HTFit better = fit_unconstrained(data.at(name), {&extra, 1});
      l1 += std::max(better.loglik, uf.loglik);
    } else {
      l1 += uf.loglik;
    }
  }
  double stat = 2.0 * (l1 - con.joint_loglik);
  if (!std::isfinite(stat))
    throw NonFiniteStatistic("ordering test statistic is not finite");
  if (stat < 0.0) stat = 0.0;
  return {stat, std::move(con)};
}

}  // namespace

LrtResult lrt_ordering(const std::map<std::string, ExceedanceData>& data,
                       const std::vector<std::string>& order,
                       const ConstraintOptions& opt, std::size_t n_sim,
                       std::uint64_t seed) {
  check_order(data, order);
  if (n_sim < 99) throw DomainError("ordering test needs n_sim >= 99");
  const StatResult obs = ordering_statistic(data, order, opt);

  LrtResult out;
  out.statistic = obs.statistic;
  out.n_sim = n_sim;
  out.null_sample.reserve(n_sim);
  for (std::size_t r = 0; r < n_sim; ++r) {
    Rng rng = Rng::child(seed, r);
    std::map<std::string, ExceedanceData> sim;
    for (const auto& name : order) {
      const ExceedanceData& d = data.at(name);
      const HTFit& f = obs.constrained.by_group.at(name);
      sim.emplace(name, sample_exceedances(f.params, f.residuals,
                                           d.threshold_u, d.size(), rng));
    }
    // A simulated set whose constrained parameter space is empty has a
    // constrained log-likelihood of -inf, so its likelihood-ratio statistic
    // is +inf.  Recording it that way is conservative for the p-value: the
    // replicate counts as at least as extreme as any observed statistic.
    try {
      out.null_sample.push_back(ordering_statistic(sim, order, opt).statistic);
    } catch (const InfeasibleStart&) {
      out.null_sample.push_back(std::numeric_limits<double>::infinity());
    }
  }
  std::size_t ge = 0;
  for (double s : out.null_sample)
    if (s >= out.statistic) ++ge;
  out.p_value = (1.0 + static_cast<double>(ge)) /
                (static_cast<double>(n_sim) + 1.0);
  return out;
}

std::vector<BootstrapResult> bootstrap_functionals(
    const std::map<std::string, ExceedanceData>& data,
    const std::vector<std::string>& order, const ConstraintOptions& opt,
    const std::vector<GroupFunctional>& functionals, std::size_t n_boot,
    std::uint64_t seed) {
  check_order(data, order);
  if (n_boot < 1) throw DomainError("bootstrap needs n_boot >= 1");
  if (functionals.empty()) throw DomainError("no functionals to bootstrap");
  const GroupFits con = fit_constrained(data, order, opt);

  std::vector<BootstrapResult> out(functionals.size());
  for (std::size_t i = 0; i < functionals.size(); ++i)
    out[i].point = functionals[i](con);

  std::size_t failed = 0;
  for (std::size_t r = 0; r < n_boot; ++r) {
    Rng rng = Rng::child(seed, r);
    std::map<std::string, ExceedanceData> sim;
    for (const auto& name : order) {
      const ExceedanceData& d = data.at(name);
      const HTFit& f = con.by_group.at(name);
      sim.emplace(name, sample_exceedances(f.params, f.residuals,
                                           d.threshold_u, d.size(), rng));
    }
    try {
      const GroupFits refit = fit_constrained(sim, order, opt);
      std::vector<double> vals(functionals.size());
      for (std::size_t i = 0; i < functionals.size(); ++i) {
        vals[i] = functionals[i](refit);
        if (!std::isfinite(vals[i])) throw NonFiniteStatistic("functional");
      }
      for (std::size_t i = 0; i < functionals.size(); ++i)
        out[i].replicates.push_back(vals[i]);
    } catch (const Error&) {
      ++failed;
    }
  }
  if (10 * failed > n_boot || out[0].replicates.empty())
    throw BootstrapUnstable("more than 10% of bootstrap refits failed");
  for (auto& b : out) {
    b.failed = failed;
    std::vector<double> sorted = b.replicates;
    std::sort(sorted.begin(), sorted.end());
    b.lo95 = quantile_sorted(sorted, 0.025);
    b.hi95 = quantile_sorted(sorted, 0.975);
  }
  return out;
}

BootstrapResult bootstrap_functional(
    const std::map<std::string, ExceedanceData>& data,
    const std::vector<std::string>& order, const ConstraintOptions& opt,
    const GroupFunctional& functional, std::size_t n_boot,
    std::uint64_t seed) {
  return bootstrap_functionals(data, order, opt, {functional}, n_boot,
                               seed)[0];
}

}  // namespace condex
