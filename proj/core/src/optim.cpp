#include "condex/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace condex {

namespace {
double eval(const Objective& f, std::span<const double> x) {
  const double v = f(x);
  return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
}
}  // namespace

OptimResult nelder_mead(const Objective& f, std::span<const double> start,
                        const SimplexOptions& opt) {
  const std::size_t n = start.size();
  std::vector<std::vector<double>> verts(n + 1,
                                         std::vector<double>(start.begin(), start.end()));
  for (std::size_t i = 0; i < n; ++i) {
    verts[i + 1][i] += start[i] != 0.0 ? opt.init_step * std::fabs(start[i]) +
                                             0.05 * opt.init_step
                                       : opt.init_step;
  }
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(f, verts[i]);

  std::vector<std::size_t> ord(n + 1);
  auto sort_order = [&] {
    for (std::size_t i = 0; i <= n; ++i) ord[i] = i;
    std::stable_sort(ord.begin(), ord.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
  };

  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iter; ++it) {
    sort_order();
    const std::size_t best = ord[0], worst = ord[n], second = ord[n - 1];

    double fspread = std::fabs(fv[worst] - fv[best]);
    double xspread = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        xspread = std::max(xspread, std::fabs(verts[ord[i]][j] - verts[best][j]));
    if (fspread < opt.ftol && xspread < opt.xtol) {
      converged = true;
      break;
    }

    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i <= n; ++i)
        if (i != worst) s += verts[i][j];
      centroid[j] = s / static_cast<double>(n);
    }

    for (std::size_t j = 0; j < n; ++j)
      xr[j] = centroid[j] + (centroid[j] - verts[worst][j]);
    const double fr = eval(f, xr);

    if (fr < fv[best]) {
      for (std::size_t j = 0; j < n; ++j)
        xe[j] = centroid[j] + 2.0 * (centroid[j] - verts[worst][j]);
      const double fe = eval(f, xe);
      if (fe < fr) {
        verts[worst] = xe;
        fv[worst] = fe;
      } else {
        verts[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      verts[worst] = xr;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      const std::vector<double>& towards = outside ? xr : verts[worst];
      for (std::size_t j = 0; j < n; ++j)
        xc[j] = centroid[j] + 0.5 * (towards[j] - centroid[j]);
      const double fc = eval(f, xc);
      if (fc < (outside ? fr : fv[worst])) {
        verts[worst] = xc;
        fv[worst] = fc;
      } else {
        // shrink towards the best vertex
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == best) continue;
          for (std::size_t j = 0; j < n; ++j)
            verts[i][j] = verts[best][j] + 0.5 * (verts[i][j] - verts[best][j]);
          fv[i] = eval(f, verts[i]);
        }
      }
    }
  }
  sort_order();
  return {verts[ord[0]], fv[ord[0]], it, converged};
}

OptimResult pattern_search(const Objective& f, std::span<const double> start,
                           std::vector<double> steps, double step_tol,
                           int max_iter) {
  std::vector<double> x(start.begin(), start.end());
  double fx = eval(f, x);
  int it = 0;
  bool converged = false;
  while (it < max_iter) {
    bool improved = false;
    for (std::size_t j = 0; j < x.size(); ++j) {
      for (double dir : {1.0, -1.0}) {
        std::vector<double> cand = x;
        cand[j] += dir * steps[j];
        const double fc = eval(f, cand);
        ++it;
        if (fc < fx) {
          x = std::move(cand);
          fx = fc;
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      double maxstep = 0.0;
      for (double& s : steps) {
        s *= 0.5;
        maxstep = std::max(maxstep, s);
      }
      if (maxstep < step_tol) {
        converged = true;
        break;
      }
    }
  }
  return {x, fx, it, converged};
}

}  // namespace condex
