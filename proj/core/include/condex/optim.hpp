#pragma once

#include <functional>
#include <span>
#include <vector>

namespace condex {

using Objective = std::function<double(std::span<const double>)>;

struct SimplexOptions {
  int max_iter = 600;        // simplex update steps
  double ftol = 1e-11;       // absolute spread of f over the simplex
  double xtol = 1e-10;       // max vertex distance from the best vertex
  double init_step = 0.25;   // initial simplex edge per coordinate
};

struct OptimResult {
  std::vector<double> x;
  double fmin = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Nelder-Mead downhill simplex.  Objectives signal infeasibility by
// returning a large finite value; NaN evaluations are treated as +inf.
OptimResult nelder_mead(const Objective& f, std::span<const double> start,
                        const SimplexOptions& opt = {});

// Coordinate pattern search: repeatedly probes +/- step on each coordinate,
// halving steps on failure.  Robust for piecewise-linear objectives where a
// simplex can stall (median regression).
OptimResult pattern_search(const Objective& f, std::span<const double> start,
                           std::vector<double> steps, double step_tol = 1e-10,
                           int max_iter = 4000);

}  // namespace condex
