#include "condex/liver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "condex/errors.hpp"
#include "condex/optim.hpp"
#include "condex/stats.hpp"

namespace condex {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim blanks, quotes and a trailing carriage return
    const auto is_junk = [](char c) {
      return c == ' ' || c == '\t' || c == '\r' || c == '"';
    };
    std::size_t b = 0, e = field.size();
    while (b < e && is_junk(field[b])) ++b;
    while (e > b && is_junk(field[e - 1])) --e;
    out.push_back(field.substr(b, e - b));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_positive(const std::string& s, const std::string& column,
                      std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw SchemaError("line " + std::to_string(line_no) + ": bad value '" + s +
                      "' in column " + column);
  }
  if (used != s.size() || !std::isfinite(v))
    throw SchemaError("line " + std::to_string(line_no) + ": bad value '" + s +
                      "' in column " + column);
  if (!(v > 0.0))
    throw SchemaError("line " + std::to_string(line_no) +
                      ": nonpositive value in column " + column);
  return v;
}

}  // namespace

std::vector<TrialRecord> read_liver_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open input file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty input file: " + path);
  const auto header = split_csv_line(line);
  const std::vector<std::string> needed = {"dose", "ALT.B", "ALT.M", "TBL.B",
                                           "TBL.M"};
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& name : needed) {
    if (!col.count(name)) throw SchemaError("missing column: " + name);
  }
  std::vector<TrialRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() < header.size())
      throw SchemaError("line " + std::to_string(line_no) +
                        ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(f.size()));
    TrialRecord r;
    r.dose = f[col["dose"]];
    if (r.dose.empty())
      throw SchemaError("line " + std::to_string(line_no) + ": empty dose label");
    r.alt_b = parse_positive(f[col["ALT.B"]], "ALT.B", line_no);
    r.alt_m = parse_positive(f[col["ALT.M"]], "ALT.M", line_no);
    r.tbl_b = parse_positive(f[col["TBL.B"]], "TBL.B", line_no);
    r.tbl_m = parse_positive(f[col["TBL.M"]], "TBL.M", line_no);
    out.push_back(std::move(r));
  }
  if (out.empty()) throw SchemaError("no data rows in " + path);
  return out;
}

MedianRegression median_regression(std::span<const double> w_post,
                                   std::span<const double> w_base) {
  if (w_post.size() != w_base.size())
    throw DomainError("regression needs equal-length vectors");
  const std::size_t n = w_post.size();
  if (n < 10) throw InsufficientData("median regression needs >= 10 points");

  auto loss = [&](std::span<const double> th) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += std::fabs(w_post[i] - th[0] - th[1] * w_base[i]);
    return s;
  };

  // least-squares start
  const double mb = mean(w_base), mp = mean(w_post);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (w_base[i] - mb) * (w_base[i] - mb);
    sxy += (w_base[i] - mb) * (w_post[i] - mp);
  }
  const double slope0 = sxx > 0.0 ? sxy / sxx : 0.0;
  std::vector<double> start = {mp - slope0 * mb, slope0};

  OptimResult r = nelder_mead(loss, start);
  // the check loss is piecewise linear; finish with a pattern search so the
  // simplex cannot stall on a kink
  r = pattern_search(loss, r.x, {0.05, 0.05});

  MedianRegression out;
  out.gamma = r.x[0];
  out.delta = r.x[1];
  out.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.residuals[i] = w_post[i] - out.gamma - out.delta * w_base[i];
  // pin the residual median at zero exactly
  const double med = quantile(out.residuals, 0.5);
  out.gamma += med;
  for (double& e : out.residuals) e -= med;
  return out;
}

double conditional_spearman(std::span<const double> x,
                            std::span<const double> y, double level) {
  if (x.size() != y.size()) throw DomainError("paired vectors required");
  if (!(level > 0.0 && level <= 1.0))
    throw DomainError("level must lie in (0,1]");
  const std::size_t n = x.size();
  if (n < 5) throw InsufficientData("too few points");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double denom = static_cast<double>(n) + 1.0;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n; ++i) {
    if (rx[i] / denom > 1.0 - level && ry[i] / denom > 1.0 - level) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  }
  if (xs.size() < 5)
    throw TooFewTailPoints("fewer than 5 joint tail points at this level");
  return spearman(xs, ys);
}

ChiEstimate chi_measures(std::span<const double> x, std::span<const double> y,
                         double p) {
  if (x.size() != y.size()) throw DomainError("paired vectors required");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("p must lie in (0,1)");
  const std::size_t n = x.size();
  if (n < 10) throw InsufficientData("too few points");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double denom = static_cast<double>(n) + 1.0;
  std::size_t joint = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rx[i] / denom > p && ry[i] / denom > p) ++joint;
  }
  if (joint == 0)
    throw TooFewTailPoints("no joint exceedances at this level");
  const double pj = static_cast<double>(joint) / static_cast<double>(n);
  ChiEstimate out;
  out.chi = pj / (1.0 - p);
  out.chibar = 2.0 * std::log(1.0 - p) / std::log(pj) - 1.0;
  return out;
}

PipelineFit fit_pipeline(const std::vector<TrialRecord>& records,
                         const PipelineConfig& cfg) {
  if (records.empty()) throw InsufficientData("no trial records");
  if (!(cfg.marg_q > 0.0 && cfg.marg_q < 1.0))
    throw DomainError("marg_q must lie in (0,1)");
  if (!(cfg.dep_q > 0.5 && cfg.dep_q < 1.0))
    throw DomainError("dep_q must lie in (0.5,1)");
  for (double q : cfg.so_qs)
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("so_qs must lie in [0,1]");

  std::map<std::string, std::vector<const TrialRecord*>> by_dose;
  for (const auto& r : records) by_dose[r.dose].push_back(&r);

  PipelineFit fit;
  fit.config = cfg;
  if (cfg.dose_order.empty()) {
    for (const auto& [dose, v] : by_dose) fit.dose_order.push_back(dose);
  } else {
    fit.dose_order = cfg.dose_order;
    std::set<std::string> seen;
    for (const auto& d : fit.dose_order) {
      if (!by_dose.count(d)) throw DomainError("dose not in data: " + d);
      if (!seen.insert(d).second) throw DomainError("duplicate dose: " + d);
    }
    if (fit.dose_order.size() != by_dose.size())
      throw DomainError("dose order must list every dose exactly once");
  }

  fit.threshold_laplace = to_laplace(cfg.dep_q);

  for (const auto& [dose, rows] : by_dose) {
    if (rows.size() < 20)
      throw InsufficientData("dose " + dose + " has fewer than 20 records");
    DoseModel dm;
    dm.dose = dose;
    dm.n = rows.size();
    std::vector<double> wb_alt, wm_alt, wb_tbl, wm_tbl;
    for (const TrialRecord* r : rows) {
      wb_alt.push_back(std::log(r->alt_b));
      wm_alt.push_back(std::log(r->alt_m));
      wb_tbl.push_back(std::log(r->tbl_b));
      wm_tbl.push_back(std::log(r->tbl_m));
    }
    dm.base_alt = MarginalModel::fit(wb_alt, cfg.marg_q);
    dm.base_tbl = MarginalModel::fit(wb_tbl, cfg.marg_q);
    dm.adj_alt = median_regression(wm_alt, wb_alt);
    dm.adj_tbl = median_regression(wm_tbl, wb_tbl);
    dm.resid_alt = dm.adj_alt.residuals;
    dm.resid_tbl = dm.adj_tbl.residuals;
    dm.marg_alt = MarginalModel::fit(dm.resid_alt, cfg.marg_q);
    dm.marg_tbl = MarginalModel::fit(dm.resid_tbl, cfg.marg_q);
    dm.lap_alt.reserve(dm.n);
    dm.lap_tbl.reserve(dm.n);
    for (std::size_t i = 0; i < dm.n; ++i) {
      dm.lap_alt.push_back(to_laplace(dm.marg_alt.cdf(dm.resid_alt[i])));
      dm.lap_tbl.push_back(to_laplace(dm.marg_tbl.cdf(dm.resid_tbl[i])));
    }
    fit.doses.emplace(dose, std::move(dm));
  }

  const double u = fit.threshold_laplace;
  auto build_direction = [&](bool cond_alt) {
    DirectionFits dir;
    for (const auto& [dose, dm] : fit.doses) {
      ExceedanceData d;
      d.threshold_u = u;
      for (std::size_t i = 0; i < dm.n; ++i) {
        const double yc = cond_alt ? dm.lap_alt[i] : dm.lap_tbl[i];
        const double yd = cond_alt ? dm.lap_tbl[i] : dm.lap_alt[i];
        if (yc > u) {
          d.y_cond.push_back(yc);
          d.y_dep.push_back(yd);
        }
      }
      if (d.size() < 10)
        throw InsufficientData("dose " + dose + " has fewer than 10 exceedances " +
                               (cond_alt ? "of ALT" : "of TBL"));
      dir.exceed.emplace(dose, std::move(d));
    }
    ConstraintOptions opt;
    opt.keef = true;
    opt.ordering = true;
    opt.qs = cfg.so_qs;
    opt.v_floor = cfg.v_floor;
    opt.v_from_data = cfg.v_from_data;
    dir.plain = fit_unconstrained_groups(dir.exceed);
    dir.plain.v = opt.effective_v(dir.exceed);
    dir.so = fit_constrained(dir.exceed, fit.dose_order, opt);
    return dir;
  };
  fit.tbl_given_alt = build_direction(true);
  fit.alt_given_tbl = build_direction(false);
  return fit;
}

std::vector<std::string> pipeline_notes(const PipelineConfig& cfg) {
  std::vector<std::string> notes;
  if (cfg.v_from_data)
    notes.push_back("constraint level: v = max(v_floor, largest observed "
                    "Laplace conditioning value); the same rule applies to "
                    "simulated refits");
  else
    notes.push_back("constraint level: v fixed at v_floor");
  notes.push_back("dependence threshold: Laplace quantile of dep_q, both "
                  "conditioning directions");
  notes.push_back("marginal tails: generalised Pareto above the marg_q "
                  "sample quantile, empirical body");
  return notes;
}

namespace {

const DoseModel& dose_model(const PipelineFit& fit, const std::string& dose) {
  const auto it = fit.doses.find(dose);
  if (it == fit.doses.end()) throw UnfittedDose("no fit for dose: " + dose);
  return it->second;
}

}  // namespace

std::vector<std::array<double, 2>> simulate_joint_residuals(
    const PipelineFit& fit, const std::string& dose, bool use_so,
    std::size_t n, Rng& rng) {
  const DoseModel& dm = dose_model(fit, dose);
  const double u = fit.threshold_laplace;
  const HTFit& f_alt = (use_so ? fit.tbl_given_alt.so : fit.tbl_given_alt.plain)
                           .by_group.at(dose);
  const HTFit& f_tbl = (use_so ? fit.alt_given_tbl.so : fit.alt_given_tbl.plain)
                           .by_group.at(dose);
  std::vector<std::array<double, 2>> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = rng.index(dm.n);
    const double y_alt = dm.lap_alt[i], y_tbl = dm.lap_tbl[i];
    if (y_alt <= u && y_tbl <= u) {
      out.push_back({dm.resid_alt[i], dm.resid_tbl[i]});
      continue;
    }
    // extreme region: replace by a conditional-model draw, conditioning on
    // the coordinate the sampled point is largest in
    const bool cond_alt = y_alt >= y_tbl;
    const HTFit& f = cond_alt ? f_alt : f_tbl;
    double yk = u, yo = u;
    for (int tries = 0; tries < 1000; ++tries) {
      yk = u + rng.exponential();
      const double z = f.residuals[rng.index(f.residuals.size())];
      yo = f.params.alpha * yk + std::pow(yk, f.params.beta) * z;
      if (yo <= yk) break;  // keep the conditioning coordinate the larger
    }
    const double x_cond = (cond_alt ? dm.marg_alt : dm.marg_tbl)
                              .quantile(from_laplace(yk));
    const double x_other = (cond_alt ? dm.marg_tbl : dm.marg_alt)
                               .quantile(from_laplace(yo));
    if (cond_alt)
      out.push_back({x_cond, x_other});
    else
      out.push_back({x_other, x_cond});
  }
  return out;
}

std::vector<std::array<double, 2>> simulate_patients(const PipelineFit& fit,
                                                     const std::string& dose,
                                                     bool use_so, std::size_t n,
                                                     Rng& rng) {
  const DoseModel& dm = dose_model(fit, dose);
  auto resid = simulate_joint_residuals(fit, dose, use_so, n, rng);
  std::vector<std::array<double, 2>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double wb_alt = dm.base_alt.quantile(rng.u01());
    const double wb_tbl = dm.base_tbl.quantile(rng.u01());
    const double wm_alt = dm.adj_alt.gamma + dm.adj_alt.delta * wb_alt + resid[i][0];
    const double wm_tbl = dm.adj_tbl.gamma + dm.adj_tbl.delta * wb_tbl + resid[i][1];
    out.push_back({std::exp(wm_alt), std::exp(wm_tbl)});
  }
  return out;
}

std::vector<TrialRecord> regenerate_trial(const PipelineFit& fit, bool use_so,
                                          Rng& rng) {
  std::vector<TrialRecord> out;
  for (const auto& dose : fit.dose_order) {
    const DoseModel& dm = dose_model(fit, dose);
    auto resid = simulate_joint_residuals(fit, dose, use_so, dm.n, rng);
    for (std::size_t i = 0; i < dm.n; ++i) {
      const double wb_alt = dm.base_alt.quantile(rng.u01());
      const double wb_tbl = dm.base_tbl.quantile(rng.u01());
      TrialRecord r;
      r.dose = dose;
      r.alt_b = std::exp(wb_alt);
      r.tbl_b = std::exp(wb_tbl);
      r.alt_m = std::exp(dm.adj_alt.gamma + dm.adj_alt.delta * wb_alt + resid[i][0]);
      r.tbl_m = std::exp(dm.adj_tbl.gamma + dm.adj_tbl.delta * wb_tbl + resid[i][1]);
      out.push_back(std::move(r));
    }
  }
  return out;
}

namespace {

std::vector<double> cell_probs(const PipelineFit& fit, const std::string& dose,
                               bool use_so, double x_cut,
                               std::span<const double> y_cuts,
                               std::size_t n_sim, Rng& rng) {
  const auto pts = simulate_patients(fit, dose, use_so, n_sim, rng);
  std::vector<double> probs;
  probs.reserve(y_cuts.size());
  for (double y : y_cuts) {
    std::size_t c = 0;
    for (const auto& p : pts)
      if (p[0] > x_cut && p[1] > y) ++c;
    probs.push_back(static_cast<double>(c) / static_cast<double>(n_sim));
  }
  return probs;
}

}  // namespace

std::vector<PredictRow> predict_table(const PipelineFit& fit,
                                      const SurvivalOptions& opt) {
  if (!(opt.x_cut > 0.0)) throw DomainError("x_cut must be positive");
  if (opt.y_cuts.empty()) throw DomainError("no y_cuts requested");
  for (double y : opt.y_cuts)
    if (!(y > 0.0)) throw DomainError("y_cuts must be positive");
  if (opt.n_sim < 1000) throw DomainError("n_sim must be at least 1000");

  std::vector<PredictRow> rows;
  std::size_t stream = 0;
  for (const auto& dose : fit.dose_order) {
    for (bool so : {false, true}) {
      Rng rng = Rng::child(opt.seed, stream++);
      const auto probs = cell_probs(fit, dose, so, opt.x_cut, opt.y_cuts,
                                    opt.n_sim, rng);
      for (std::size_t yi = 0; yi < opt.y_cuts.size(); ++yi) {
        PredictRow r;
        r.dose = dose;
        r.so = so;
        r.x_cut = opt.x_cut;
        r.y_cut = opt.y_cuts[yi];
        r.prob = probs[yi];
        r.lo95 = r.hi95 = probs[yi];
        rows.push_back(std::move(r));
      }
    }
  }

  if (opt.n_boot > 0) {
    // replicate trials are regenerated from the variant under assessment,
    // refitted from scratch, and re-simulated (three-stage bootstrap)
    const std::size_t n_rep_sim = std::max<std::size_t>(20000, opt.n_sim / 10);
    PipelineConfig cfg = fit.config;
    cfg.dose_order = fit.dose_order;
    for (bool so : {false, true}) {
      std::vector<std::vector<double>> samples;  // per row (this variant)
      std::size_t n_rows = 0;
      for (const auto& r : rows)
        if (r.so == so) ++n_rows;
      samples.resize(n_rows);
      std::size_t failed = 0;
      for (std::size_t rep = 0; rep < opt.n_boot; ++rep) {
        Rng rng = Rng::child(opt.seed, 1000 + 2 * rep + (so ? 1 : 0));
        try {
          const auto synth = regenerate_trial(fit, so, rng);
          const PipelineFit refit = fit_pipeline(synth, cfg);
          std::size_t ri = 0;
          for (const auto& dose : fit.dose_order) {
            const auto probs = cell_probs(refit, dose, so, opt.x_cut,
                                          opt.y_cuts, n_rep_sim, rng);
            for (double p : probs) samples[ri++].push_back(p);
          }
        } catch (const Error&) {
          ++failed;
        }
      }
      if (10 * failed > opt.n_boot || samples.empty() || samples[0].empty())
        throw BootstrapUnstable("liver bootstrap: too many refits failed");
      std::size_t ri = 0;
      for (auto& r : rows) {
        if (r.so != so) continue;
        std::vector<double> s = samples[ri++];
        std::sort(s.begin(), s.end());
        r.lo95 = quantile_sorted(s, 0.025);
        r.hi95 = quantile_sorted(s, 0.975);
      }
    }
  }
  return rows;
}

PredictRow predict_survival(const PipelineFit& fit, const std::string& dose,
                            bool use_so, double x_cut, double y_cut,
                            const SurvivalOptions& opt) {
  SurvivalOptions one = opt;
  one.x_cut = x_cut;
  one.y_cuts = {y_cut};
  dose_model(fit, dose);  // dose must exist
  std::vector<PredictRow> rows = predict_table(fit, one);
  for (auto& r : rows) {
    if (r.dose == dose && r.so == use_so) return r;
  }
  throw UnfittedDose("no prediction for dose: " + dose);
}

}  // namespace condex
