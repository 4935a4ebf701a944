#include "condex/model_state.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "condex/errors.hpp"
#include "condex/version.hpp"

namespace condex {

namespace {

using json = nlohmann::ordered_json;

json margin_json(const MarginalModel& m) {
  return json{{"sample", m.sample_sorted()},
              {"threshold", m.threshold()},
              {"exceed_prob", m.exceed_prob()},
              {"gpd", json{{"sigma", m.gpd().sigma}, {"xi", m.gpd().xi}}}};
}

MarginalModel margin_from(const json& j) {
  GpdParams g;
  g.sigma = j.at("gpd").at("sigma").get<double>();
  g.xi = j.at("gpd").at("xi").get<double>();
  return MarginalModel::from_parts(j.at("sample").get<std::vector<double>>(),
                                   j.at("threshold").get<double>(),
                                   j.at("exceed_prob").get<double>(), g);
}

json regression_json(const MedianRegression& r) {
  return json{{"gamma", r.gamma}, {"delta", r.delta}, {"residuals", r.residuals}};
}

MedianRegression regression_from(const json& j) {
  MedianRegression r;
  r.gamma = j.at("gamma").get<double>();
  r.delta = j.at("delta").get<double>();
  r.residuals = j.at("residuals").get<std::vector<double>>();
  return r;
}

json exceed_json(const ExceedanceData& d) {
  return json{{"y_cond", d.y_cond},
              {"y_dep", d.y_dep},
              {"threshold_u", d.threshold_u}};
}

ExceedanceData exceed_from(const json& j) {
  ExceedanceData d;
  d.y_cond = j.at("y_cond").get<std::vector<double>>();
  d.y_dep = j.at("y_dep").get<std::vector<double>>();
  d.threshold_u = j.at("threshold_u").get<double>();
  d.validate();
  return d;
}

json fits_json(const GroupFits& f) {
  json groups = json::object();
  for (const auto& [g, fit] : f.by_group) {
    groups[g] = json{{"alpha", fit.params.alpha},
                     {"beta", fit.params.beta},
                     {"mu", fit.params.mu},
                     {"sigma", fit.params.sigma},
                     {"loglik", fit.loglik},
                     {"degenerate", fit.degenerate},
                     {"residuals", fit.residuals}};
  }
  return json{{"groups", groups},
              {"joint_loglik", f.joint_loglik},
              {"v", f.v},
              {"constrained", f.constrained}};
}

GroupFits fits_from(const json& j,
                    const std::map<std::string, ExceedanceData>& data) {
  GroupFits f;
  for (const auto& [g, jf] : j.at("groups").items()) {
    if (!data.count(g)) throw SchemaError("fit for unknown group: " + g);
    HTFit fit;
    fit.params.alpha = jf.at("alpha").get<double>();
    fit.params.beta = jf.at("beta").get<double>();
    fit.params.mu = jf.at("mu").get<double>();
    fit.params.sigma = jf.at("sigma").get<double>();
    fit.loglik = jf.at("loglik").get<double>();
    fit.degenerate = jf.at("degenerate").get<bool>();
    fit.residuals = jf.at("residuals").get<std::vector<double>>();
    fit.summary = ResidualSummary::from(fit.residuals, data.at(g));
    f.by_group.emplace(g, std::move(fit));
  }
  f.joint_loglik = j.at("joint_loglik").get<double>();
  f.v = j.at("v").get<double>();
  f.constrained = j.at("constrained").get<bool>();
  if (f.by_group.size() != data.size())
    throw SchemaError("fits do not cover every group");
  return f;
}

json direction_json(const DirectionFits& d) {
  json exceed = json::object();
  for (const auto& [dose, e] : d.exceed) exceed[dose] = exceed_json(e);
  return json{{"exceedances", exceed},
              {"plain", fits_json(d.plain)},
              {"so", fits_json(d.so)}};
}

DirectionFits direction_from(const json& j) {
  DirectionFits d;
  for (const auto& [dose, je] : j.at("exceedances").items())
    d.exceed.emplace(dose, exceed_from(je));
  d.plain = fits_from(j.at("plain"), d.exceed);
  d.so = fits_from(j.at("so"), d.exceed);
  return d;
}

json dose_json(const DoseModel& dm) {
  return json{{"n", dm.n},
              {"base_alt", margin_json(dm.base_alt)},
              {"base_tbl", margin_json(dm.base_tbl)},
              {"adj_alt", regression_json(dm.adj_alt)},
              {"adj_tbl", regression_json(dm.adj_tbl)},
              {"marg_alt", margin_json(dm.marg_alt)},
              {"marg_tbl", margin_json(dm.marg_tbl)},
              {"lap_alt", dm.lap_alt},
              {"lap_tbl", dm.lap_tbl}};
}

DoseModel dose_from(const std::string& dose, const json& j) {
  DoseModel dm;
  dm.dose = dose;
  dm.n = j.at("n").get<std::size_t>();
  dm.base_alt = margin_from(j.at("base_alt"));
  dm.base_tbl = margin_from(j.at("base_tbl"));
  dm.adj_alt = regression_from(j.at("adj_alt"));
  dm.adj_tbl = regression_from(j.at("adj_tbl"));
  dm.marg_alt = margin_from(j.at("marg_alt"));
  dm.marg_tbl = margin_from(j.at("marg_tbl"));
  dm.resid_alt = dm.adj_alt.residuals;
  dm.resid_tbl = dm.adj_tbl.residuals;
  dm.lap_alt = j.at("lap_alt").get<std::vector<double>>();
  dm.lap_tbl = j.at("lap_tbl").get<std::vector<double>>();
  if (dm.n != dm.resid_alt.size() || dm.n != dm.resid_tbl.size() ||
      dm.n != dm.lap_alt.size() || dm.n != dm.lap_tbl.size())
    throw SchemaError("inconsistent record count for dose " + dose);
  return dm;
}

}  // namespace

std::string pipeline_to_json(const PipelineFit& fit, std::uint64_t seed) {
  json j;
  j["format"] = "condex-state";
  j["format_version"] = 1;
  j["tool"] = json{{"version", kVersion}, {"revision", kGitRevision}};
  j["seed"] = seed;
  j["notes"] = pipeline_notes(fit.config);
  j["config"] = json{{"marg_q", fit.config.marg_q},
                     {"dep_q", fit.config.dep_q},
                     {"so_qs", fit.config.so_qs},
                     {"v_floor", fit.config.v_floor},
                     {"v_from_data", fit.config.v_from_data},
                     {"dose_order", fit.dose_order}};
  j["threshold_laplace"] = fit.threshold_laplace;
  json doses = json::object();
  for (const auto& [dose, dm] : fit.doses) doses[dose] = dose_json(dm);
  j["doses"] = std::move(doses);
  j["tbl_given_alt"] = direction_json(fit.tbl_given_alt);
  j["alt_given_tbl"] = direction_json(fit.alt_given_tbl);
  return j.dump(2) + "\n";
}

PipelineFit pipeline_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("state is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "condex-state")
      throw SchemaError("not a condex state file");
    if (j.at("format_version").get<int>() != 1)
      throw SchemaError("unsupported state format version");
    PipelineFit fit;
    const json& jc = j.at("config");
    fit.config.marg_q = jc.at("marg_q").get<double>();
    fit.config.dep_q = jc.at("dep_q").get<double>();
    fit.config.so_qs = jc.at("so_qs").get<std::vector<double>>();
    fit.config.v_floor = jc.at("v_floor").get<double>();
    fit.config.v_from_data = jc.at("v_from_data").get<bool>();
    fit.config.dose_order = jc.at("dose_order").get<std::vector<std::string>>();
    fit.dose_order = fit.config.dose_order;
    fit.threshold_laplace = j.at("threshold_laplace").get<double>();
    for (const auto& [dose, jd] : j.at("doses").items())
      fit.doses.emplace(dose, dose_from(dose, jd));
    for (const auto& dose : fit.dose_order)
      if (!fit.doses.count(dose))
        throw SchemaError("dose order names a missing dose: " + dose);
    if (fit.dose_order.size() != fit.doses.size())
      throw SchemaError("dose order must list every dose exactly once");
    fit.tbl_given_alt = direction_from(j.at("tbl_given_alt"));
    fit.alt_given_tbl = direction_from(j.at("alt_given_tbl"));
    return fit;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("state is missing a field: ") + e.what());
  }
}

void save_pipeline(const PipelineFit& fit, const std::string& path,
                   std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot open output file: " + path);
  out << pipeline_to_json(fit, seed);
  if (!out) throw SchemaError("failed writing state to " + path);
}

PipelineFit load_pipeline(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open state file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return pipeline_from_json(ss.str());
}

}  // namespace condex
