#include "nested_eig/config.hpp"

#include <cmath>
#include <set>
#include <string_view>

#include <json.hpp>

#include "nested_eig/errors.hpp"

namespace nested_eig {
namespace {

using nlohmann::json;

// Reads the fields of one JSON object and rejects any key it was not asked
// about.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  template <class T>
  bool get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return false;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where() + key + ": " + e.what());
    }
    return true;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where() + "unknown field '" + key + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config: " : "config." + path_ + ": "; }

  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

std::string_view hessian_form_name(HessianForm f) {
  return f == HessianForm::kFull ? "full" : "gauss-newton";
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  const json j = parse_text(json_text);
  RunConfig cfg;
  ObjectReader r(j, "");
  require(r.get("schema_version", cfg.schema_version), "missing schema_version");
  require(cfg.schema_version == kSchemaVersion,
          "unsupported schema_version " + std::to_string(cfg.schema_version));

  if (const json* m = r.child("model")) {
    ObjectReader mr(*m, "model");
    mr.get("name", cfg.model.name);
    mr.get("dose", cfg.model.dose);
    mr.get("log_spread", cfg.model.log_spread);
    mr.get("spread_is_std_dev", cfg.model.spread_is_std_dev);
    mr.get("b", cfg.model.b);
    mr.get("eta", cfg.model.eta);
    mr.get("gamma", cfg.model.gamma);
    mr.get("h", cfg.model.h);
    mr.finish();
  }
  r.get("estimator", cfg.estimator);
  r.get("design", cfg.design);
  r.get("grid", cfg.grid);
  r.get("tol", cfg.tol);
  r.get("alpha", cfg.alpha);
  if (const json* p = r.child("pilot")) {
    ObjectReader pr(*p, "pilot");
    pr.get("n_outer", cfg.pilot.n_outer);
    pr.get("m_inner", cfg.pilot.m_inner);
    pr.get("proposal", cfg.pilot.proposal);
    pr.get("bias_reference_n", cfg.pilot.bias_reference_n);
    pr.get("c3_h_grid", cfg.pilot.c3_h_grid);
    pr.get("c3_h_ref", cfg.pilot.c3_h_ref);
    pr.finish();
  }
  if (const json* b = r.child("budget")) {
    ObjectReader br(*b, "budget");
    br.get("n_outer", cfg.budget.n_outer);
    br.get("m1", cfg.budget.m1);
    br.get("m2", cfg.budget.m2);
    br.finish();
  }
  if (const json* o = r.child("optimizer")) {
    ObjectReader orr(*o, "optimizer");
    orr.get("lower", cfg.optimizer.lower);
    orr.get("upper", cfg.optimizer.upper);
    orr.get("initial_step", cfg.optimizer.initial_step);
    orr.get("minibatch_n", cfg.optimizer.minibatch_n);
    orr.get("minibatch_m1", cfg.optimizer.minibatch_m1);
    orr.get("minibatch_m2", cfg.optimizer.minibatch_m2);
    orr.get("max_sweeps", cfg.optimizer.max_sweeps);
    orr.get("fd_step", cfg.optimizer.fd_step);
    orr.get("move_tol", cfg.optimizer.move_tol);
    orr.finish();
  }
  if (const json* c = r.child("consistency")) {
    ObjectReader cr(*c, "consistency");
    cr.get("tols", cfg.consistency.tols);
    cr.get("runs", cfg.consistency.runs);
    cr.finish();
  }
  if (const json* s = r.child("solver")) {
    ObjectReader sr(*s, "solver");
    sr.get("grad_tol", cfg.solver.grad_tol);
    sr.get("max_iters", cfg.solver.max_iters);
    sr.get("n_multistarts", cfg.solver.n_multistarts);
    sr.get("profile_tol_factor", cfg.solver.profile_tol_factor);
    std::string form;
    if (sr.get("hessian_form", form)) {
      if (form == "gauss-newton") {
        cfg.solver.hessian_form = HessianForm::kGaussNewton;
      } else if (form == "full") {
        cfg.solver.hessian_form = HessianForm::kFull;
      } else {
        throw ConfigError("config.solver: hessian_form must be 'gauss-newton' or 'full'");
      }
    }
    sr.finish();
  }
  r.get("seed", cfg.seed);
  r.get("threads", cfg.threads);
  r.finish();

  const std::set<std::string, std::less<>> models{"example1", "example1-no-nuisance", "pk",
                                                  "synthetic-disc"};
  require(models.count(cfg.model.name) > 0, "unknown model '" + cfg.model.name + "'");
  try {
    parse_estimator_kind(cfg.estimator);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  require(cfg.tol > 0.0 && std::isfinite(cfg.tol), "tol must be positive");
  require(cfg.alpha > 0.0 && cfg.alpha < 1.0, "alpha must lie in (0, 1)");
  require(cfg.pilot.n_outer >= 2 && cfg.pilot.m_inner >= 2, "pilot sizes must be at least 2");
  require(cfg.pilot.proposal.empty() || cfg.pilot.proposal == "prior" ||
              cfg.pilot.proposal == "laplace",
          "pilot.proposal must be 'prior' or 'laplace'");
  require(cfg.pilot.bias_reference_n >= 0, "pilot.bias_reference_n must be non-negative");
  require(cfg.budget.n_outer >= 1 && cfg.budget.m1 >= 1 && cfg.budget.m2 >= 1,
          "budget sizes must be at least 1");
  require(cfg.optimizer.minibatch_n >= 1, "optimizer.minibatch_n must be at least 1");
  require(cfg.optimizer.max_sweeps >= 0, "optimizer.max_sweeps must be non-negative");
  require(cfg.optimizer.fd_step > 0.0, "optimizer.fd_step must be positive");
  require(cfg.consistency.runs >= 0, "consistency.runs must be non-negative");
  for (double t : cfg.consistency.tols) require(t > 0.0, "consistency.tols must be positive");
  require(cfg.solver.grad_tol > 0.0, "solver.grad_tol must be positive");
  require(cfg.solver.max_iters >= 1, "solver.max_iters must be at least 1");
  require(cfg.solver.n_multistarts >= 1, "solver.n_multistarts must be at least 1");
  require(cfg.threads >= 1, "threads must be at least 1");
  require(cfg.model.log_spread > 0.0, "model.log_spread must be positive");
  require(cfg.model.eta > 0.0 && cfg.model.gamma > 0.0, "model.eta and model.gamma must be positive");
  require(cfg.model.h >= 0.0, "model.h must be non-negative");
  return cfg;
}

std::string serialize_run_config(const RunConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["model"] = {{"name", cfg.model.name},   {"dose", cfg.model.dose},
                {"log_spread", cfg.model.log_spread},
                {"spread_is_std_dev", cfg.model.spread_is_std_dev},
                {"b", cfg.model.b},         {"eta", cfg.model.eta},
                {"gamma", cfg.model.gamma}, {"h", cfg.model.h}};
  j["estimator"] = cfg.estimator;
  j["design"] = cfg.design;
  j["grid"] = cfg.grid;
  j["tol"] = cfg.tol;
  j["alpha"] = cfg.alpha;
  j["pilot"] = {{"n_outer", cfg.pilot.n_outer},
                {"m_inner", cfg.pilot.m_inner},
                {"proposal", cfg.pilot.proposal},
                {"bias_reference_n", cfg.pilot.bias_reference_n},
                {"c3_h_grid", cfg.pilot.c3_h_grid},
                {"c3_h_ref", cfg.pilot.c3_h_ref}};
  j["budget"] = {{"n_outer", cfg.budget.n_outer}, {"m1", cfg.budget.m1}, {"m2", cfg.budget.m2}};
  j["optimizer"] = {{"lower", cfg.optimizer.lower},
                    {"upper", cfg.optimizer.upper},
                    {"initial_step", cfg.optimizer.initial_step},
                    {"minibatch_n", cfg.optimizer.minibatch_n},
                    {"minibatch_m1", cfg.optimizer.minibatch_m1},
                    {"minibatch_m2", cfg.optimizer.minibatch_m2},
                    {"max_sweeps", cfg.optimizer.max_sweeps},
                    {"fd_step", cfg.optimizer.fd_step},
                    {"move_tol", cfg.optimizer.move_tol}};
  j["consistency"] = {{"tols", cfg.consistency.tols}, {"runs", cfg.consistency.runs}};
  j["solver"] = {{"grad_tol", cfg.solver.grad_tol},
                 {"max_iters", cfg.solver.max_iters},
                 {"n_multistarts", cfg.solver.n_multistarts},
                 {"profile_tol_factor", cfg.solver.profile_tol_factor},
                 {"hessian_form", hessian_form_name(cfg.solver.hessian_form)}};
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  return j.dump(2) + "\n";
}

PilotConstants parse_pilot_constants(const std::string& json_text) {
  const json j = parse_text(json_text);
  PilotConstants c;
  ObjectReader r(j, "");
  int version = 0;
  require(r.get("schema_version", version) && version == kSchemaVersion,
          "constants file needs schema_version " + std::to_string(kSchemaVersion));
  r.get("estimator", c.estimator);
  double c1 = 0.0, c2 = 0.0, d1 = 0.0, d2 = 0.0;
  require(r.get("C1", c1) && r.get("C2", c2) && r.get("D3", c.d3), "C1, C2 and D3 are required");
  c.set_bias_constants(c1, c2);
  // D1 and D2 are derived; when present they must agree.
  if (r.get("D1", d1)) require(std::abs(d1 - c.d1) <= 1e-12 * std::abs(c.d1), "D1 != 2 C1");
  if (r.get("D2", d2)) require(std::abs(d2 - c.d2) <= 1e-12 * std::abs(c.d2), "D2 != 2 C2");
  double v = 0.0;
  if (r.get("C3", v)) c.c3 = v;
  if (r.get("eta", v)) c.eta = v;
  if (r.get("gamma", v)) c.gamma = v;
  if (r.get("mc2la_bias", v)) c.mc2la_bias = v;
  if (const json* p = r.child("provenance")) {
    ObjectReader pr(*p, "provenance");
    pr.get("seed", c.seed);
    pr.get("n_outer_pilot", c.n_outer_pilot);
    pr.get("m_inner_pilot", c.m_inner_pilot);
    pr.get("skipped", c.skipped);
    pr.finish();
  }
  r.finish();
  for (double x : {c.c1, c.c2, c.d3}) {
    require(std::isfinite(x) && x >= 0.0, "constants must be finite and non-negative");
  }
  return c;
}

std::string serialize_pilot_constants(const PilotConstants& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["estimator"] = c.estimator;
  j["C1"] = c.c1;
  j["C2"] = c.c2;
  j["D1"] = c.d1;
  j["D2"] = c.d2;
  j["D3"] = c.d3;
  if (c.c3) j["C3"] = *c.c3;
  if (c.eta) j["eta"] = *c.eta;
  if (c.gamma) j["gamma"] = *c.gamma;
  if (c.mc2la_bias) j["mc2la_bias"] = *c.mc2la_bias;
  j["provenance"] = {{"seed", c.seed},
                     {"n_outer_pilot", c.n_outer_pilot},
                     {"m_inner_pilot", c.m_inner_pilot},
                     {"skipped", c.skipped}};
  return j.dump(2) + "\n";
}

std::string serialize_allocation(const Allocation& a) {
  json j;
  j["kappa"] = a.kappa;
  j["n_outer"] = a.n_outer;
  j["m1_inner"] = a.m1_inner;
  j["m2_inner"] = a.m2_inner;
  if (a.h_mesh) j["h_mesh"] = *a.h_mesh;
  j["predicted_work"] = a.predicted_work;
  j["c_alpha"] = a.c_alpha;
  j["n_real"] = a.n_real;
  j["m1_real"] = a.m1_real;
  j["m2_real"] = a.m2_real;
  return j.dump(2) + "\n";
}

ModelBundle build_model(const ModelConfig& cfg) {
  if (cfg.name == "example1") return make_example1();
  if (cfg.name == "example1-no-nuisance") return make_example1_no_nuisance();
  if (cfg.name == "pk") {
    PkOptions o;
    o.dose = cfg.dose;
    o.log_spread = cfg.log_spread;
    o.spread_is_std_dev = cfg.spread_is_std_dev;
    return make_pk(o);
  }
  if (cfg.name == "synthetic-disc") {
    DiscretizedFamily fam = make_synthetic_discretized(cfg.b, cfg.eta, cfg.gamma);
    return {fam.at_mesh(cfg.h), fam.prior, fam.design};
  }
  throw ConfigError("unknown model '" + cfg.name + "'");
}

Vec resolve_design(const RunConfig& cfg, const ModelBundle& bundle) {
  if (cfg.design.empty()) return bundle.default_design;
  const Vec xi = Eigen::Map<const Vec>(cfg.design.data(), static_cast<Index>(cfg.design.size()));
  if (xi.size() != bundle.model.dims().d_xi) {
    throw ConfigError("config: design has " + std::to_string(xi.size()) + " entries, model needs " +
                      std::to_string(bundle.model.dims().d_xi));
  }
  return xi;
}

}  // namespace nested_eig
