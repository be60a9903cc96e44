#include "nested_eig/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nested_eig/allocation.hpp"
#include "nested_eig/builtin_models.hpp"
#include "nested_eig/config.hpp"
#include "nested_eig/csv.hpp"
#include "nested_eig/design.hpp"
#include "nested_eig/errors.hpp"
#include "nested_eig/estimators.hpp"

namespace nested_eig {
namespace {

class NoOracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config_path;
  std::string constants_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> tol;
  std::optional<double> alpha;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
}

int threads_from_env() {
  const char* env = std::getenv("NESTED_EIG_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("NESTED_EIG_THREADS must be a positive integer");
  return static_cast<int>(v);
}

RunConfig load_config(const Flags& f) {
  if (f.config_path.empty()) throw ConfigError("--config is required");
  RunConfig cfg = parse_run_config(read_file(f.config_path));
  if (f.seed) cfg.seed = *f.seed;
  if (f.tol) cfg.tol = *f.tol;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (f.threads) {
    cfg.threads = *f.threads;
  } else if (const int env = threads_from_env(); env > 0) {
    cfg.threads = env;
  }
  if (cfg.threads < 1) throw ConfigError("--threads must be at least 1");
  if (!(cfg.tol > 0.0)) throw ConfigError("--tol must be positive");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("--alpha must lie in (0, 1)");
  return cfg;
}

PilotOptions pilot_options(const RunConfig& cfg) {
  // The pilot draws from its own substreams so it never reuses the samples
  // of the production run.
  return {derive_seed(cfg.seed, "pilot", 0), cfg.threads, cfg.solver};
}

RunOptions run_options(const RunConfig& cfg, std::uint64_t seed) {
  return {seed, cfg.threads, cfg.solver};
}

PilotConstants run_pilot(const RunConfig& cfg, const ModelBundle& bundle, const Vec& xi) {
  const EstimatorKind kind = parse_estimator_kind(cfg.estimator);
  const PilotOptions po = pilot_options(cfg);
  PilotConstants c;
  if (kind == EstimatorKind::kMc2la) {
    const Mc2laPilot p = estimate_variance_pilot_mc2la(bundle.model, bundle.prior, xi,
                                                       cfg.pilot.n_outer, po);
    c.estimator = "mc2la";
    c.d3 = p.variance;
    c.n_outer_pilot = cfg.pilot.n_outer;
    c.seed = po.seed;
    c.skipped = cfg.pilot.n_outer - p.used;
    if (cfg.pilot.bias_reference_n > 0) {
      const EigResult ref =
          dlmc2is(bundle.model, bundle.prior, xi, cfg.pilot.bias_reference_n, 1, 1,
                  run_options(cfg, derive_seed(cfg.seed, "pilot-bias", 0)));
      c.mc2la_bias = p.mean - ref.estimate;
    }
  } else {
    ProposalKind proposal =
        kind == EstimatorKind::kDlmc ? ProposalKind::kPrior : ProposalKind::kLaplace;
    if (cfg.pilot.proposal == "prior") proposal = ProposalKind::kPrior;
    if (cfg.pilot.proposal == "laplace") proposal = ProposalKind::kLaplace;
    c = estimate_constants_pilot(bundle.model, bundle.prior, xi, cfg.pilot.n_outer,
                                 cfg.pilot.m_inner, cfg.pilot.m_inner, proposal, po);
    c.estimator = std::string(to_string(kind));
  }
  if (cfg.model.name == "synthetic-disc" && !cfg.pilot.c3_h_grid.empty()) {
    const DiscretizedFamily fam =
        make_synthetic_discretized(cfg.model.b, cfg.model.eta, cfg.model.gamma);
    const C3Estimate e = estimate_c3_pilot(fam.at_mesh, fam.prior, xi, cfg.pilot.c3_h_grid,
                                           cfg.pilot.c3_h_ref, cfg.pilot.n_outer, po);
    if (e.non_monotone) std::cerr << "warning: C3 pilot bias sequence is not monotone in h\n";
    if (e.below_noise_floor) {
      std::cerr << "warning: discretization bias is below the pilot noise floor; C3 not set\n";
    } else {
      c.c3 = e.c3;
      c.eta = e.eta;
      c.gamma = cfg.model.gamma;
    }
  }
  return c;
}

PilotConstants constants_for(const Flags& f, const RunConfig& cfg, const ModelBundle& bundle,
                             const Vec& xi) {
  if (!f.constants_path.empty()) return parse_pilot_constants(read_file(f.constants_path));
  return run_pilot(cfg, bundle, xi);
}

Allocation allocate_for(const PilotConstants& c, double tol, double alpha) {
  if (c.estimator == "mc2la") return allocate_mc2la(c, tol, alpha);
  if (c.c3) return allocate_with_discretization(c, tol, alpha);
  return allocate(c, tol, alpha);
}

std::vector<std::string> xi_header(Index d) {
  std::vector<std::string> h;
  for (Index j = 1; j <= d; ++j) h.push_back("xi_" + std::to_string(j));
  return h;
}

void append_design(std::vector<std::string>& row, const Vec& xi) {
  for (Index j = 0; j < xi.size(); ++j) row.push_back(format_number(xi[j]));
}

std::string count(Index n) { return std::to_string(n); }

int cmd_pilot(const Flags& f) {
  const RunConfig cfg = load_config(f);
  const ModelBundle bundle = build_model(cfg.model);
  const Vec xi = resolve_design(cfg, bundle);
  write_text(f.out_path, serialize_pilot_constants(run_pilot(cfg, bundle, xi)));
  return kExitOk;
}

int cmd_allocate(const Flags& f) {
  if (f.constants_path.empty()) throw ConfigError("--constants is required");
  const PilotConstants c = parse_pilot_constants(read_file(f.constants_path));
  double tol = 0.1, alpha = 0.05;
  if (!f.config_path.empty()) {
    const RunConfig cfg = load_config(f);
    tol = cfg.tol;
    alpha = cfg.alpha;
  }
  if (f.tol) tol = *f.tol;
  if (f.alpha) alpha = *f.alpha;
  const std::string text = serialize_allocation(allocate_for(c, tol, alpha));
  std::cout << text;
  if (!f.out_path.empty()) write_text(f.out_path, text);
  return kExitOk;
}

ModelBundle model_at_mesh(const RunConfig& cfg, const ModelBundle& bundle,
                          const Allocation& alloc) {
  if (cfg.model.name != "synthetic-disc" || !alloc.h_mesh) return bundle;
  ModelConfig mc = cfg.model;
  mc.h = *alloc.h_mesh;
  return build_model(mc);
}

int cmd_estimate(const Flags& f) {
  const RunConfig cfg = load_config(f);
  const ModelBundle bundle = build_model(cfg.model);
  const Vec xi = resolve_design(cfg, bundle);
  const EstimatorKind kind = parse_estimator_kind(cfg.estimator);
  const PilotConstants c = constants_for(f, cfg, bundle, xi);
  const Allocation alloc = allocate_for(c, cfg.tol, cfg.alpha);
  const ModelBundle run_bundle = model_at_mesh(cfg, bundle, alloc);
  const EigResult r =
      run_estimator(kind, run_bundle.model, run_bundle.prior, xi, alloc.n_outer,
                    alloc.m1_inner, alloc.m2_inner, run_options(cfg, cfg.seed));

  std::vector<std::string> header{"estimator"};
  for (auto& h : xi_header(xi.size())) header.push_back(h);
  for (const char* h : {"tol", "estimate", "n", "m1", "m2", "work", "seed"}) header.push_back(h);
  std::vector<std::string> row{std::string(to_string(kind))};
  append_design(row, xi);
  row.push_back(format_number(cfg.tol));
  row.push_back(format_number(r.estimate));
  row.push_back(count(r.n_outer));
  row.push_back(count(r.m1_inner));
  row.push_back(count(r.m2_inner));
  row.push_back(format_number(r.work_units));
  row.push_back(std::to_string(cfg.seed));
  write_csv(f.out_path, header, {row}, /*append=*/true);
  if (r.degenerate_flag) {
    std::cerr << "warning: " << r.degenerate_inner_count + r.failed_fit_count
              << " outer samples were skipped\n";
  }
  return kExitOk;
}

int cmd_sweep(const Flags& f) {
  const RunConfig cfg = load_config(f);
  const ModelBundle bundle = build_model(cfg.model);
  if (cfg.grid.empty()) throw ConfigError("config: sweep needs a non-empty grid");
  std::vector<Vec> grid;
  for (const auto& g : cfg.grid) {
    RunConfig one = cfg;
    one.design = g;
    grid.push_back(resolve_design(one, bundle));
  }
  const EstimatorKind kind = parse_estimator_kind(cfg.estimator);
  const auto rows = sweep_design(bundle.model, bundle.prior, grid, kind, cfg.budget.n_outer,
                                 cfg.budget.m1, cfg.budget.m2, run_options(cfg, cfg.seed));
  std::vector<std::string> header = xi_header(bundle.model.dims().d_xi);
  for (const char* h : {"eig", "stderr", "status"}) header.push_back(h);
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) {
    std::vector<std::string> row;
    append_design(row, r.design);
    row.push_back(format_number(r.eig));
    row.push_back(format_number(r.std_error));
    row.push_back(r.status);
    out.push_back(std::move(row));
  }
  write_csv(f.out_path, header, out);
  return kExitOk;
}

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
}

int cmd_optimize(const Flags& f) {
  const RunConfig cfg = load_config(f);
  const ModelBundle bundle = build_model(cfg.model);
  const Vec xi0 = resolve_design(cfg, bundle);
  const Index d = xi0.size();
  const auto& oc = cfg.optimizer;
  if (static_cast<Index>(oc.lower.size()) != d || static_cast<Index>(oc.upper.size()) != d) {
    throw ConfigError("config.optimizer: lower and upper need one entry per design coordinate");
  }
  DesignProblem p;
  p.lower = to_vec(oc.lower);
  p.upper = to_vec(oc.upper);
  p.initial_design = xi0;
  if (!oc.initial_step.empty()) {
    if (static_cast<Index>(oc.initial_step.size()) != d) {
      throw ConfigError("config.optimizer: initial_step needs one entry per design coordinate");
    }
    p.initial_step = to_vec(oc.initial_step);
  }
  p.minibatch_n = oc.minibatch_n;
  p.minibatch_m1 = oc.minibatch_m1;
  p.minibatch_m2 = oc.minibatch_m2;
  p.max_sweeps = oc.max_sweeps;
  p.fd_step_design = oc.fd_step;
  p.move_tol = oc.move_tol;
  if ((p.upper.array() <= p.lower.array()).any() || (xi0.array() < p.lower.array()).any() ||
      (xi0.array() > p.upper.array()).any()) {
    throw ConfigError("config.optimizer: need lower < upper with the design inside the bounds");
  }

  const DesignResult res = optimize_design(p, bundle.model, bundle.prior,
                                           parse_estimator_kind(cfg.estimator),
                                           run_options(cfg, cfg.seed));
  std::vector<std::string> header{"sweep", "coordinate"};
  for (auto& h : xi_header(d)) header.push_back(h);
  header.push_back("eig");
  header.push_back("stderr");
  std::vector<std::vector<std::string>> out;
  for (const auto& t : res.trace) {
    std::vector<std::string> row{std::to_string(t.sweep), std::to_string(t.coordinate + 1)};
    append_design(row, t.design);
    row.push_back(format_number(t.eig));
    row.push_back(format_number(t.std_error));
    out.push_back(std::move(row));
  }
  write_csv(f.out_path, header, out);
  return kExitOk;
}

int cmd_consistency(const Flags& f) {
  const RunConfig cfg = load_config(f);
  if (cfg.model.name != "example1" && cfg.model.name != "example1-no-nuisance") {
    throw NoOracleError("model '" + cfg.model.name + "' has no analytic EIG oracle");
  }
  const std::vector<std::string> header{"tol",   "runs", "exceedances", "expected",
                                        "kappa", "n",    "m1",          "m2"};
  const Index runs = cfg.consistency.runs;
  if (runs == 0) {
    write_csv(f.out_path, header, {});
    return kExitOk;
  }
  const ModelBundle bundle = build_model(cfg.model);
  const Vec xi = resolve_design(cfg, bundle);
  const double oracle =
      analytic_eig_linear_gaussian(example1_spec(xi[0]), EigTarget::kThetaOnly);
  const EstimatorKind kind = parse_estimator_kind(cfg.estimator);
  const PilotConstants c = constants_for(f, cfg, bundle, xi);

  std::vector<std::vector<std::string>> out;
  for (std::size_t t = 0; t < cfg.consistency.tols.size(); ++t) {
    const double tol = cfg.consistency.tols[t];
    const Allocation a = allocate_for(c, tol, cfg.alpha);
    Index exceed = 0;
    for (Index r = 0; r < runs; ++r) {
      const std::uint64_t seed =
          derive_seed(cfg.seed, "consistency", t * static_cast<std::uint64_t>(runs) + r);
      const EigResult e = run_estimator(kind, bundle.model, bundle.prior, xi, a.n_outer,
                                        a.m1_inner, a.m2_inner, run_options(cfg, seed));
      if (std::abs(e.estimate - oracle) > tol) ++exceed;
    }
    out.push_back({format_number(tol), count(runs), count(exceed),
                   format_number(static_cast<double>(runs) * cfg.alpha), format_number(a.kappa),
                   count(a.n_outer), count(a.m1_inner), count(a.m2_inner)});
  }
  write_csv(f.out_path, header, out);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Expected information gain estimation with nuisance parameters", "nested-eig"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config_path, "JSON run configuration");
  app.add_option("--constants", f.constants_path, "pilot constants file (JSON)");
  app.add_option("--out", f.out_path, "output path (stdout when omitted)");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--threads", f.threads, "worker threads (fallback: NESTED_EIG_THREADS)");
  app.add_option("--tol", f.tol, "error tolerance");
  app.add_option("--alpha", f.alpha, "confidence level parameter");

  int (*handler)(const Flags&) = nullptr;
  auto add = [&](const char* name, const char* help, int (*fn)(const Flags&)) {
    app.add_subcommand(name, help)->callback([&handler, fn] { handler = fn; });
  };
  add("pilot", "estimate bias and variance constants", cmd_pilot);
  add("allocate", "optimal sample sizes for a tolerance", cmd_allocate);
  add("estimate", "run an estimator to a tolerance", cmd_estimate);
  add("sweep", "evaluate the EIG over a design grid", cmd_sweep);
  add("optimize", "coordinate stochastic-gradient design search", cmd_optimize);
  add("consistency", "error-vs-tolerance check against the analytic EIG", cmd_consistency);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    return handler(f);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const AllocationError& e) {
    std::cerr << "allocation infeasible: " << e.what() << '\n';
    return kExitAllocation;
  } catch (const NoOracleError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNoOracle;
  } catch (const ForwardMapError& e) {
    std::cerr << "estimation failed: " << e.what() << '\n';
    return kExitEstimation;
  } catch (const std::exception& e) {
    std::cerr << "estimation failed: " << e.what() << '\n';
    return kExitEstimation;
  }
}

}  // namespace nested_eig
