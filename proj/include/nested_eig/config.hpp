#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nested_eig/allocation.hpp"
#include "nested_eig/builtin_models.hpp"
#include "nested_eig/design.hpp"
#include "nested_eig/estimators.hpp"

namespace nested_eig {

inline constexpr int kSchemaVersion = 1;

struct ModelConfig {
  std::string name = "example1";
  // pk
  double dose = 400.0;
  double log_spread = 0.05;
  bool spread_is_std_dev = false;
  // synthetic-disc
  double b = 1.0;
  double eta = 2.0;
  double gamma = 1.0;
  double h = 0.1;
};

struct PilotConfig {
  Index n_outer = 1000;
  Index m_inner = 200;
  // "prior" or "laplace"; empty picks prior for dlmc and laplace for dlmc2is.
  std::string proposal;
  // MC2LA: also measure its bias against a DLMC2IS run of this many outer
  // samples (0 = skip).
  Index bias_reference_n = 0;
  // synthetic-disc: mesh grid for the C3 pilot (empty = skip).
  std::vector<double> c3_h_grid;
  double c3_h_ref = 0.0;
};

struct BudgetConfig {
  Index n_outer = 1000;
  Index m1 = 1;
  Index m2 = 1;
};

struct OptimizerConfig {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> initial_step;
  Index minibatch_n = 300;
  Index minibatch_m1 = 1;
  Index minibatch_m2 = 1;
  int max_sweeps = 10;
  double fd_step = 1e-2;
  double move_tol = 1e-8;
};

struct ConsistencyConfig {
  std::vector<double> tols{0.5, 0.25, 0.1};
  Index runs = 100;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  ModelConfig model;
  std::string estimator = "dlmc2is";
  std::vector<double> design;
  std::vector<std::vector<double>> grid;
  double tol = 0.1;
  double alpha = 0.05;
  PilotConfig pilot;
  BudgetConfig budget;
  OptimizerConfig optimizer;
  ConsistencyConfig consistency;
  SolverConfig solver;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Throws ConfigError on malformed text, unknown fields, wrong types or
// invalid values.
RunConfig parse_run_config(const std::string& json_text);
std::string serialize_run_config(const RunConfig& cfg);

PilotConstants parse_pilot_constants(const std::string& json_text);
std::string serialize_pilot_constants(const PilotConstants& c);

std::string serialize_allocation(const Allocation& a);

// Instantiates the named model. For "synthetic-disc" the model is evaluated
// at the configured mesh size.
ModelBundle build_model(const ModelConfig& cfg);

// Design from the config, or the model default when none is given.
Vec resolve_design(const RunConfig& cfg, const ModelBundle& bundle);

}  // namespace nested_eig
