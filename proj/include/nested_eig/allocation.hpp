#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nested_eig/distributions.hpp"
#include "nested_eig/inner_loops.hpp"
#include "nested_eig/laplace.hpp"
#include "nested_eig/model.hpp"

namespace nested_eig {

// Bias and variance constants of the double-loop error model
//   bias     ~ C1/M1 + C2/M2 (+ C3 h^eta)
//   variance ~ D3/N + D1/(N M1) + D2/(N M2)
// For MC2LA only D3 (the outer variance of the summand) and an optional
// measured bias are used.
struct PilotConstants {
  std::string estimator = "dlmc2is";
  double c1 = 0.0;
  double c2 = 0.0;
  double d1 = 0.0;  // always 2 c1
  double d2 = 0.0;  // always 2 c2
  double d3 = 0.0;
  std::optional<double> c3;
  std::optional<double> eta;
  std::optional<double> gamma;
  std::optional<double> mc2la_bias;
  Index n_outer_pilot = 0;
  Index m_inner_pilot = 0;
  Index skipped = 0;
  std::uint64_t seed = 0;

  void set_bias_constants(double c1_value, double c2_value) {
    c1 = c1_value;
    c2 = c2_value;
    d1 = 2.0 * c1;
    d2 = 2.0 * c2;
  }
};

struct Allocation {
  double kappa = 1.0;
  Index n_outer = 1;
  Index m1_inner = 1;
  Index m2_inner = 1;
  std::optional<double> h_mesh;
  double predicted_work = 0.0;
  double c_alpha = 0.0;
  // Real-valued optima before the integer ceiling.
  double n_real = 1.0;
  double m1_real = 1.0;
  double m2_real = 1.0;
};

struct PilotOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  SolverConfig solver;
};

PilotConstants estimate_constants_pilot(const ExperimentModel& model, const PriorSpec& prior,
                                        const Vec& xi, Index n_pilot, Index m1_pilot,
                                        Index m2_pilot, ProposalKind kind,
                                        const PilotOptions& opts);

struct Mc2laPilot {
  double mean = 0.0;
  double variance = 0.0;
  Index used = 0;
};
Mc2laPilot estimate_variance_pilot_mc2la(const ExperimentModel& model, const PriorSpec& prior,
                                         const Vec& xi, Index n_pilot, const PilotOptions& opts);

// C_alpha = Phi^{-1}(1 - alpha/2)
double confidence_constant(double alpha);

Allocation allocate(const PilotConstants& constants, double tol, double alpha);
Allocation allocate_with_discretization(const PilotConstants& constants, double tol,
                                        double alpha);
// MC2LA: kappa = 1 - bias/tol, N = C_alpha^2 D3 / (kappa tol)^2.
Allocation allocate_mc2la(const PilotConstants& constants, double tol, double alpha);

struct AllocationReport {
  double bias_lhs = 0.0;
  double bias_rhs = 0.0;
  double variance_lhs = 0.0;
  double variance_rhs = 0.0;
  bool kappa_valid = false;
  bool bias_ok = false;
  bool variance_ok = false;
  bool valid() const { return kappa_valid && bias_ok && variance_ok; }
};

// Evaluates both constraints at the real-valued optima, with a 1e-9
// relative allowance.
AllocationReport verify_allocation(const PilotConstants& constants, const Allocation& alloc,
                                   double tol);

// Approximate model at mesh h.
using ModelFamily = std::function<ExperimentModel(double h)>;

struct C3Estimate {
  double c3 = 0.0;
  double eta = 0.0;
  bool below_noise_floor = false;
  bool non_monotone = false;
  std::vector<double> h;
  std::vector<double> bias;    // mean of EIG_h - EIG_ref
  std::vector<double> std_error;  // paired standard error of each bias
};

// Fits |EIG_h - EIG_ref| ~ C3 h^eta by least squares in log-log space. EIG
// differences use MC2LA with common random numbers across meshes.
C3Estimate estimate_c3_pilot(const ModelFamily& family, const PriorSpec& prior, const Vec& xi,
                             const std::vector<double>& h_grid, double h_ref, Index n_pilot,
                             const PilotOptions& opts);

}  // namespace nested_eig
