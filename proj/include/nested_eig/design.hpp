#pragma once

#include <string>
#include <vector>

#include "nested_eig/estimators.hpp"

namespace nested_eig {

struct DesignProblem {
  Vec lower;
  Vec upper;
  Vec initial_design;
  Index minibatch_n = 300;
  // Inner sizes for the double-loop estimators; ignored by MC2LA.
  Index minibatch_m1 = 1;
  Index minibatch_m2 = 1;
  // Visit order per sweep; 0..d-1 when empty.
  std::vector<Index> coordinate_order;
  // Per-coordinate initial step; 0.05 (upper - lower) when empty. Sweep s
  // uses initial_step / sqrt(s).
  Vec initial_step;
  int max_sweeps = 10;
  double fd_step_design = 1e-2;
  // A sweep that moves no coordinate by more than this ends the run.
  double move_tol = 1e-8;
};

struct TraceRow {
  int sweep = 0;
  Index coordinate = -1;  // -1 for the starting point
  Vec design;
  double eig = 0.0;
  double std_error = 0.0;
};

struct DesignResult {
  Vec design;
  std::vector<TraceRow> trace;
  // Minibatch EIG at the start and end, evaluated on a shared seed.
  double initial_eig = 0.0;
  double final_eig = 0.0;
};

// Greedy minibatch coordinate ascent. For each coordinate, a central
// difference with common random numbers gives the ascent direction; a step
// of the current length is accepted only if the minibatch EIG on the same
// seed does not decrease, otherwise the step is halved once and then skipped.
DesignResult optimize_design(const DesignProblem& problem, const ExperimentModel& model,
                             const PriorSpec& prior, EstimatorKind kind,
                             const RunOptions& opts);

struct PartialDerivative {
  double value = 0.0;
  double std_error = 0.0;
};

// d EIG / d xi_j by central differences of the estimator with identical
// substreams at xi_j +- delta; the standard error comes from the paired
// outer-term differences.
PartialDerivative crn_partial(EstimatorKind kind, const ExperimentModel& model,
                              const PriorSpec& prior, const Vec& xi, Index j, double delta,
                              Index n, Index m1, Index m2, const RunOptions& opts,
                              const Vec* lower = nullptr, const Vec* upper = nullptr);

struct SweepRow {
  Vec design;
  double eig = 0.0;
  double std_error = 0.0;
  std::string status = "ok";
};

// Every grid point uses the same seed so neighboring estimates share their
// outer samples.
std::vector<SweepRow> sweep_design(const ExperimentModel& model, const PriorSpec& prior,
                                   const std::vector<Vec>& grid, EstimatorKind kind, Index n,
                                   Index m1, Index m2, const RunOptions& opts);

}  // namespace nested_eig
