#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nested_eig/allocation.hpp"
#include "nested_eig/distributions.hpp"
#include "nested_eig/inner_loops.hpp"
#include "nested_eig/laplace.hpp"
#include "nested_eig/model.hpp"

namespace nested_eig {

enum class EstimatorKind { kDlmc, kDlmc2is, kMc2la };

std::string_view to_string(EstimatorKind kind);
// Throws std::invalid_argument for unknown names.
EstimatorKind parse_estimator_kind(std::string_view name);

struct RunOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  SolverConfig solver;
};

struct EigResult {
  double estimate = 0.0;
  Index n_outer = 0;
  Index m1_inner = 0;
  Index m2_inner = 0;
  double sample_variance_outer = 0.0;
  double work_units = 0.0;
  Index degenerate_inner_count = 0;
  Index failed_fit_count = 0;  // outer samples dropped after the fit retry
  Index fit_retry_count = 0;
  bool degenerate_flag = false;  // more than 1% of outer samples skipped
  // Per-outer-sample terms in index order; NaN where skipped.
  std::vector<double> outer_terms;

  double standard_error() const;
};

// Double-loop Monte Carlo with prior sampling in both inner loops.
EigResult dlmc(const ExperimentModel& model, const PriorSpec& prior, const Vec& xi, Index n,
               Index m1, Index m2, const RunOptions& opts);

// Double-loop Monte Carlo with Laplace importance sampling in both inner
// loops. `proposal` = kPrior turns it into dlmc.
EigResult dlmc2is(const ExperimentModel& model, const PriorSpec& prior, const Vec& xi, Index n,
                  Index m1, Index m2, const RunOptions& opts,
                  ProposalKind proposal = ProposalKind::kLaplace);

// Monte Carlo with the double Laplace approximation.
EigResult mc2la(const ExperimentModel& model, const PriorSpec& prior, const Vec& xi, Index n,
                const RunOptions& opts);

// The MC2LA summand for one outer sample given its theta fit.
double mc2la_term(const PriorSpec& prior, const LaplaceFit& theta_fit);

EigResult run_estimator(EstimatorKind kind, const ExperimentModel& model,
                        const PriorSpec& prior, const Vec& xi, Index n, Index m1, Index m2,
                        const RunOptions& opts);

struct ToleranceRun {
  EigResult result;
  Allocation allocation;
};

// Allocates (N, M1, M2) from the pilot constants and runs the estimator.
// Uses the discretization-aware allocation when the constants carry C3.
ToleranceRun run_to_tolerance(EstimatorKind kind, const ExperimentModel& model,
                              const PriorSpec& prior, const Vec& xi, double tol, double alpha,
                              const PilotConstants& pilot, const RunOptions& opts);

}  // namespace nested_eig
