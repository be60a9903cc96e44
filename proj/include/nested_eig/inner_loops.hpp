#pragma once

#include <cstdint>
#include <vector>

#include "nested_eig/distributions.hpp"
#include "nested_eig/laplace.hpp"
#include "nested_eig/model.hpp"

namespace nested_eig {

// Inner-loop sampling measure: the prior (plain DLMC) or the two Laplace
// fits pi~(phi | Y, theta) and pi~(theta, phi | Y).
enum class ProposalKind { kPrior, kLaplace };

// One outer sample: parameters drawn from the prior and data generated from
// them, on the substream ("outer", index) of the master seed.
struct OuterDraw {
  Vec theta;
  Vec phi;
  Dataset data;
};

OuterDraw draw_outer(const ExperimentModel& model, const PriorSpec& prior, const Vec& xi,
                     std::uint64_t master_seed, std::uint64_t index);

// Log importance weights of both inner loops for one outer sample.
//   inner 1: phi_j ~ q1,  w = log p(Y|theta, phi_j) + log pi(phi_j|theta) - log q1(phi_j)
//   inner 2: z_k ~ q2,    w = log p(Y|z_k) + log pi(z_k) - log q2(z_k)
// Draws outside the prior support get weight -inf. With the prior as proposal
// the prior terms cancel and only the log-likelihood remains.
struct InnerWeights {
  std::vector<double> log_w1;
  std::vector<double> log_w2;
  int failed_fits = 0;  // Laplace solves that needed the retry stream
  bool fit_failed = false;  // both attempts failed; weights are empty
};

InnerWeights inner_log_weights(const ExperimentModel& model, const PriorSpec& prior,
                               const OuterDraw& outer, Index m1, Index m2, ProposalKind kind,
                               const SolverConfig& solver, std::uint64_t master_seed,
                               std::uint64_t index);

}  // namespace nested_eig
