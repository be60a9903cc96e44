#include "nested_eig/inner_loops.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <tuple>

#include "nested_eig/errors.hpp"
#include "nested_eig/random.hpp"

namespace nested_eig {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Proposals {
  LaplaceFit nuisance;
  LaplaceFit joint;
};

std::optional<Proposals> fit_proposals(const ExperimentModel& model, const PriorSpec& prior,
                                       const OuterDraw& outer, const SolverConfig& solver,
                                       RandomStream& rng) {
  try {
    Proposals p{fit_nuisance_map(model, prior, outer.data, outer.theta, solver, rng),
                fit_joint_map(model, prior, outer.data, solver, rng)};
    return p;
  } catch (const FitError&) {
    return std::nullopt;
  }
}

}  // namespace

OuterDraw draw_outer(const ExperimentModel& model, const PriorSpec& prior, const Vec& xi,
                     std::uint64_t master_seed, std::uint64_t index) {
  RandomStream rng(master_seed, "outer", index);
  OuterDraw d;
  std::tie(d.theta, d.phi) = sample_prior(prior, rng);
  d.data = sample_data(model, xi, d.theta, d.phi, rng);
  return d;
}

InnerWeights inner_log_weights(const ExperimentModel& model, const PriorSpec& prior,
                               const OuterDraw& outer, Index m1, Index m2, ProposalKind kind,
                               const SolverConfig& solver, std::uint64_t master_seed,
                               std::uint64_t index) {
  InnerWeights out;
  const Dataset& data = outer.data;
  const Vec& theta = outer.theta;
  const Index dt = prior.d_theta();
  const Index dp = prior.d_phi();
  const auto phi_dist = prior.phi_factor(theta);

  std::optional<Proposals> fits;
  if (kind == ProposalKind::kLaplace) {
    RandomStream fit_rng(master_seed, "fit", index);
    fits = fit_proposals(model, prior, outer, solver, fit_rng);
    if (!fits) {
      ++out.failed_fits;
      RandomStream retry_rng(master_seed, "fit-retry", index);
      fits = fit_proposals(model, prior, outer, solver, retry_rng);
      if (!fits) {
        out.fit_failed = true;
        return out;
      }
    }
  }

  RandomStream rng(master_seed, "inner", index);
  out.log_w1.resize(static_cast<std::size_t>(m1));
  for (Index j = 0; j < m1; ++j) {
    double& w = out.log_w1[static_cast<std::size_t>(j)];
    if (kind == ProposalKind::kPrior) {
      const Vec phi = phi_dist->sample(rng);
      w = log_likelihood(model, data, theta, phi);
      continue;
    }
    const Vec phi = sample_laplace(fits->nuisance, rng);
    const double lp = phi_dist->log_density(phi);
    w = std::isfinite(lp) ? log_likelihood(model, data, theta, phi) + lp -
                                laplace_log_density(fits->nuisance, phi)
                          : kNegInf;
  }

  out.log_w2.resize(static_cast<std::size_t>(m2));
  for (Index k = 0; k < m2; ++k) {
    double& w = out.log_w2[static_cast<std::size_t>(k)];
    if (kind == ProposalKind::kPrior) {
      const auto [t, p] = sample_prior(prior, rng);
      w = log_likelihood(model, data, t, p);
      continue;
    }
    const Vec z = sample_laplace(fits->joint, rng);
    const Vec t = z.head(dt);
    const Vec p = z.tail(dp);
    const double lp = log_prior_joint(prior, t, p);
    w = std::isfinite(lp) ? log_likelihood(model, data, t, p) + lp -
                                laplace_log_density(fits->joint, z)
                          : kNegInf;
  }
  return out;
}

}  // namespace nested_eig
