#pragma once

#include "nested_eig/distributions.hpp"
#include "nested_eig/model.hpp"
#include "nested_eig/random.hpp"
#include "nested_eig/types.hpp"

namespace nested_eig {

// Hessian convention for f(theta, phi) in phi. Gauss-Newton drops the
// residual-weighted second derivative of g; Full differentiates the analytic
// gradient numerically.
enum class HessianForm { kGaussNewton, kFull };

struct SolverConfig {
  // Relative gradient tolerance; the absolute threshold is
  // grad_tol * (1 + |objective at the start point|).
  double grad_tol = 1e-8;
  int max_iters = 200;
  int n_multistarts = 3;
  HessianForm hessian_form = HessianForm::kGaussNewton;
  // Inner nuisance solves inside the theta profile run this much tighter than
  // grad_tol so that finite differences of the profile stay clean.
  double profile_tol_factor = 1e-3;
};

// Gaussian fit N(mode, precision^{-1}).
struct LaplaceFit {
  Vec mode;
  Mat precision;
  Mat lower;  // Cholesky factor of precision
  double log_det_precision = 0.0;
  double grad_norm_at_mode = 0.0;
  double tolerance = 0.0;  // absolute gradient threshold the solve met
  int iterations = 0;
  double jitter_added = 0.0;
  double objective = 0.0;  // minimized objective value at the mode
};

// f(theta, phi) = 1/2 sum_i r_i^T Sigma_eps^{-1} r_i - log pi(phi | theta);
// +inf outside the prior support.
double eval_f(const ExperimentModel& model, const PriorSpec& prior, const Dataset& data,
              const Vec& theta, const Vec& phi);
Vec grad_f_phi(const ExperimentModel& model, const PriorSpec& prior, const Dataset& data,
               const Vec& theta, const Vec& phi);
Mat hess_f_phi(const ExperimentModel& model, const PriorSpec& prior, const Dataset& data,
               const Vec& theta, const Vec& phi,
               HessianForm form = HessianForm::kGaussNewton);

// phi_hat(theta) = argmin_phi f(theta, phi) with precision hess_f_phi at the
// mode. A warm start, when given, is tried alone first; the multistart set
// (prior center, then prior draws from `rng`) is the fallback.
LaplaceFit fit_nuisance_map(const ExperimentModel& model, const PriorSpec& prior,
                            const Dataset& data, const Vec& theta, const SolverConfig& cfg,
                            RandomStream& rng, const Vec* warm_start = nullptr);

// The pieces of F(theta) = 1/2 sum r^T S r - h + k - l at one theta.
struct NuisanceProfile {
  LaplaceFit fit;             // over phi
  double residual_sq = 0.0;   // sum_i r_i^T S r_i at (theta, phi_hat)
  double log_prior_theta = 0.0;  // h
  double half_log_det = 0.0;     // k
  double log_prior_phi = 0.0;    // l
  double value() const { return 0.5 * residual_sq - log_prior_theta + half_log_det - log_prior_phi; }
};

NuisanceProfile profile_nuisance(const ExperimentModel& model, const PriorSpec& prior,
                                 const Dataset& data, const Vec& theta, const SolverConfig& cfg,
                                 RandomStream& rng, const Vec* warm_start = nullptr);

// log pi(theta) + log pi(phi_hat|theta) + (d_phi/2) log(2 pi)
//   - 1/2 log det hess_f_phi - 1/2 sum_i r_i^T S r_i, all at phi_hat(theta).
double marginalized_log_posterior_unnorm(const ExperimentModel& model, const PriorSpec& prior,
                                         const Dataset& data, const Vec& theta,
                                         const SolverConfig& cfg, RandomStream& rng);

// theta_hat = argmin F with precision
//   N_e (J_z Dz)^T S (J_z Dz) - hess h + hess k - hess l,  Dz = (I; d phi_hat/d theta).
LaplaceFit fit_theta_map(const ExperimentModel& model, const PriorSpec& prior,
                         const Dataset& data, const SolverConfig& cfg, RandomStream& rng);

// z_hat = argmin 1/2 sum r^T S r - log pi(z) with Gauss-Newton precision.
LaplaceFit fit_joint_map(const ExperimentModel& model, const PriorSpec& prior,
                         const Dataset& data, const SolverConfig& cfg, RandomStream& rng);

// Builds the Gaussian pieces of a fit from a mode and an unrepaired precision.
LaplaceFit make_gaussian_fit(Vec mode, const Mat& precision);

double laplace_log_density(const LaplaceFit& fit, const Vec& x);
Vec sample_laplace(const LaplaceFit& fit, RandomStream& rng);

}  // namespace nested_eig
