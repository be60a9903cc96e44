#pragma once

#include <functional>
#include <string>

#include "nested_eig/distributions.hpp"
#include "nested_eig/model.hpp"

namespace nested_eig {

// y = A theta + B phi + eps with Gaussian priors on theta and phi.
struct LinearGaussianSpec {
  Mat a;  // d_y x d_theta
  Mat b;  // d_y x d_phi
  Vec theta_mean;
  Mat theta_cov;
  Vec phi_mean;
  Mat phi_cov;
  Mat noise_cov;
  int n_e = 1;
};

// A = (xi, 0)^T, B = (0, 1 - xi)^T, theta ~ N(0, 1), phi ~ N(0, 1e-2),
// Sigma_eps = 1e-2 I.
LinearGaussianSpec example1_spec(double xi);

enum class EigTarget { kThetaOnly, kJoint };

// Closed-form EIG of a linear Gaussian model. kThetaOnly folds phi into the
// effective noise B Sigma_phi B^T + Sigma_eps / N_e.
double analytic_eig_linear_gaussian(const LinearGaussianSpec& spec, EigTarget target);

struct ModelBundle {
  ExperimentModel model;
  PriorSpec prior;
  Vec default_design;
};

// Design-independent model built from a fixed spec.
ModelBundle make_linear_gaussian(const LinearGaussianSpec& spec);

// g(xi, theta, phi) = (xi theta, (1 - xi) phi) with the example1_spec
// priors and noise; the design is the scalar xi.
ModelBundle make_example1(double default_xi = 0.5);

// Example 1 without the nuisance parameter: g(xi, theta) = xi theta, one
// output, empty phi. Same theta-only EIG as make_example1.
ModelBundle make_example1_no_nuisance(double default_xi = 0.5);

struct PkOptions {
  double dose = 400.0;
  // Spread of each log-parameter: a variance by default, a standard
  // deviation when spread_is_std_dev is set.
  double log_spread = 0.05;
  bool spread_is_std_dev = false;
  double noise_var = 1e-2;
};

// Fifteen sampling times; g_j = (D/phi) theta1/(theta1 - theta2)
// (exp(-theta2 t_j) - exp(-theta1 t_j)).
ModelBundle make_pk(const PkOptions& opts = {});

// t_j = 0.94 * 1.25^(j-1), j = 1..15.
Vec pk_geometric_design();

// Example 1 perturbed by b h^eta theta_1 on the first output; h = 0 is the
// unperturbed model.
struct DiscretizedFamily {
  std::function<ExperimentModel(double h)> at_mesh;
  PriorSpec prior;
  Vec design;
  double b = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
};

DiscretizedFamily make_synthetic_discretized(double b, double eta, double gamma,
                                             double xi = 1.0);

}  // namespace nested_eig
