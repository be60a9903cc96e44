#pragma once

#include <functional>
#include <optional>

#include "nested_eig/random.hpp"
#include "nested_eig/types.hpp"

namespace nested_eig {

struct ModelDims {
  Index d_y = 0;
  Index d_theta = 0;
  Index d_phi = 0;
  Index d_xi = 0;
};

// Descriptors of an approximate forward model g_h: bias ~ C3 h^eta and cost
// per evaluation ~ h^-gamma.
struct Discretization {
  double gamma = 1.0;
  double eta = 1.0;
  double h = 1.0;
};

using ForwardMap = std::function<Vec(const Vec& xi, const Vec& theta, const Vec& phi)>;
using JacobianMap = std::function<Mat(const Vec& xi, const Vec& theta, const Vec& phi)>;

// y_i = g(xi, theta, phi) + eps_i, eps_i ~ N(0, noise_cov), i = 1..n_e.
// Immutable after construction apart from the with_* setters used while
// building; safe to share across threads once built.
class ExperimentModel {
 public:
  ExperimentModel(ModelDims dims, Mat noise_cov, int n_e, ForwardMap forward);

  ExperimentModel& with_jac_theta(JacobianMap j);
  ExperimentModel& with_jac_phi(JacobianMap j);
  ExperimentModel& with_discretization(Discretization d);

  const ModelDims& dims() const { return dims_; }
  int n_e() const { return n_e_; }
  const Mat& noise_cov() const { return noise_cov_; }
  const Mat& noise_lower() const { return noise_lower_; }
  // log det(2 pi Sigma_eps)
  double log_det_2pi_noise() const { return log_det_2pi_noise_; }
  const std::optional<Discretization>& discretization() const { return disc_; }

  // Throws ForwardMapError on a non-finite output.
  Vec forward(const Vec& xi, const Vec& theta, const Vec& phi) const;

  bool has_jac_theta() const { return static_cast<bool>(jac_theta_); }
  bool has_jac_phi() const { return static_cast<bool>(jac_phi_); }

  // Analytic when supplied, central differences otherwise.
  Mat jac_theta(const Vec& xi, const Vec& theta, const Vec& phi) const;
  Mat jac_phi(const Vec& xi, const Vec& theta, const Vec& phi) const;
  Mat jac_z(const Vec& xi, const Vec& theta, const Vec& phi) const;

  // L^{-1} r with Sigma_eps = L L^T.
  Vec whiten(const Vec& r) const;
  Mat whiten(const Mat& r) const;

  // Abstract cost of one forward evaluation: h^-gamma, or 1 without a
  // discretization.
  double work_per_evaluation() const;

 private:
  ModelDims dims_;
  Mat noise_cov_;
  Mat noise_lower_;
  double log_det_2pi_noise_ = 0.0;
  int n_e_ = 1;
  ForwardMap forward_;
  JacobianMap jac_theta_;
  JacobianMap jac_phi_;
  std::optional<Discretization> disc_;
};

struct Dataset {
  Mat y;       // d_y x n_e
  Vec design;  // xi
};

Dataset sample_data(const ExperimentModel& model, const Vec& xi, const Vec& theta,
                    const Vec& phi, RandomStream& rng);

// -(n_e/2) log det(2 pi Sigma_eps) - 1/2 sum_i r_i^T Sigma_eps^{-1} r_i
double log_likelihood(const ExperimentModel& model, const Dataset& data, const Vec& theta,
                      const Vec& phi);
// Same, for a precomputed model output g.
double log_likelihood_at(const ExperimentModel& model, const Dataset& data, const Vec& g);

// sum_i r_i^T Sigma_eps^{-1} r_i for a precomputed model output g.
double residual_norm_sq(const ExperimentModel& model, const Dataset& data, const Vec& g);

Vec residual(const ExperimentModel& model, const Vec& y, const Vec& xi, const Vec& theta,
             const Vec& phi);

Mat jac_theta_fd(const ExperimentModel& model, const Vec& xi, const Vec& theta, const Vec& phi);
Mat jac_phi_fd(const ExperimentModel& model, const Vec& xi, const Vec& theta, const Vec& phi);
Mat jac_z_fd(const ExperimentModel& model, const Vec& xi, const Vec& theta, const Vec& phi);

}  // namespace nested_eig
