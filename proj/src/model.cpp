#include "nested_eig/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include <Eigen/Cholesky>

#include "nested_eig/errors.hpp"
#include "nested_eig/numerics.hpp"

namespace nested_eig {

ExperimentModel::ExperimentModel(ModelDims dims, Mat noise_cov, int n_e, ForwardMap forward)
    : dims_(dims), noise_cov_(std::move(noise_cov)), n_e_(n_e), forward_(std::move(forward)) {
  if (n_e_ < 1) throw std::invalid_argument("repetition count must be positive");
  if (!forward_) throw std::invalid_argument("forward map is empty");
  if (noise_cov_.rows() != dims_.d_y || noise_cov_.cols() != dims_.d_y) {
    throw std::invalid_argument("noise covariance must be d_y x d_y");
  }
  const double scale = std::max(1e-300, noise_cov_.cwiseAbs().maxCoeff());
  if ((noise_cov_ - noise_cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("noise covariance is not symmetric");
  }
  noise_cov_ = 0.5 * (noise_cov_ + noise_cov_.transpose()).eval();
  Eigen::LLT<Mat> llt(noise_cov_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("noise covariance is not positive definite");
  }
  noise_lower_ = llt.matrixL();
  log_det_2pi_noise_ = static_cast<double>(dims_.d_y) * std::log(2.0 * std::numbers::pi) +
                       2.0 * noise_lower_.diagonal().array().log().sum();
}

ExperimentModel& ExperimentModel::with_jac_theta(JacobianMap j) {
  jac_theta_ = std::move(j);
  return *this;
}

ExperimentModel& ExperimentModel::with_jac_phi(JacobianMap j) {
  jac_phi_ = std::move(j);
  return *this;
}

ExperimentModel& ExperimentModel::with_discretization(Discretization d) {
  if (!(d.h > 0.0) || !(d.gamma > 0.0) || !(d.eta > 0.0)) {
    throw std::invalid_argument("discretization parameters must be positive");
  }
  disc_ = d;
  return *this;
}

Vec ExperimentModel::forward(const Vec& xi, const Vec& theta, const Vec& phi) const {
  Vec g = forward_(xi, theta, phi);
  if (g.size() != dims_.d_y || !g.allFinite()) {
    throw ForwardMapError("forward map returned a non-finite or mis-sized output", theta, phi);
  }
  return g;
}

Mat ExperimentModel::jac_theta(const Vec& xi, const Vec& theta, const Vec& phi) const {
  if (jac_theta_) return jac_theta_(xi, theta, phi);
  return jac_theta_fd(*this, xi, theta, phi);
}

Mat ExperimentModel::jac_phi(const Vec& xi, const Vec& theta, const Vec& phi) const {
  if (jac_phi_) return jac_phi_(xi, theta, phi);
  return jac_phi_fd(*this, xi, theta, phi);
}

Mat ExperimentModel::jac_z(const Vec& xi, const Vec& theta, const Vec& phi) const {
  Mat j(dims_.d_y, theta.size() + phi.size());
  j.leftCols(theta.size()) = jac_theta(xi, theta, phi);
  j.rightCols(phi.size()) = jac_phi(xi, theta, phi);
  return j;
}

Vec ExperimentModel::whiten(const Vec& r) const {
  return noise_lower_.triangularView<Eigen::Lower>().solve(r);
}

Mat ExperimentModel::whiten(const Mat& r) const {
  return noise_lower_.triangularView<Eigen::Lower>().solve(r);
}

double ExperimentModel::work_per_evaluation() const {
  if (!disc_) return 1.0;
  return std::pow(disc_->h, -disc_->gamma);
}

Dataset sample_data(const ExperimentModel& model, const Vec& xi, const Vec& theta,
                    const Vec& phi, RandomStream& rng) {
  const Vec g = model.forward(xi, theta, phi);
  Dataset data;
  data.design = xi;
  data.y.resize(g.size(), model.n_e());
  for (int i = 0; i < model.n_e(); ++i) {
    data.y.col(i) = g + model.noise_lower() * rng.normal_vector(g.size());
  }
  return data;
}

double residual_norm_sq(const ExperimentModel& model, const Dataset& data, const Vec& g) {
  const Mat r = data.y.colwise() - g;
  return model.whiten(r).squaredNorm();
}

double log_likelihood_at(const ExperimentModel& model, const Dataset& data, const Vec& g) {
  return -0.5 * static_cast<double>(data.y.cols()) * model.log_det_2pi_noise() -
         0.5 * residual_norm_sq(model, data, g);
}

double log_likelihood(const ExperimentModel& model, const Dataset& data, const Vec& theta,
                      const Vec& phi) {
  return log_likelihood_at(model, data, model.forward(data.design, theta, phi));
}

Vec residual(const ExperimentModel& model, const Vec& y, const Vec& xi, const Vec& theta,
             const Vec& phi) {
  return y - model.forward(xi, theta, phi);
}

Mat jac_theta_fd(const ExperimentModel& model, const Vec& xi, const Vec& theta, const Vec& phi) {
  return fd_jacobian([&](const Vec& t) { return model.forward(xi, t, phi); }, theta);
}

Mat jac_phi_fd(const ExperimentModel& model, const Vec& xi, const Vec& theta, const Vec& phi) {
  if (phi.size() == 0) return Mat(model.dims().d_y, 0);
  return fd_jacobian([&](const Vec& p) { return model.forward(xi, theta, p); }, phi);
}

Mat jac_z_fd(const ExperimentModel& model, const Vec& xi, const Vec& theta, const Vec& phi) {
  const Index dt = theta.size();
  Vec z(dt + phi.size());
  z << theta, phi;
  return fd_jacobian(
      [&](const Vec& zz) { return model.forward(xi, zz.head(dt), zz.tail(zz.size() - dt)); }, z);
}

}  // namespace nested_eig
