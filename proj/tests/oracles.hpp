// Reference computations used as test oracles. They are written directly
// from the Gaussian identities and share no code with the library.
#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double log_det(const MatrixXd& m) {
  return std::log(m.determinant());
}

// Exact posterior of x ~ N(m0, S0) given y = H x + e, e ~ N(0, R), with
// n_rep repeated observations whose column mean is ybar.
struct GaussianPosterior {
  VectorXd mean;
  MatrixXd precision;
};

inline GaussianPosterior conjugate_posterior(const MatrixXd& h, const MatrixXd& r,
                                             const VectorXd& m0, const MatrixXd& s0,
                                             const VectorXd& ybar, int n_rep = 1) {
  const MatrixXd r_inv = r.inverse();
  const MatrixXd s0_inv = s0.inverse();
  GaussianPosterior p;
  p.precision = s0_inv + n_rep * h.transpose() * r_inv * h;
  p.mean = p.precision.inverse() * (s0_inv * m0 + n_rep * h.transpose() * r_inv * ybar);
  return p;
}

// Log density of N(mean, cov) at x.
inline double normal_log_pdf(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov) {
  const VectorXd d = x - mean;
  const double k = static_cast<double>(x.size());
  return -0.5 * (k * std::log(2.0 * std::numbers::pi) + log_det(cov) +
                 d.dot(cov.inverse() * d));
}

// Mutual information between x ~ N(., S) and y = H x + noise(cov R):
// 1/2 log det(H S H^T + R) - 1/2 log det(R).
inline double gaussian_mutual_information(const MatrixXd& h, const MatrixXd& s,
                                          const MatrixXd& r) {
  return 0.5 * (log_det(h * s * h.transpose() + r) - log_det(r));
}

// Gauss-Hermite nodes and weights for int exp(-x^2) f(x) dx (Golub-Welsch).
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
  MatrixXd j = MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    j(i, i - 1) = j(i - 1, i) = std::sqrt(i / 2.0);
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(j);
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    x[i] = es.eigenvalues()[i];
    const double v = es.eigenvectors()(0, i);
    w[i] = std::sqrt(std::numbers::pi) * v * v;
  }
  return {x, w};
}

// 1/2 ln(1 + 100 xi^2): theta-only EIG of the linear example with unit
// prior variance and noise variance 1e-2.
inline double example1_eig(double xi) { return 0.5 * std::log(1.0 + 100.0 * xi * xi); }

inline double max_rel_diff(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max(1e-300, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace oracle
