#include "nested_eig/builtin_models.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace nested_eig {
namespace {

constexpr int kPkTimes = 15;

double half_log_det_spd(const Mat& m) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("matrix is not SPD");
  return Mat(llt.matrixL()).diagonal().array().log().sum();
}

// 1/2 log det(I + Sigma_x A^T N^{-1} A)
double gaussian_channel_eig(const Mat& a, const Mat& prior_cov, const Mat& noise) {
  Eigen::LLT<Mat> llt(noise);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("effective noise is singular");
  const Mat w = llt.matrixL().solve(a);  // L^{-1} A
  const Index d = a.cols();
  // I + Sigma^{1/2} A^T N^{-1} A Sigma^{1/2} has the same determinant.
  Eigen::LLT<Mat> pl(prior_cov);
  const Mat s = Mat(pl.matrixL());
  const Mat m = Mat::Identity(d, d) + s.transpose() * (w.transpose() * w) * s;
  return half_log_det_spd(m);
}

}  // namespace

LinearGaussianSpec example1_spec(double xi) {
  LinearGaussianSpec s;
  s.a = Mat::Zero(2, 1);
  s.a(0, 0) = xi;
  s.b = Mat::Zero(2, 1);
  s.b(1, 0) = 1.0 - xi;
  s.theta_mean = Vec::Zero(1);
  s.theta_cov = Mat::Identity(1, 1);
  s.phi_mean = Vec::Zero(1);
  s.phi_cov = 1e-2 * Mat::Identity(1, 1);
  s.noise_cov = 1e-2 * Mat::Identity(2, 2);
  return s;
}

double analytic_eig_linear_gaussian(const LinearGaussianSpec& spec, EigTarget target) {
  const Mat noise = spec.noise_cov / static_cast<double>(spec.n_e);
  if (target == EigTarget::kThetaOnly) {
    Mat eff = noise;
    if (spec.b.cols() > 0) eff += spec.b * spec.phi_cov * spec.b.transpose();
    return gaussian_channel_eig(spec.a, spec.theta_cov, eff);
  }
  const Index dt = spec.a.cols();
  const Index dp = spec.b.cols();
  Mat ab(spec.a.rows(), dt + dp);
  ab << spec.a, spec.b;
  Mat cov = Mat::Zero(dt + dp, dt + dp);
  cov.topLeftCorner(dt, dt) = spec.theta_cov;
  cov.bottomRightCorner(dp, dp) = spec.phi_cov;
  return gaussian_channel_eig(ab, cov, noise);
}

ModelBundle make_linear_gaussian(const LinearGaussianSpec& spec) {
  const ModelDims dims{spec.a.rows(), spec.a.cols(), spec.b.cols(), 0};
  const Mat a = spec.a;
  const Mat b = spec.b;
  ExperimentModel model(dims, spec.noise_cov, spec.n_e,
                        [a, b](const Vec&, const Vec& theta, const Vec& phi) -> Vec {
                          Vec g = a * theta;
                          if (b.cols() > 0) g += b * phi;
                          return g;
                        });
  model.with_jac_theta([a](const Vec&, const Vec&, const Vec&) { return a; })
      .with_jac_phi([b](const Vec&, const Vec&, const Vec&) { return b; });
  PriorSpec prior(Distribution::normal(spec.theta_mean, spec.theta_cov),
                  spec.phi_mean.size() > 0 ? Distribution::normal(spec.phi_mean, spec.phi_cov)
                                           : Distribution::empty());
  return {std::move(model), std::move(prior), Vec(0)};
}

ModelBundle make_example1(double default_xi) {
  const LinearGaussianSpec s = example1_spec(default_xi);
  ExperimentModel model(ModelDims{2, 1, 1, 1}, s.noise_cov, 1,
                        [](const Vec& xi, const Vec& theta, const Vec& phi) {
                          Vec g(2);
                          g << xi[0] * theta[0], (1.0 - xi[0]) * phi[0];
                          return g;
                        });
  model
      .with_jac_theta([](const Vec& xi, const Vec&, const Vec&) {
        Mat j(2, 1);
        j << xi[0], 0.0;
        return j;
      })
      .with_jac_phi([](const Vec& xi, const Vec&, const Vec&) {
        Mat j(2, 1);
        j << 0.0, 1.0 - xi[0];
        return j;
      });
  PriorSpec prior(Distribution::normal(s.theta_mean, s.theta_cov),
                  Distribution::normal(s.phi_mean, s.phi_cov));
  return {std::move(model), std::move(prior), Vec::Constant(1, default_xi)};
}

ModelBundle make_example1_no_nuisance(double default_xi) {
  ExperimentModel model(ModelDims{1, 1, 0, 1}, 1e-2 * Mat::Identity(1, 1), 1,
                        [](const Vec& xi, const Vec& theta, const Vec&) {
                          return Vec::Constant(1, xi[0] * theta[0]);
                        });
  model
      .with_jac_theta([](const Vec& xi, const Vec&, const Vec&) {
        return Mat::Constant(1, 1, xi[0]);
      })
      .with_jac_phi([](const Vec&, const Vec&, const Vec&) { return Mat(1, 0); });
  PriorSpec prior(Distribution::normal(Vec::Zero(1), Mat::Identity(1, 1)), Distribution::empty());
  return {std::move(model), std::move(prior), Vec::Constant(1, default_xi)};
}

Vec pk_geometric_design() {
  Vec t(kPkTimes);
  for (int j = 0; j < kPkTimes; ++j) t[j] = 0.94 * std::pow(1.25, j);
  return t;
}

ModelBundle make_pk(const PkOptions& opts) {
  const double dose = opts.dose;
  ExperimentModel model(
      ModelDims{kPkTimes, 2, 1, kPkTimes}, opts.noise_var * Mat::Identity(kPkTimes, kPkTimes), 1,
      [dose](const Vec& t, const Vec& theta, const Vec& phi) -> Vec {
        const double k1 = theta[0], k2 = theta[1];
        const double scale = dose / phi[0] * k1 / (k1 - k2);
        return scale * ((-k2 * t.array()).exp() - (-k1 * t.array()).exp()).matrix();
      });
  model
      .with_jac_theta([dose](const Vec& t, const Vec& theta, const Vec& phi) -> Mat {
        const double k1 = theta[0], k2 = theta[1];
        const double c = dose / phi[0];
        const double diff = k1 - k2;
        const double r = k1 / diff;
        const Eigen::ArrayXd e1 = (-k1 * t.array()).exp();
        const Eigen::ArrayXd e2 = (-k2 * t.array()).exp();
        Mat j(t.size(), 2);
        j.col(0) = (c * (-k2 / (diff * diff) * (e2 - e1) + r * t.array() * e1)).matrix();
        j.col(1) = (c * (k1 / (diff * diff) * (e2 - e1) - r * t.array() * e2)).matrix();
        return j;
      })
      .with_jac_phi([dose](const Vec& t, const Vec& theta, const Vec& phi) -> Mat {
        const double k1 = theta[0], k2 = theta[1];
        const double g_scale = -dose / (phi[0] * phi[0]) * k1 / (k1 - k2);
        Mat j(t.size(), 1);
        j.col(0) = (g_scale * ((-k2 * t.array()).exp() - (-k1 * t.array()).exp())).matrix();
        return j;
      });

  const double var = opts.spread_is_std_dev ? opts.log_spread * opts.log_spread : opts.log_spread;
  Vec theta_mu(2);
  theta_mu << 0.0, std::log(0.1);
  PriorSpec prior(Distribution::lognormal(theta_mu, Vec::Constant(2, var)),
                  Distribution::lognormal(Vec::Constant(1, std::log(20.0)), Vec::Constant(1, var)));
  return {std::move(model), std::move(prior), pk_geometric_design()};
}

DiscretizedFamily make_synthetic_discretized(double b, double eta, double gamma, double xi) {
  if (!(eta > 0.0) || !(gamma > 0.0)) {
    throw std::invalid_argument("eta and gamma must be positive");
  }
  ModelBundle base = make_example1(xi);
  DiscretizedFamily fam{{}, base.prior, base.default_design, b, eta, gamma};
  fam.at_mesh = [b, eta, gamma](double h) -> ExperimentModel {
    ModelBundle m = make_example1();
    if (h == 0.0) return std::move(m.model);
    if (!(h > 0.0)) throw std::invalid_argument("mesh size must be non-negative");
    const double shift = b * std::pow(h, eta);
    ExperimentModel model(m.model.dims(), m.model.noise_cov(), m.model.n_e(),
                          [shift](const Vec& x, const Vec& theta, const Vec& phi) {
                            Vec g(2);
                            g << x[0] * theta[0] + shift * theta[0], (1.0 - x[0]) * phi[0];
                            return g;
                          });
    model
        .with_jac_theta([shift](const Vec& x, const Vec&, const Vec&) {
          Mat j(2, 1);
          j << x[0] + shift, 0.0;
          return j;
        })
        .with_jac_phi([](const Vec& x, const Vec&, const Vec&) {
          Mat j(2, 1);
          j << 0.0, 1.0 - x[0];
          return j;
        })
        .with_discretization(Discretization{gamma, eta, h});
    return model;
  };
  return fam;
}

}  // namespace nested_eig
