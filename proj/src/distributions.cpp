#include "nested_eig/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "nested_eig/numerics.hpp"

namespace nested_eig {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Distribution Distribution::normal(Vec mean, Mat cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw std::invalid_argument("normal factor: covariance shape does not match mean");
  }
  NormalFamily f;
  f.mean = std::move(mean);
  f.cov = 0.5 * (cov + cov.transpose());
  const Index d = f.mean.size();
  if (d > 0) {
    Eigen::LLT<Mat> llt(f.cov);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("normal factor: covariance is not positive definite");
    }
    f.cov_lower = llt.matrixL();
    f.precision = llt.solve(Mat::Identity(d, d));
    f.precision = 0.5 * (f.precision + f.precision.transpose()).eval();
    const double log_det = 2.0 * f.cov_lower.diagonal().array().log().sum();
    f.log_norm = -0.5 * static_cast<double>(d) * kLog2Pi - 0.5 * log_det;
  } else {
    f.cov_lower = Mat(0, 0);
    f.precision = Mat(0, 0);
  }
  return Distribution(std::move(f));
}

Distribution Distribution::lognormal(Vec log_mean, Vec log_var) {
  if (log_mean.size() != log_var.size()) {
    throw std::invalid_argument("lognormal factor: size mismatch");
  }
  if ((log_var.array() <= 0.0).any()) {
    throw std::invalid_argument("lognormal factor: log-variance must be positive");
  }
  return Distribution(LogNormalFamily{std::move(log_mean), std::move(log_var)});
}

Distribution Distribution::uniform(Vec lower, Vec upper) {
  if (lower.size() != upper.size() || (upper.array() <= lower.array()).any()) {
    throw std::invalid_argument("uniform factor: need lower < upper per coordinate");
  }
  return Distribution(UniformFamily{std::move(lower), std::move(upper)});
}

Distribution Distribution::empty() { return normal(Vec(0), Mat(0, 0)); }

Index Distribution::dim() const {
  return std::visit(Overloaded{[](const NormalFamily& f) { return f.mean.size(); },
                               [](const LogNormalFamily& f) { return f.log_mean.size(); },
                               [](const UniformFamily& f) { return f.lower.size(); }},
                    family_);
}

Vec Distribution::sample(RandomStream& rng) const {
  return std::visit(
      Overloaded{
          [&](const NormalFamily& f) -> Vec {
            return f.mean + f.cov_lower * rng.normal_vector(f.mean.size());
          },
          [&](const LogNormalFamily& f) -> Vec {
            Vec x(f.log_mean.size());
            for (Index i = 0; i < x.size(); ++i) {
              x[i] = std::exp(f.log_mean[i] + std::sqrt(f.log_var[i]) * rng.normal());
            }
            return x;
          },
          [&](const UniformFamily& f) -> Vec {
            Vec x(f.lower.size());
            for (Index i = 0; i < x.size(); ++i) {
              x[i] = f.lower[i] + (f.upper[i] - f.lower[i]) * rng.uniform();
            }
            return x;
          }},
      family_);
}

bool Distribution::in_support(const Vec& x) const {
  if (x.size() != dim()) return false;
  return std::visit(
      Overloaded{[&](const NormalFamily&) { return x.allFinite(); },
                 [&](const LogNormalFamily&) { return x.allFinite() && (x.array() > 0.0).all(); },
                 [&](const UniformFamily& f) {
                   return (x.array() >= f.lower.array()).all() &&
                          (x.array() <= f.upper.array()).all();
                 }},
      family_);
}

double Distribution::log_density(const Vec& x) const {
  if (!in_support(x)) return kNegInf;
  return std::visit(
      Overloaded{
          [&](const NormalFamily& f) {
            if (f.mean.size() == 0) return 0.0;
            const Vec w = f.cov_lower.triangularView<Eigen::Lower>().solve(x - f.mean);
            return f.log_norm - 0.5 * w.squaredNorm();
          },
          [&](const LogNormalFamily& f) {
            double total = 0.0;
            for (Index i = 0; i < x.size(); ++i) {
              const double lx = std::log(x[i]);
              const double dev = lx - f.log_mean[i];
              total -= lx + 0.5 * std::log(2.0 * std::numbers::pi * f.log_var[i]) +
                       dev * dev / (2.0 * f.log_var[i]);
            }
            return total;
          },
          [&](const UniformFamily& f) {
            return -(f.upper - f.lower).array().log().sum();
          }},
      family_);
}

Vec Distribution::grad_log_density(const Vec& x) const {
  if (!in_support(x)) return Vec::Zero(dim());
  return std::visit(
      Overloaded{[&](const NormalFamily& f) -> Vec { return -f.precision * (x - f.mean); },
                 [&](const LogNormalFamily& f) -> Vec {
                   Vec g(x.size());
                   for (Index i = 0; i < x.size(); ++i) {
                     const double dev = std::log(x[i]) - f.log_mean[i];
                     g[i] = -1.0 / x[i] - dev / (f.log_var[i] * x[i]);
                   }
                   return g;
                 },
                 [&](const UniformFamily& f) -> Vec { return Vec::Zero(f.lower.size()); }},
      family_);
}

Mat Distribution::hess_log_density(const Vec& x) const {
  const Index d = dim();
  if (!in_support(x)) return Mat::Zero(d, d);
  return std::visit(
      Overloaded{[&](const NormalFamily& f) -> Mat { return -f.precision; },
                 [&](const LogNormalFamily& f) -> Mat {
                   Mat h = Mat::Zero(d, d);
                   for (Index i = 0; i < d; ++i) {
                     const double dev = std::log(x[i]) - f.log_mean[i];
                     h(i, i) = (1.0 - (1.0 - dev) / f.log_var[i]) / (x[i] * x[i]);
                   }
                   return h;
                 },
                 [&](const UniformFamily&) -> Mat { return Mat::Zero(d, d); }},
      family_);
}

Vec Distribution::center() const {
  return std::visit(
      Overloaded{[](const NormalFamily& f) -> Vec { return f.mean; },
                 [](const LogNormalFamily& f) -> Vec { return f.log_mean.array().exp(); },
                 [](const UniformFamily& f) -> Vec { return 0.5 * (f.lower + f.upper); }},
      family_);
}

Vec Distribution::project_to_interior(const Vec& x) const {
  const auto* box = std::get_if<UniformFamily>(&family_);
  if (box == nullptr) return x;
  Vec y = x;
  for (Index i = 0; i < y.size(); ++i) {
    const double margin = 1e-9 * (box->upper[i] - box->lower[i]);
    y[i] = std::clamp(y[i], box->lower[i] + margin, box->upper[i] - margin);
  }
  return y;
}

PriorSpec::PriorSpec(Distribution theta, Distribution phi)
    : theta_(std::move(theta)),
      phi_fixed_(std::make_shared<const Distribution>(std::move(phi))) {
  d_phi_ = phi_fixed_->dim();
}

PriorSpec::PriorSpec(Distribution theta, ConditionalFactor phi_given_theta, Index d_phi)
    : theta_(std::move(theta)), phi_given_theta_(std::move(phi_given_theta)), d_phi_(d_phi) {
  if (!phi_given_theta_) throw std::invalid_argument("conditional phi factor is empty");
}

std::shared_ptr<const Distribution> PriorSpec::phi_factor(const Vec& theta) const {
  if (phi_fixed_) return phi_fixed_;
  return std::make_shared<const Distribution>(phi_given_theta_(theta));
}

std::pair<Vec, Vec> sample_prior(const PriorSpec& prior, RandomStream& rng) {
  Vec theta = prior.theta_factor().sample(rng);
  Vec phi = prior.phi_factor(theta)->sample(rng);
  return {std::move(theta), std::move(phi)};
}

double log_prior_joint(const PriorSpec& prior, const Vec& theta, const Vec& phi) {
  const double lt = prior.theta_factor().log_density(theta);
  if (!std::isfinite(lt)) return kNegInf;
  return lt + prior.phi_factor(theta)->log_density(phi);
}

Vec grad_log_prior_joint(const PriorSpec& prior, const Vec& theta, const Vec& phi) {
  const Index dt = prior.d_theta();
  const Index dp = prior.d_phi();
  Vec g(dt + dp);
  g.head(dt) = prior.theta_factor().grad_log_density(theta);
  g.tail(dp) = prior.phi_factor(theta)->grad_log_density(phi);
  if (!prior.independent()) {
    auto cond = [&](const Vec& t) { return prior.phi_factor(t)->log_density(phi); };
    g.head(dt) += fd_gradient(cond, theta);
  }
  return g;
}

Mat hess_log_prior_joint(const PriorSpec& prior, const Vec& theta, const Vec& phi) {
  const Index dt = prior.d_theta();
  const Index dp = prior.d_phi();
  Mat h = Mat::Zero(dt + dp, dt + dp);
  h.topLeftCorner(dt, dt) = prior.theta_factor().hess_log_density(theta);
  h.bottomRightCorner(dp, dp) = prior.phi_factor(theta)->hess_log_density(phi);
  if (!prior.independent()) {
    auto cond = [&](const Vec& t) { return prior.phi_factor(t)->log_density(phi); };
    h.topLeftCorner(dt, dt) += fd_hessian(cond, theta, cond(theta));
    auto cond_grad = [&](const Vec& t) { return prior.phi_factor(t)->grad_log_density(phi); };
    const Mat cross = fd_jacobian(cond_grad, theta);  // dp x dt
    h.bottomLeftCorner(dp, dt) = cross;
    h.topRightCorner(dt, dp) = cross.transpose();
  }
  return h;
}

}  // namespace nested_eig
