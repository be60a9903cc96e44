#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <variant>

#include "nested_eig/random.hpp"
#include "nested_eig/types.hpp"

namespace nested_eig {

struct NormalFamily {
  Vec mean;
  Mat cov;
  Mat cov_lower;   // Cholesky factor of cov
  Mat precision;   // cov^{-1}
  double log_norm = 0.0;  // -(d/2) log(2 pi) - (1/2) log det cov
};

// Independent coordinates with log(x_i) ~ N(log_mean_i, log_var_i).
struct LogNormalFamily {
  Vec log_mean;
  Vec log_var;
};

// Box uniform on [lower_i, upper_i].
struct UniformFamily {
  Vec lower;
  Vec upper;
};

// A prior factor: sampling, log-density and its first two derivatives.
// Densities are only ever exposed in log space.
class Distribution {
 public:
  static Distribution normal(Vec mean, Mat cov);
  static Distribution lognormal(Vec log_mean, Vec log_var);
  static Distribution uniform(Vec lower, Vec upper);
  // Zero-dimensional factor (no nuisance parameters).
  static Distribution empty();

  Index dim() const;
  Vec sample(RandomStream& rng) const;

  // -inf outside the support.
  double log_density(const Vec& x) const;
  // Zero outside the support.
  Vec grad_log_density(const Vec& x) const;
  Mat hess_log_density(const Vec& x) const;

  bool in_support(const Vec& x) const;
  // Mean (normal, uniform) or median (lognormal).
  Vec center() const;
  // Uniform factors are clamped into the box shrunk by 1e-9 of its width
  // per side; other families are returned unchanged.
  Vec project_to_interior(const Vec& x) const;

  bool is_uniform() const { return std::holds_alternative<UniformFamily>(family_); }
  const std::variant<NormalFamily, LogNormalFamily, UniformFamily>& family() const {
    return family_;
  }

 private:
  explicit Distribution(std::variant<NormalFamily, LogNormalFamily, UniformFamily> f)
      : family_(std::move(f)) {}

  std::variant<NormalFamily, LogNormalFamily, UniformFamily> family_;
};

// The phi factor of a dependent prior, as a function of theta.
using ConditionalFactor = std::function<Distribution(const Vec& theta)>;

// Joint prior pi(theta, phi) = pi(theta) * pi(phi | theta). An independent
// prior is the case where the phi factor ignores theta.
class PriorSpec {
 public:
  PriorSpec(Distribution theta, Distribution phi);
  PriorSpec(Distribution theta, ConditionalFactor phi_given_theta, Index d_phi);

  Index d_theta() const { return theta_.dim(); }
  Index d_phi() const { return d_phi_; }
  bool independent() const { return static_cast<bool>(phi_fixed_); }

  const Distribution& theta_factor() const { return theta_; }
  std::shared_ptr<const Distribution> phi_factor(const Vec& theta) const;

 private:
  Distribution theta_;
  std::shared_ptr<const Distribution> phi_fixed_;
  ConditionalFactor phi_given_theta_;
  Index d_phi_ = 0;
};

std::pair<Vec, Vec> sample_prior(const PriorSpec& prior, RandomStream& rng);

// log pi(theta) + log pi(phi | theta); -inf outside the support.
double log_prior_joint(const PriorSpec& prior, const Vec& theta, const Vec& phi);

// Gradient and Hessian of log_prior_joint in z = (theta, phi). Blocks that
// involve theta-derivatives of a dependent phi factor use finite differences.
Vec grad_log_prior_joint(const PriorSpec& prior, const Vec& theta, const Vec& phi);
Mat hess_log_prior_joint(const PriorSpec& prior, const Vec& theta, const Vec& phi);

}  // namespace nested_eig
