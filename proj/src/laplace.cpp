#include "nested_eig/laplace.hpp"

#include <cmath>
#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include "nested_eig/errors.hpp"
#include "nested_eig/numerics.hpp"
#include "nested_eig/optimizer.hpp"

namespace nested_eig {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Sigma_eps^{-1} v via the cached Cholesky factor.
Vec apply_noise_precision(const ExperimentModel& model, const Vec& v) {
  const auto& l = model.noise_lower();
  return l.transpose().triangularView<Eigen::Upper>().solve(
      l.triangularView<Eigen::Lower>().solve(v));
}

// sum_i r_i for the columns of Y and model output g.
Vec residual_sum(const Dataset& data, const Vec& g) {
  return data.y.rowwise().sum() - static_cast<double>(data.y.cols()) * g;
}

// N_e J^T S J
Mat gauss_newton_term(const ExperimentModel& model, const Mat& jac, Index n_e) {
  const Mat w = model.whiten(jac);
  return static_cast<double>(n_e) * (w.transpose() * w);
}

std::optional<Mat> inverse_or_empty(const Mat& h) {
  try {
    return inverse(factor_spd(h));
  } catch (const FitError&) {
    return std::nullopt;
  }
}

// Runs the warm start alone when given, then the multistart set, and keeps
// the best converged solution.
MinimizeResult multistart(const ValueGrad& f, const MinimizeOptions& opts, const Vec* warm,
                          const Vec& center, const std::function<Vec()>& draw, int n_starts,
                          const char* what) {
  if (warm != nullptr) {
    MinimizeResult r = minimize_bfgs(f, *warm, opts);
    if (r.converged) return r;
  }
  std::optional<MinimizeResult> best;
  for (int s = 0; s < std::max(1, n_starts); ++s) {
    MinimizeResult r = minimize_bfgs(f, s == 0 ? center : draw(), opts);
    if (!r.converged) continue;
    if (!best || r.value < best->value) best = std::move(r);
  }
  if (!best) throw FitError(std::string(what) + ": no start point converged");
  return *best;
}

std::function<Vec(const Vec&)> projector(std::shared_ptr<const Distribution> dist) {
  if (!dist->is_uniform()) return {};
  return [dist](const Vec& x) { return dist->project_to_interior(x); };
}

// Gradient of log pi(phi | theta) in theta at fixed phi; zero for an
// independent prior.
Vec grad_theta_conditional(const PriorSpec& prior, const Vec& theta, const Vec& phi) {
  if (prior.independent()) return Vec::Zero(theta.size());
  return fd_gradient([&](const Vec& t) { return prior.phi_factor(t)->log_density(phi); }, theta);
}

}  // namespace

double eval_f(const ExperimentModel& model, const PriorSpec& prior, const Dataset& data,
              const Vec& theta, const Vec& phi) {
  const double lp = prior.phi_factor(theta)->log_density(phi);
  if (!std::isfinite(lp)) return kInf;
  const Vec g = model.forward(data.design, theta, phi);
  return 0.5 * residual_norm_sq(model, data, g) - lp;
}

Vec grad_f_phi(const ExperimentModel& model, const PriorSpec& prior, const Dataset& data,
               const Vec& theta, const Vec& phi) {
  const auto dist = prior.phi_factor(theta);
  const Vec g = model.forward(data.design, theta, phi);
  const Mat jp = model.jac_phi(data.design, theta, phi);
  return -jp.transpose() * apply_noise_precision(model, residual_sum(data, g)) -
         dist->grad_log_density(phi);
}

Mat hess_f_phi(const ExperimentModel& model, const PriorSpec& prior, const Dataset& data,
               const Vec& theta, const Vec& phi, HessianForm form) {
  if (form == HessianForm::kFull) {
    const Mat h = fd_jacobian(
        [&](const Vec& p) { return grad_f_phi(model, prior, data, theta, p); }, phi);
    return 0.5 * (h + h.transpose());
  }
  const auto dist = prior.phi_factor(theta);
  const Mat jp = model.jac_phi(data.design, theta, phi);
  return gauss_newton_term(model, jp, data.y.cols()) - dist->hess_log_density(phi);
}

LaplaceFit make_gaussian_fit(Vec mode, const Mat& precision) {
  LaplaceFit fit;
  fit.mode = std::move(mode);
  SpdFactor f = factor_spd(precision);
  fit.precision = std::move(f.matrix);
  fit.lower = std::move(f.lower);
  fit.log_det_precision = f.log_det;
  fit.jitter_added = f.jitter;
  return fit;
}

LaplaceFit fit_nuisance_map(const ExperimentModel& model, const PriorSpec& prior,
                            const Dataset& data, const Vec& theta, const SolverConfig& cfg,
                            RandomStream& rng, const Vec* warm_start) {
  const auto dist = prior.phi_factor(theta);
  const Vec& xi = data.design;

  ValueGrad objective = [&](const Vec& phi, Vec* grad) -> double {
    const double lp = dist->log_density(phi);
    if (!std::isfinite(lp)) return kInf;
    try {
      const Vec g = model.forward(xi, theta, phi);
      const double value = 0.5 * residual_norm_sq(model, data, g) - lp;
      if (grad != nullptr) {
        const Mat jp = model.jac_phi(xi, theta, phi);
        *grad = -jp.transpose() * apply_noise_precision(model, residual_sum(data, g)) -
                dist->grad_log_density(phi);
      }
      return value;
    } catch (const ForwardMapError&) {
      return kInf;
    }
  };

  MinimizeOptions opts;
  opts.grad_tol = cfg.grad_tol;
  opts.max_iters = cfg.max_iters;
  opts.project = projector(dist);
  opts.initial_inverse_hessian = [&](const Vec& phi) -> std::optional<Mat> {
    try {
      return inverse_or_empty(hess_f_phi(model, prior, data, theta, phi));
    } catch (const ForwardMapError&) {
      return std::nullopt;
    }
  };

  const MinimizeResult r =
      multistart(objective, opts, warm_start, dist->center(),
                 [&] { return dist->sample(rng); }, cfg.n_multistarts, "nuisance MAP");
  LaplaceFit fit =
      make_gaussian_fit(r.x, hess_f_phi(model, prior, data, theta, r.x, cfg.hessian_form));
  fit.grad_norm_at_mode = r.grad_norm;
  fit.tolerance = r.tolerance;
  fit.iterations = r.iterations;
  fit.objective = r.value;
  return fit;
}

NuisanceProfile profile_nuisance(const ExperimentModel& model, const PriorSpec& prior,
                                 const Dataset& data, const Vec& theta, const SolverConfig& cfg,
                                 RandomStream& rng, const Vec* warm_start) {
  NuisanceProfile p;
  p.fit = fit_nuisance_map(model, prior, data, theta, cfg, rng, warm_start);
  const Vec g = model.forward(data.design, theta, p.fit.mode);
  p.residual_sq = residual_norm_sq(model, data, g);
  p.log_prior_theta = prior.theta_factor().log_density(theta);
  p.half_log_det = 0.5 * p.fit.log_det_precision;
  p.log_prior_phi = prior.phi_factor(theta)->log_density(p.fit.mode);
  return p;
}

double marginalized_log_posterior_unnorm(const ExperimentModel& model, const PriorSpec& prior,
                                         const Dataset& data, const Vec& theta,
                                         const SolverConfig& cfg, RandomStream& rng) {
  const NuisanceProfile p = profile_nuisance(model, prior, data, theta, cfg, rng);
  return p.log_prior_theta + p.log_prior_phi +
         0.5 * static_cast<double>(prior.d_phi()) * kLog2Pi - p.half_log_det -
         0.5 * p.residual_sq;
}

LaplaceFit fit_theta_map(const ExperimentModel& model, const PriorSpec& prior,
                         const Dataset& data, const SolverConfig& cfg, RandomStream& rng) {
  const Vec& xi = data.design;
  const Distribution& theta_dist = prior.theta_factor();
  const Index dt = prior.d_theta();

  SolverConfig inner = cfg;
  inner.grad_tol = cfg.grad_tol * cfg.profile_tol_factor;

  // Most recent nuisance mode; warm start for the next profile.
  std::optional<Vec> last_phi;
  auto profile = [&](const Vec& theta, const Vec* warm) {
    NuisanceProfile p = profile_nuisance(model, prior, data, theta, inner, rng, warm);
    return p;
  };
  auto warm_ptr = [&]() -> const Vec* { return last_phi ? &*last_phi : nullptr; };

  ValueGrad objective = [&](const Vec& theta, Vec* grad) -> double {
    if (!theta_dist.in_support(theta)) return kInf;
    try {
      const NuisanceProfile p = profile(theta, warm_ptr());
      last_phi = p.fit.mode;
      const double value = p.value();
      if (grad != nullptr) {
        // Envelope theorem: 1/2 sum r^T S r - l is stationary in phi at
        // phi_hat, so only its explicit theta-dependence enters; k is
        // differentiated numerically through re-solved profiles.
        const Vec& phi = p.fit.mode;
        const Vec g = model.forward(xi, theta, phi);
        const Mat jt = model.jac_theta(xi, theta, phi);
        Vec gr = -jt.transpose() * apply_noise_precision(model, residual_sum(data, g)) -
                 grad_theta_conditional(prior, theta, phi) -
                 theta_dist.grad_log_density(theta);
        Vec probe = theta;
        for (Index j = 0; j < dt; ++j) {
          const double h = fd_step_first(theta[j]);
          probe[j] = theta[j] + h;
          const double k_up = profile(probe, &phi).half_log_det;
          probe[j] = theta[j] - h;
          const double k_down = profile(probe, &phi).half_log_det;
          probe[j] = theta[j];
          gr[j] += (k_up - k_down) / (2.0 * h);
        }
        *grad = std::move(gr);
      }
      return value;
    } catch (const ForwardMapError&) {
      return kInf;
    } catch (const FitError&) {
      return kInf;
    }
  };

  MinimizeOptions opts;
  opts.grad_tol = cfg.grad_tol;
  opts.max_iters = cfg.max_iters;
  if (theta_dist.is_uniform()) {
    opts.project = [&theta_dist](const Vec& x) { return theta_dist.project_to_interior(x); };
  }
  // Schur complement of the joint Gauss-Newton precision: exact for linear
  // Gaussian models and a good scaling otherwise.
  opts.initial_inverse_hessian = [&](const Vec& theta) -> std::optional<Mat> {
    if (!last_phi) return std::nullopt;
    try {
      const Vec& phi = *last_phi;
      const Mat jz = model.jac_z(xi, theta, phi);
      Mat h = gauss_newton_term(model, jz, data.y.cols()) -
              hess_log_prior_joint(prior, theta, phi);
      const Index dp = phi.size();
      Mat schur = h.topLeftCorner(dt, dt);
      if (dp > 0) {
        const SpdFactor hp = factor_spd(h.bottomRightCorner(dp, dp));
        const Mat w = hp.lower.triangularView<Eigen::Lower>().solve(h.bottomLeftCorner(dp, dt));
        schur -= w.transpose() * w;
      }
      return inverse_or_empty(schur);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };

  std::optional<MinimizeResult> best;
  std::optional<Vec> best_phi;
  for (int s = 0; s < std::max(1, cfg.n_multistarts); ++s) {
    last_phi.reset();
    const Vec start = s == 0 ? theta_dist.center() : theta_dist.sample(rng);
    MinimizeResult r = minimize_bfgs(objective, start, opts);
    if (!r.converged) continue;
    if (!best || r.value < best->value) {
      best = std::move(r);
      best_phi = last_phi;
    }
  }
  if (!best) throw FitError("theta MAP: no start point converged");
  const Vec theta_hat = best->x;

  // Precision at theta_hat.
  const NuisanceProfile at = profile(theta_hat, best_phi ? &*best_phi : nullptr);
  const Vec& phi_hat = at.fit.mode;
  const Index dp = phi_hat.size();
  Mat dphi(dp, dt);
  {
    Vec probe = theta_hat;
    for (Index j = 0; j < dt; ++j) {
      const double h = fd_step_first(theta_hat[j]);
      probe[j] = theta_hat[j] + h;
      const Vec up = profile(probe, &phi_hat).fit.mode;
      probe[j] = theta_hat[j] - h;
      const Vec down = profile(probe, &phi_hat).fit.mode;
      probe[j] = theta_hat[j];
      dphi.col(j) = (up - down) / (2.0 * h);
    }
  }
  const Mat g_total =
      model.jac_theta(xi, theta_hat, phi_hat) + model.jac_phi(xi, theta_hat, phi_hat) * dphi;
  Mat precision = gauss_newton_term(model, g_total, data.y.cols()) -
                  theta_dist.hess_log_density(theta_hat);
  if (dp > 0) {
    // k - l shares every probe solve; only the difference enters.
    auto k_minus_l = [&](const Vec& t) {
      const NuisanceProfile p = profile(t, &phi_hat);
      return p.half_log_det - p.log_prior_phi;
    };
    precision += fd_hessian(k_minus_l, theta_hat, at.half_log_det - at.log_prior_phi);
  }

  LaplaceFit fit = make_gaussian_fit(theta_hat, precision);
  fit.grad_norm_at_mode = best->grad_norm;
  fit.tolerance = best->tolerance;
  fit.iterations = best->iterations;
  fit.objective = best->value;
  return fit;
}

LaplaceFit fit_joint_map(const ExperimentModel& model, const PriorSpec& prior,
                         const Dataset& data, const SolverConfig& cfg, RandomStream& rng) {
  const Vec& xi = data.design;
  const Index dt = prior.d_theta();
  const Index dp = prior.d_phi();
  auto split = [dt, dp](const Vec& z) { return std::pair<Vec, Vec>{z.head(dt), z.tail(dp)}; };

  ValueGrad objective = [&](const Vec& z, Vec* grad) -> double {
    const auto [theta, phi] = split(z);
    const double lp = log_prior_joint(prior, theta, phi);
    if (!std::isfinite(lp)) return kInf;
    try {
      const Vec g = model.forward(xi, theta, phi);
      const double value = 0.5 * residual_norm_sq(model, data, g) - lp;
      if (grad != nullptr) {
        const Mat jz = model.jac_z(xi, theta, phi);
        *grad = -jz.transpose() * apply_noise_precision(model, residual_sum(data, g)) -
                grad_log_prior_joint(prior, theta, phi);
      }
      return value;
    } catch (const ForwardMapError&) {
      return kInf;
    }
  };

  auto precision_at = [&](const Vec& z) {
    const auto [theta, phi] = split(z);
    return Mat(gauss_newton_term(model, model.jac_z(xi, theta, phi), data.y.cols()) -
               hess_log_prior_joint(prior, theta, phi));
  };

  MinimizeOptions opts;
  opts.grad_tol = cfg.grad_tol;
  opts.max_iters = cfg.max_iters;
  const bool any_uniform =
      prior.theta_factor().is_uniform() || !prior.independent() ||
      prior.phi_factor(prior.theta_factor().center())->is_uniform();
  if (any_uniform) {
    opts.project = [&](const Vec& z) {
      Vec out(z.size());
      out.head(dt) = prior.theta_factor().project_to_interior(z.head(dt));
      out.tail(dp) = prior.phi_factor(out.head(dt))->project_to_interior(z.tail(dp));
      return out;
    };
  }
  opts.initial_inverse_hessian = [&](const Vec& z) -> std::optional<Mat> {
    try {
      return inverse_or_empty(precision_at(z));
    } catch (const ForwardMapError&) {
      return std::nullopt;
    }
  };

  const Vec theta_c = prior.theta_factor().center();
  Vec center(dt + dp);
  center << theta_c, prior.phi_factor(theta_c)->center();
  auto draw = [&] {
    auto [t, p] = sample_prior(prior, rng);
    Vec z(dt + dp);
    z << t, p;
    return z;
  };
  const MinimizeResult r =
      multistart(objective, opts, nullptr, center, draw, cfg.n_multistarts, "joint MAP");
  LaplaceFit fit = make_gaussian_fit(r.x, precision_at(r.x));
  fit.grad_norm_at_mode = r.grad_norm;
  fit.tolerance = r.tolerance;
  fit.iterations = r.iterations;
  fit.objective = r.value;
  return fit;
}

double laplace_log_density(const LaplaceFit& fit, const Vec& x) {
  const Vec w = fit.lower.transpose() * (x - fit.mode);
  return 0.5 * fit.log_det_precision - 0.5 * static_cast<double>(x.size()) * kLog2Pi -
         0.5 * w.squaredNorm();
}

Vec sample_laplace(const LaplaceFit& fit, RandomStream& rng) {
  const Vec eta = rng.normal_vector(fit.mode.size());
  return fit.mode + fit.lower.transpose().triangularView<Eigen::Upper>().solve(eta);
}

}  // namespace nested_eig
