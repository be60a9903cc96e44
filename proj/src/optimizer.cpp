#include "nested_eig/optimizer.hpp"

#include <cmath>
#include <limits>

namespace nested_eig {
namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

Vec project_or_identity(const std::function<Vec(const Vec&)>& project, const Vec& x) {
  return project ? project(x) : x;
}

double projected_grad_norm(const MinimizeOptions& opts, const Vec& x, const Vec& g) {
  if (!opts.project) return g.norm();
  return (x - opts.project(x - g)).norm();
}

Mat starting_inverse(const MinimizeOptions& opts, const Vec& x, const Vec& g) {
  if (opts.initial_inverse_hessian) {
    if (auto h = opts.initial_inverse_hessian(x); h && h->allFinite()) return *h;
  }
  // Unit first step length along the gradient, capped to stay sane.
  const double gn = g.norm();
  const double scale = gn > 0.0 ? std::min(1.0, 1.0 / gn) : 1.0;
  return scale * Mat::Identity(x.size(), x.size());
}

}  // namespace

MinimizeResult minimize_bfgs(const ValueGrad& f, const Vec& x0, const MinimizeOptions& opts) {
  MinimizeResult res;
  const Index n = x0.size();
  res.x = project_or_identity(opts.project, x0);
  res.grad = Vec::Zero(n);
  res.value = f(res.x, &res.grad);
  res.tolerance = opts.grad_tol * (1.0 + (std::isfinite(res.value) ? std::abs(res.value) : 0.0));
  if (!std::isfinite(res.value) || !res.grad.allFinite()) {
    res.grad_norm = std::numeric_limits<double>::infinity();
    return res;
  }
  if (n == 0) {
    res.converged = true;
    return res;
  }
  res.grad_norm = projected_grad_norm(opts, res.x, res.grad);
  Mat hinv = starting_inverse(opts, res.x, res.grad);
  bool fresh_hinv = true;
  Vec trial_grad(n);

  for (int it = 0; it < opts.max_iters; ++it) {
    if (res.grad_norm <= res.tolerance) {
      res.converged = true;
      return res;
    }
    res.iterations = it + 1;
    Vec dir = -hinv * res.grad;
    if (!(dir.dot(res.grad) < 0.0)) {
      hinv = starting_inverse(opts, res.x, res.grad);
      fresh_hinv = true;
      dir = -hinv * res.grad;
      if (!(dir.dot(res.grad) < 0.0)) dir = -res.grad;
    }

    double step = 1.0;
    bool accepted = false;
    Vec trial;
    double trial_value = 0.0;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, step *= 0.5) {
      trial = project_or_identity(opts.project, res.x + step * dir);
      const Vec s = trial - res.x;
      if (s.norm() == 0.0) break;
      trial_value = f(trial, &trial_grad);
      if (!std::isfinite(trial_value) || !trial_grad.allFinite()) continue;
      if (trial_value <= res.value + kArmijo * res.grad.dot(s)) {
        accepted = true;
        break;
      }
      // Near the minimum the decrease drops below the rounding error of f
      // and Armijo cannot be checked; accept when f is unchanged to rounding
      // and the gradient shrinks.
      const double noise = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(res.value));
      if (std::abs(trial_value - res.value) <= noise &&
          projected_grad_norm(opts, trial, trial_grad) < res.grad_norm) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!fresh_hinv) {
        // The curvature model went stale; restart from the initial scaling.
        hinv = starting_inverse(opts, res.x, res.grad);
        fresh_hinv = true;
        continue;
      }
      // Stalled: no representable decrease along the search direction.
      res.converged = res.grad_norm <= opts.stall_factor * res.tolerance;
      return res;
    }

    const Vec s = trial - res.x;
    const Vec y = trial_grad - res.grad;
    res.x = trial;
    res.value = trial_value;
    res.grad = trial_grad;
    res.grad_norm = projected_grad_norm(opts, res.x, res.grad);
    fresh_hinv = false;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Vec hy = hinv * y;
      hinv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) -
              rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  res.converged = res.grad_norm <= res.tolerance;
  return res;
}

}  // namespace nested_eig
