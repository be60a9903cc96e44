#pragma once

#include <functional>
#include <optional>

#include "nested_eig/types.hpp"

namespace nested_eig {

// Returns f(x) and, when `grad` is non-null, writes the gradient. +inf marks
// an infeasible point; the line search backs away from it.
using ValueGrad = std::function<double(const Vec& x, Vec* grad)>;

struct MinimizeOptions {
  // Converged when ||x - P(x - grad)|| <= grad_tol * (1 + |f(x0)|).
  double grad_tol = 1e-8;
  int max_iters = 200;
  // A line-search stall counts as converged when the projected gradient is
  // within this factor of the tolerance (the floating-point floor of f).
  double stall_factor = 100.0;
  // Projection onto the feasible set; identity when empty.
  std::function<Vec(const Vec&)> project;
  // Initial inverse-Hessian approximation (e.g. an inverted Gauss-Newton
  // Hessian); scaled identity when empty.
  std::function<std::optional<Mat>(const Vec&)> initial_inverse_hessian;
};

struct MinimizeResult {
  Vec x;
  double value = 0.0;
  Vec grad;
  double grad_norm = 0.0;  // projected gradient norm
  double tolerance = 0.0;  // the absolute threshold grad_norm was held to
  int iterations = 0;
  bool converged = false;
};

// Quasi-Newton (BFGS) with projected backtracking Armijo line search.
MinimizeResult minimize_bfgs(const ValueGrad& f, const Vec& x0, const MinimizeOptions& opts);

}  // namespace nested_eig
