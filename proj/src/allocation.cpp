#include "nested_eig/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nested_eig/errors.hpp"
#include "nested_eig/estimators.hpp"
#include "nested_eig/numerics.hpp"
#include "nested_eig/parallel.hpp"

namespace nested_eig {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Index ceil_at_least_one(double x) {
  if (!std::isfinite(x)) throw AllocationError("allocation produced a non-finite sample size");
  return std::max<Index>(1, static_cast<Index>(std::ceil(x)));
}

void check_inputs(const PilotConstants& c, double tol, double alpha) {
  if (!(tol > 0.0) || !std::isfinite(tol)) throw AllocationError("TOL must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw AllocationError("alpha must lie in (0, 1)");
  if (!(c.d3 > 0.0) || !std::isfinite(c.d3)) throw AllocationError("D3 must be positive");
  if (!(c.c1 >= 0.0) || !(c.c2 >= 0.0) || !std::isfinite(c.c1) || !std::isfinite(c.c2)) {
    throw AllocationError("C1 and C2 must be finite and non-negative");
  }
}

void finish(Allocation& a) {
  a.n_outer = ceil_at_least_one(a.n_real);
  a.m1_inner = ceil_at_least_one(a.m1_real);
  a.m2_inner = ceil_at_least_one(a.m2_real);
}

}  // namespace

double confidence_constant(double alpha) { return normal_quantile(1.0 - 0.5 * alpha); }

PilotConstants estimate_constants_pilot(const ExperimentModel& model, const PriorSpec& prior,
                                        const Vec& xi, Index n_pilot, Index m1_pilot,
                                        Index m2_pilot, ProposalKind kind,
                                        const PilotOptions& opts) {
  if (n_pilot < 2 || m1_pilot < 2 || m2_pilot < 2) {
    throw EstimationError("pilot needs at least 2 outer and 2 inner samples per loop");
  }
  const auto count = static_cast<std::size_t>(n_pilot);
  std::vector<double> rv1(count, kNaN), rv2(count, kNaN), terms(count, kNaN);

  parallel_for(count, opts.threads, [&](std::size_t i) {
    const OuterDraw outer = draw_outer(model, prior, xi, opts.seed, i);
    const InnerWeights w = inner_log_weights(model, prior, outer, m1_pilot, m2_pilot, kind,
                                             opts.solver, opts.seed, i);
    if (w.fit_failed) return;
    const double r1 = relative_sample_variance_of_exp(w.log_w1);
    const double r2 = relative_sample_variance_of_exp(w.log_w2);
    const double lp1 = log_mean_exp(w.log_w1);
    const double lp2 = log_mean_exp(w.log_w2);
    if (!std::isfinite(r1) || !std::isfinite(r2) || !std::isfinite(lp1) ||
        !std::isfinite(lp2)) {
      return;
    }
    rv1[i] = r1;
    rv2[i] = r2;
    terms[i] = lp1 - lp2;
  });

  const SampleMoments m1 = sample_moments(rv1);
  const SampleMoments m2 = sample_moments(rv2);
  const SampleMoments t = sample_moments(terms);
  const Index skipped = n_pilot - t.count;
  if (static_cast<double>(skipped) > 0.1 * static_cast<double>(n_pilot) || t.count < 2) {
    std::ostringstream msg;
    msg << "pilot skipped " << skipped << " of " << n_pilot << " outer samples";
    throw EstimationError(msg.str());
  }

  PilotConstants c;
  c.estimator = kind == ProposalKind::kPrior ? "dlmc" : "dlmc2is";
  c.set_bias_constants(0.5 * m1.mean, 0.5 * m2.mean);
  c.d3 = t.variance;
  c.n_outer_pilot = n_pilot;
  c.m_inner_pilot = std::max(m1_pilot, m2_pilot);
  c.skipped = skipped;
  c.seed = opts.seed;
  return c;
}

Mc2laPilot estimate_variance_pilot_mc2la(const ExperimentModel& model, const PriorSpec& prior,
                                         const Vec& xi, Index n_pilot,
                                         const PilotOptions& opts) {
  RunOptions run{opts.seed, opts.threads, opts.solver};
  const EigResult r = mc2la(model, prior, xi, n_pilot, run);
  Mc2laPilot p;
  p.mean = r.estimate;
  p.variance = r.sample_variance_outer;
  p.used = r.n_outer - r.failed_fit_count;
  if (static_cast<double>(r.failed_fit_count) > 0.1 * static_cast<double>(n_pilot)) {
    throw EstimationError("MC2LA pilot: more than 10% of the theta fits failed");
  }
  return p;
}

Allocation allocate(const PilotConstants& c, double tol, double alpha) {
  check_inputs(c, tol, alpha);
  Allocation a;
  a.c_alpha = confidence_constant(alpha);
  const double ca2 = a.c_alpha * a.c_alpha;
  if (c.c1 == 0.0 && c.c2 == 0.0) {
    // No inner-loop bias: one inner sample each, the whole tolerance goes
    // to the statistical error.
    a.kappa = 1.0;
    a.m1_real = 1.0;
    a.m2_real = 1.0;
    a.n_real = ca2 * c.d3 / (tol * tol);
  } else {
    const double d3 = c.d3;
    a.kappa = (8.0 * tol + 3.0 * d3 - std::sqrt(16.0 * tol * d3 + 9.0 * d3 * d3)) / (8.0 * tol);
    const double k = a.kappa;
    const double s = std::sqrt(c.c1 * c.c2);
    a.n_real = ca2 * (d3 + 2.0 * (1.0 - k) * tol) / (k * k * tol * tol);
    a.m1_real = (c.c1 + s) / ((1.0 - k) * tol);
    a.m2_real = (c.c2 + s) / ((1.0 - k) * tol);
  }
  finish(a);
  a.predicted_work = a.n_real * (a.m1_real + a.m2_real);
  return a;
}

Allocation allocate_with_discretization(const PilotConstants& c, double tol, double alpha) {
  check_inputs(c, tol, alpha);
  if (!c.c3 || !c.eta || !c.gamma || !(*c.c3 > 0.0) || !(*c.eta > 0.0) || !(*c.gamma > 0.0)) {
    throw AllocationError("discretization-aware allocation needs C3, eta, gamma > 0");
  }
  const double c3 = *c.c3, eta = *c.eta, gamma = *c.gamma, d3 = c.d3, t = tol;
  Allocation a;
  a.c_alpha = confidence_constant(alpha);
  const double ca2 = a.c_alpha * a.c_alpha;
  const double a_fac = 1.0 + gamma / (2.0 * eta);

  if (c.c1 == 0.0 && c.c2 == 0.0) {
    // Only the mesh bias remains: minimizing kappa^-2 h^-gamma with
    // C3 h^eta = (1 - kappa) tol gives kappa = 2 eta / (2 eta + gamma).
    a.kappa = 2.0 * eta / (2.0 * eta + gamma);
    a.m1_real = 1.0;
    a.m2_real = 1.0;
    a.n_real = ca2 * d3 / (a.kappa * a.kappa * t * t);
    a.h_mesh = std::pow((1.0 - a.kappa) * t / c3, 1.0 / eta);
  } else {
    const double disc = d3 * (9.0 * d3 * eta * eta + 6.0 * d3 * eta * gamma + d3 * gamma * gamma +
                              16.0 * eta * eta * t + 8.0 * t * eta * gamma);
    a.kappa = eta *
              (8.0 * t * eta + 3.0 * d3 * eta + d3 * gamma + 4.0 * t * gamma - std::sqrt(disc)) /
              (2.0 * t * (4.0 * eta * eta + 4.0 * eta * gamma + gamma * gamma));
    if (!(a.kappa > 0.0 && a.kappa < 1.0)) {
      std::ostringstream msg;
      msg << "no splitting parameter in (0, 1): kappa = " << a.kappa << " (D3 = " << d3
          << ", TOL = " << t << ", eta = " << eta << ", gamma = " << gamma << ")";
      throw AllocationError(msg.str());
    }
    const double slack = 1.0 - a.kappa * a_fac;
    if (!(slack > 0.0)) {
      throw AllocationError("infeasible: 1 - kappa (1 + gamma / (2 eta)) <= 0");
    }
    const double s = std::sqrt(c.c1 * c.c2);
    a.n_real = ca2 / (a.kappa * a.kappa * t) * (d3 / t + 2.0 * slack);
    a.m1_real = (c.c1 + s) / (slack * t);
    a.m2_real = (c.c2 + s) / (slack * t);
    a.h_mesh = std::pow(gamma * a.kappa * t / (2.0 * eta * c3), 1.0 / eta);
  }
  finish(a);
  a.predicted_work = a.n_real * (a.m1_real + a.m2_real) * std::pow(*a.h_mesh, -gamma);
  return a;
}

Allocation allocate_mc2la(const PilotConstants& c, double tol, double alpha) {
  if (!(tol > 0.0) || !std::isfinite(tol)) throw AllocationError("TOL must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw AllocationError("alpha must lie in (0, 1)");
  if (!(c.d3 >= 0.0) || !std::isfinite(c.d3)) throw AllocationError("variance must be finite");
  const double bias = std::abs(c.mc2la_bias.value_or(0.0));
  if (bias >= tol) {
    throw AllocationError("infeasible: the measured MC2LA bias is not below TOL");
  }
  Allocation a;
  a.c_alpha = confidence_constant(alpha);
  a.kappa = 1.0 - bias / tol;
  a.n_real = a.c_alpha * a.c_alpha * c.d3 / (a.kappa * a.kappa * tol * tol);
  a.m1_real = 0.0;
  a.m2_real = 0.0;
  a.n_outer = ceil_at_least_one(a.n_real);
  a.m1_inner = 0;
  a.m2_inner = 0;
  a.predicted_work = a.n_real;
  return a;
}

AllocationReport verify_allocation(const PilotConstants& c, const Allocation& a, double tol) {
  AllocationReport r;
  // kappa = 1 is admissible only when nothing contributes bias.
  const bool bias_free = c.c1 == 0.0 && c.c2 == 0.0 && !a.h_mesh &&
                         c.mc2la_bias.value_or(0.0) == 0.0;
  r.kappa_valid = a.kappa > 0.0 && (a.kappa < 1.0 || (bias_free && a.kappa == 1.0));
  auto ratio = [](double num, double den) { return num == 0.0 ? 0.0 : num / den; };
  r.bias_lhs = ratio(c.c1, a.m1_real) + ratio(c.c2, a.m2_real);
  if (a.h_mesh && c.c3 && c.eta) r.bias_lhs += *c.c3 * std::pow(*a.h_mesh, *c.eta);
  r.bias_rhs = (1.0 - a.kappa) * tol;
  r.variance_lhs = (c.d3 + ratio(c.d1, a.m1_real) + ratio(c.d2, a.m2_real)) / a.n_real;
  const double sd = a.kappa * tol / a.c_alpha;
  r.variance_rhs = sd * sd;
  constexpr double kRel = 1e-9;
  r.bias_ok = r.bias_lhs <= r.bias_rhs * (1.0 + kRel) + 1e-300;
  r.variance_ok = r.variance_lhs <= r.variance_rhs * (1.0 + kRel);
  return r;
}

C3Estimate estimate_c3_pilot(const ModelFamily& family, const PriorSpec& prior, const Vec& xi,
                             const std::vector<double>& h_grid, double h_ref, Index n_pilot,
                             const PilotOptions& opts) {
  if (h_grid.size() < 2) throw EstimationError("C3 pilot needs at least two mesh sizes");
  RunOptions run{opts.seed, opts.threads, opts.solver};
  const EigResult ref = mc2la(family(h_ref), prior, xi, n_pilot, run);

  C3Estimate est;
  std::vector<double> log_h, log_b;
  for (double h : h_grid) {
    // Same seed at every mesh: the outer samples are shared, so the paired
    // differences cancel most of the sampling noise.
    const EigResult r = mc2la(family(h), prior, xi, n_pilot, run);
    std::vector<double> diff;
    for (std::size_t i = 0; i < r.outer_terms.size(); ++i) {
      diff.push_back(r.outer_terms[i] - ref.outer_terms[i]);
    }
    const SampleMoments m = sample_moments(diff);
    const double se = std::sqrt(m.variance / static_cast<double>(std::max<Index>(1, m.count)));
    est.h.push_back(h);
    est.bias.push_back(m.mean);
    est.std_error.push_back(se);
    if (std::abs(m.mean) > 2.0 * se && m.mean != 0.0) {
      log_h.push_back(std::log(h));
      log_b.push_back(std::log(std::abs(m.mean)));
    }
  }

  // Bias magnitudes should shrink with h.
  std::vector<std::size_t> order(est.h.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return est.h[a] < est.h[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (std::abs(est.bias[order[i]]) < std::abs(est.bias[order[i - 1]])) est.non_monotone = true;
  }

  if (log_h.size() < 2) {
    est.below_noise_floor = true;
    est.c3 = 0.0;
    est.eta = kNaN;
    return est;
  }
  const auto n = static_cast<double>(log_h.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < log_h.size(); ++i) {
    mx += log_h[i];
    my += log_b[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < log_h.size(); ++i) {
    sxx += (log_h[i] - mx) * (log_h[i] - mx);
    sxy += (log_h[i] - mx) * (log_b[i] - my);
  }
  est.eta = sxy / sxx;
  est.c3 = std::exp(my - est.eta * mx);
  return est;
}

}  // namespace nested_eig
