#include "nested_eig/estimators.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "nested_eig/errors.hpp"
#include "nested_eig/numerics.hpp"
#include "nested_eig/parallel.hpp"

namespace nested_eig {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Terms are NaN where the outer sample was skipped.
EigResult summarize(std::vector<double> terms, Index n, Index m1, Index m2, double work,
                    Index degenerate, Index failed, Index retries) {
  EigResult r;
  const SampleMoments m = sample_moments(terms);
  if (m.count == 0) throw EstimationError("every outer sample was skipped");
  r.estimate = m.mean;
  r.sample_variance_outer = m.variance;
  r.n_outer = n;
  r.m1_inner = m1;
  r.m2_inner = m2;
  r.work_units = work;
  r.degenerate_inner_count = degenerate;
  r.failed_fit_count = failed;
  r.fit_retry_count = retries;
  r.degenerate_flag = static_cast<double>(degenerate + failed) > 0.01 * static_cast<double>(n);
  r.outer_terms = std::move(terms);
  return r;
}

void check_sizes(Index n, Index m1, Index m2) {
  if (n < 1 || m1 < 1 || m2 < 1) {
    throw std::invalid_argument("sample sizes must be at least 1");
  }
}

}  // namespace

double EigResult::standard_error() const {
  const auto used = static_cast<double>(n_outer - degenerate_inner_count - failed_fit_count);
  return used > 0 ? std::sqrt(sample_variance_outer / used) : kNaN;
}

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kDlmc:
      return "dlmc";
    case EstimatorKind::kDlmc2is:
      return "dlmc2is";
    case EstimatorKind::kMc2la:
      return "mc2la";
  }
  return "unknown";
}

EstimatorKind parse_estimator_kind(std::string_view name) {
  if (name == "dlmc") return EstimatorKind::kDlmc;
  if (name == "dlmc2is") return EstimatorKind::kDlmc2is;
  if (name == "mc2la") return EstimatorKind::kMc2la;
  throw std::invalid_argument("unknown estimator '" + std::string(name) + "'");
}

EigResult dlmc2is(const ExperimentModel& model, const PriorSpec& prior, const Vec& xi, Index n,
                  Index m1, Index m2, const RunOptions& opts, ProposalKind proposal) {
  check_sizes(n, m1, m2);
  const auto count = static_cast<std::size_t>(n);
  std::vector<double> terms(count, kNaN);
  std::vector<char> degenerate(count, 0);
  std::vector<char> failed(count, 0);
  std::vector<char> retried(count, 0);

  parallel_for(count, opts.threads, [&](std::size_t i) {
    const OuterDraw outer = draw_outer(model, prior, xi, opts.seed, i);
    const InnerWeights w =
        inner_log_weights(model, prior, outer, m1, m2, proposal, opts.solver, opts.seed, i);
    retried[i] = w.failed_fits > 0;
    if (w.fit_failed) {
      failed[i] = 1;
      return;
    }
    const double lp1 = log_mean_exp(w.log_w1);
    const double lp2 = log_mean_exp(w.log_w2);
    if (!std::isfinite(lp1) || !std::isfinite(lp2)) {
      degenerate[i] = 1;
      return;
    }
    terms[i] = lp1 - lp2;
  });

  Index n_deg = 0, n_failed = 0, n_retry = 0;
  for (std::size_t i = 0; i < count; ++i) {
    n_deg += degenerate[i];
    n_failed += failed[i];
    n_retry += retried[i];
  }
  const double work =
      static_cast<double>(n) * static_cast<double>(m1 + m2) * model.work_per_evaluation();
  return summarize(std::move(terms), n, m1, m2, work, n_deg, n_failed, n_retry);
}

EigResult dlmc(const ExperimentModel& model, const PriorSpec& prior, const Vec& xi, Index n,
               Index m1, Index m2, const RunOptions& opts) {
  return dlmc2is(model, prior, xi, n, m1, m2, opts, ProposalKind::kPrior);
}

double mc2la_term(const PriorSpec& prior, const LaplaceFit& theta_fit) {
  const auto dt = static_cast<double>(theta_fit.mode.size());
  const Distribution& pt = prior.theta_factor();
  const Mat cov = inverse(SpdFactor{theta_fit.precision, theta_fit.lower,
                                    theta_fit.log_det_precision, theta_fit.jitter_added});
  const Mat prior_hess = pt.hess_log_density(theta_fit.mode);
  // -1/2 log det(2 pi Sigma) with log det Sigma = -log det precision.
  const double log_det_term =
      -0.5 * (dt * std::log(2.0 * std::numbers::pi) - theta_fit.log_det_precision);
  return log_det_term - 0.5 * dt - pt.log_density(theta_fit.mode) -
         0.5 * (cov.cwiseProduct(prior_hess)).sum();
}

EigResult mc2la(const ExperimentModel& model, const PriorSpec& prior, const Vec& xi, Index n,
                const RunOptions& opts) {
  check_sizes(n, 1, 1);
  const auto count = static_cast<std::size_t>(n);
  std::vector<double> terms(count, kNaN);
  std::vector<char> failed(count, 0);
  std::vector<char> retried(count, 0);

  parallel_for(count, opts.threads, [&](std::size_t i) {
    const OuterDraw outer = draw_outer(model, prior, xi, opts.seed, i);
    for (const char* purpose : {"fit", "fit-retry"}) {
      RandomStream rng(opts.seed, purpose, i);
      try {
        const LaplaceFit fit = fit_theta_map(model, prior, outer.data, opts.solver, rng);
        terms[i] = mc2la_term(prior, fit);
        return;
      } catch (const FitError&) {
        retried[i] = 1;
      }
    }
    failed[i] = 1;
  });

  Index n_failed = 0, n_retry = 0;
  for (std::size_t i = 0; i < count; ++i) {
    n_failed += failed[i];
    n_retry += retried[i];
  }
  const double work = static_cast<double>(n) * model.work_per_evaluation();
  return summarize(std::move(terms), n, 0, 0, work, 0, n_failed, n_retry);
}

EigResult run_estimator(EstimatorKind kind, const ExperimentModel& model,
                        const PriorSpec& prior, const Vec& xi, Index n, Index m1, Index m2,
                        const RunOptions& opts) {
  switch (kind) {
    case EstimatorKind::kDlmc:
      return dlmc(model, prior, xi, n, m1, m2, opts);
    case EstimatorKind::kDlmc2is:
      return dlmc2is(model, prior, xi, n, m1, m2, opts);
    case EstimatorKind::kMc2la:
      return mc2la(model, prior, xi, n, opts);
  }
  throw std::invalid_argument("unknown estimator kind");
}

ToleranceRun run_to_tolerance(EstimatorKind kind, const ExperimentModel& model,
                              const PriorSpec& prior, const Vec& xi, double tol, double alpha,
                              const PilotConstants& pilot, const RunOptions& opts) {
  ToleranceRun run;
  if (kind == EstimatorKind::kMc2la) {
    run.allocation = allocate_mc2la(pilot, tol, alpha);
  } else if (pilot.c3) {
    run.allocation = allocate_with_discretization(pilot, tol, alpha);
  } else {
    run.allocation = allocate(pilot, tol, alpha);
  }
  run.result = run_estimator(kind, model, prior, xi, run.allocation.n_outer,
                             run.allocation.m1_inner, run.allocation.m2_inner, opts);
  return run;
}

}  // namespace nested_eig
