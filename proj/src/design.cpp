#include "nested_eig/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "nested_eig/errors.hpp"
#include "nested_eig/numerics.hpp"

namespace nested_eig {
namespace {

std::optional<EigResult> try_estimate(EstimatorKind kind, const ExperimentModel& model,
                                      const PriorSpec& prior, const Vec& xi, Index n, Index m1,
                                      Index m2, const RunOptions& opts) {
  try {
    return run_estimator(kind, model, prior, xi, n, m1, m2, opts);
  } catch (const EstimationError&) {
    return std::nullopt;
  } catch (const ForwardMapError&) {
    return std::nullopt;
  }
}

}  // namespace

PartialDerivative crn_partial(EstimatorKind kind, const ExperimentModel& model,
                              const PriorSpec& prior, const Vec& xi, Index j, double delta,
                              Index n, Index m1, Index m2, const RunOptions& opts,
                              const Vec* lower, const Vec* upper) {
  Vec up = xi, down = xi;
  up[j] += delta;
  down[j] -= delta;
  if (upper != nullptr) up[j] = std::min(up[j], (*upper)[j]);
  if (lower != nullptr) down[j] = std::max(down[j], (*lower)[j]);
  const double width = up[j] - down[j];
  if (!(width > 0.0)) throw std::invalid_argument("finite-difference probes coincide");
  const EigResult ru = run_estimator(kind, model, prior, up, n, m1, m2, opts);
  const EigResult rd = run_estimator(kind, model, prior, down, n, m1, m2, opts);
  std::vector<double> diff(ru.outer_terms.size());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = (ru.outer_terms[i] - rd.outer_terms[i]) / width;
  }
  const SampleMoments m = sample_moments(diff);
  PartialDerivative d;
  d.value = m.mean;
  d.std_error = std::sqrt(m.variance / static_cast<double>(std::max<Index>(1, m.count)));
  return d;
}

DesignResult optimize_design(const DesignProblem& p, const ExperimentModel& model,
                             const PriorSpec& prior, EstimatorKind kind,
                             const RunOptions& opts) {
  const Index d = p.initial_design.size();
  if (p.lower.size() != d || p.upper.size() != d) {
    throw std::invalid_argument("design bounds do not match the design dimension");
  }
  if ((p.initial_design.array() < p.lower.array()).any() ||
      (p.initial_design.array() > p.upper.array()).any()) {
    throw std::invalid_argument("initial design lies outside the bounds");
  }
  if (p.minibatch_n < 1) throw std::invalid_argument("minibatch size must be at least 1");

  std::vector<Index> order = p.coordinate_order;
  if (order.empty()) {
    for (Index j = 0; j < d; ++j) order.push_back(j);
  }
  const Vec step0 = p.initial_step.size() == d ? p.initial_step : Vec(0.05 * (p.upper - p.lower));

  auto eval = [&](const Vec& xi, std::uint64_t seed) {
    RunOptions o = opts;
    o.seed = seed;
    return try_estimate(kind, model, prior, xi, p.minibatch_n, p.minibatch_m1, p.minibatch_m2,
                        o);
  };

  DesignResult out;
  Vec xi = p.initial_design;
  const std::uint64_t shared_seed = derive_seed(opts.seed, "design-endpoints", 0);
  {
    const auto r = eval(xi, shared_seed);
    if (!r) throw EstimationError("estimator failed at the initial design");
    out.initial_eig = r->estimate;
    out.trace.push_back({0, -1, xi, r->estimate, r->standard_error()});
  }

  std::uint64_t step_index = 0;
  for (int sweep = 1; sweep <= p.max_sweeps; ++sweep) {
    double max_move = 0.0;
    const double decay = 1.0 / std::sqrt(static_cast<double>(sweep));
    for (Index j : order) {
      const std::uint64_t seed = derive_seed(opts.seed, "design", step_index++);
      double step = step0[j] * decay;
      if (!(step > 0.0)) continue;

      RunOptions o = opts;
      o.seed = seed;
      std::optional<PartialDerivative> grad;
      try {
        grad = crn_partial(kind, model, prior, xi, j, p.fd_step_design, p.minibatch_n,
                           p.minibatch_m1, p.minibatch_m2, o, &p.lower, &p.upper);
      } catch (const EstimationError&) {
      } catch (const ForwardMapError&) {
      }
      if (!grad || !std::isfinite(grad->value) || grad->value == 0.0) continue;

      const auto current = eval(xi, seed);
      if (!current) continue;
      const double direction = grad->value > 0.0 ? 1.0 : -1.0;
      bool accepted = false;
      for (int attempt = 0; attempt < 2 && !accepted; ++attempt, step *= 0.5) {
        Vec candidate = xi;
        candidate[j] = std::clamp(xi[j] + direction * step, p.lower[j], p.upper[j]);
        if (candidate[j] == xi[j]) break;
        const auto trial = eval(candidate, seed);
        if (!trial || trial->estimate < current->estimate) continue;
        max_move = std::max(max_move, std::abs(candidate[j] - xi[j]));
        xi = candidate;
        out.trace.push_back({sweep, j, xi, trial->estimate, trial->standard_error()});
        accepted = true;
      }
      if (!accepted) {
        out.trace.push_back({sweep, j, xi, current->estimate, current->standard_error()});
      }
    }
    if (max_move <= p.move_tol) break;
  }

  const auto final_eval = eval(xi, shared_seed);
  if (!final_eval) throw EstimationError("estimator failed at the final design");
  out.final_eig = final_eval->estimate;
  out.design = xi;
  return out;
}

std::vector<SweepRow> sweep_design(const ExperimentModel& model, const PriorSpec& prior,
                                   const std::vector<Vec>& grid, EstimatorKind kind, Index n,
                                   Index m1, Index m2, const RunOptions& opts) {
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (const Vec& xi : grid) {
    SweepRow row;
    row.design = xi;
    if (const auto r = try_estimate(kind, model, prior, xi, n, m1, m2, opts)) {
      row.eig = r->estimate;
      row.std_error = r->standard_error();
    } else {
      row.eig = std::numeric_limits<double>::quiet_NaN();
      row.std_error = std::numeric_limits<double>::quiet_NaN();
      row.status = "failed";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace nested_eig
