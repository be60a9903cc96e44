#include <doctest.h>

#include <cmath>

#include "nested_eig/allocation.hpp"
#include "nested_eig/builtin_models.hpp"
#include "nested_eig/estimators.hpp"
#include "nested_eig/inner_loops.hpp"
#include "nested_eig/numerics.hpp"
#include "oracles.hpp"

using namespace nested_eig;

namespace {

const double kEig05 = oracle::example1_eig(0.5);

Vec v1(double a) { return Vec::Constant(1, a); }

RunOptions seeded(std::uint64_t seed, int threads = 1) {
  RunOptions o;
  o.seed = seed;
  o.threads = threads;
  return o;
}

bool same_result(const EigResult& a, const EigResult& b) {
  if (a.estimate != b.estimate || a.sample_variance_outer != b.sample_variance_outer) return false;
  if (a.outer_terms.size() != b.outer_terms.size()) return false;
  for (std::size_t i = 0; i < a.outer_terms.size(); ++i) {
    const double x = a.outer_terms[i], y = b.outer_terms[i];
    if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("estimator names round-trip") {
  for (auto k : {EstimatorKind::kDlmc, EstimatorKind::kDlmc2is, EstimatorKind::kMc2la}) {
    CHECK(parse_estimator_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_estimator_kind("mlmc"), std::invalid_argument);
}

TEST_CASE("a parameter-free forward map carries no information") {
  ExperimentModel constant(ModelDims{2, 1, 1, 1}, 1e-2 * Mat::Identity(2, 2), 1,
                           [](const Vec&, const Vec&, const Vec&) { return Vec::Ones(2).eval(); });
  const auto b = make_example1();
  const EigResult r = dlmc(constant, b.prior, v1(0.5), 500, 20, 20, seeded(1));
  CHECK(std::abs(r.estimate) < 1e-12);
}

TEST_CASE("degenerate sizes execute") {
  const auto b = make_example1();
  CHECK(std::isfinite(dlmc(b.model, b.prior, v1(0.5), 1, 1, 1, seeded(2)).estimate));
  CHECK(std::isfinite(dlmc2is(b.model, b.prior, v1(0.5), 1, 1, 1, seeded(2)).estimate));
  CHECK(std::isfinite(mc2la(b.model, b.prior, v1(0.5), 1, seeded(2)).estimate));
}

TEST_CASE("DLMC on example 1") {
  const auto b = make_example1();
  const EigResult r = dlmc(b.model, b.prior, v1(0.5), 20000, 1000, 1000, seeded(3));
  CHECK(std::abs(r.estimate - kEig05) < 0.1);
  CHECK(r.work_units == doctest::Approx(20000.0 * 2000.0));
}

TEST_CASE("DLMC2IS on example 1 with two inner samples") {
  const auto b = make_example1();
  const EigResult r = dlmc2is(b.model, b.prior, v1(0.5), 20000, 2, 2, seeded(4));
  CHECK(std::abs(r.estimate - kEig05) < 0.1);
  CHECK(std::abs(r.estimate - kEig05) < 4.0 * r.standard_error());
  CHECK(r.failed_fit_count == 0);
  CHECK(r.degenerate_inner_count == 0);
}

TEST_CASE("DLMC2IS with prior proposals is DLMC") {
  const auto b = make_example1();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const EigResult a = dlmc(b.model, b.prior, v1(0.5), 200, 30, 30, seeded(s));
    const EigResult c = dlmc2is(b.model, b.prior, v1(0.5), 200, 30, 30, seeded(s), ProposalKind::kPrior);
    CHECK(same_result(a, c));
  }
}

TEST_CASE("Laplace proposals are exact on example 1") {
  const auto b = make_example1();
  for (std::uint64_t i = 0; i < 20; ++i) {
    const OuterDraw o = draw_outer(b.model, b.prior, v1(0.5), 5, i);
    const InnerWeights w =
        inner_log_weights(b.model, b.prior, o, 50, 50, ProposalKind::kLaplace, SolverConfig{}, 5, i);
    CHECK(sample_moments(w.log_w1).variance < 1e-8);
    CHECK(sample_moments(w.log_w2).variance < 1e-8);
  }
}

TEST_CASE("MC2LA is unbiased on example 1") {
  const auto b = make_example1();
  const EigResult r = mc2la(b.model, b.prior, v1(0.5), 10000, seeded(6));
  CHECK(std::abs(r.estimate - kEig05) <= 3.0 * std::sqrt(r.sample_variance_outer / r.n_outer));
  CHECK(r.work_units == doctest::Approx(10000.0));
}

TEST_CASE("MC2LA summand with a Gaussian prior") {
  const auto b = make_example1();
  Mat prec(1, 1);
  prec << 26.0;
  const LaplaceFit fit = make_gaussian_fit(v1(0.3), prec);
  // Prior N(0, 1): log pi = -1/2 log(2 pi) - theta^2/2, Hessian -1.
  const double expected = -0.5 * std::log(2.0 * std::numbers::pi / 26.0) - 0.5 +
                          0.5 * std::log(2.0 * std::numbers::pi) + 0.5 * 0.09 + 0.5 / 26.0;
  CHECK(mc2la_term(b.prior, fit) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("estimators agree with the oracle on the no-nuisance model") {
  const auto b = make_example1_no_nuisance();
  for (double xi : {0.25, 1.0}) {
    const double target = oracle::example1_eig(xi);
    const EigResult is = dlmc2is(b.model, b.prior, v1(xi), 5000, 1, 1, seeded(7));
    CHECK(std::abs(is.estimate - target) < 4.0 * is.standard_error() + 1e-3);
    const EigResult la = mc2la(b.model, b.prior, v1(xi), 2000, seeded(7));
    CHECK(std::abs(la.estimate - target) < 4.0 * la.standard_error() + 1e-3);
  }
}

TEST_CASE("results do not depend on the thread count") {
  const auto pk = make_pk();
  const Vec xi = pk_geometric_design();
  for (auto kind : {EstimatorKind::kDlmc, EstimatorKind::kDlmc2is, EstimatorKind::kMc2la}) {
    const EigResult one = run_estimator(kind, pk.model, pk.prior, xi, 40, 5, 5, seeded(8, 1));
    const EigResult many = run_estimator(kind, pk.model, pk.prior, xi, 40, 5, 5, seeded(8, 8));
    CHECK(same_result(one, many));
  }
}

TEST_CASE("run_to_tolerance uses the allocation") {
  const auto b = make_example1();
  PilotConstants c;
  c.set_bias_constants(0.02, 0.05);
  c.d3 = 1.3;
  const ToleranceRun huge = run_to_tolerance(EstimatorKind::kDlmc, b.model, b.prior, v1(0.5), 1e6, 0.05, c, seeded(9));
  CHECK(huge.allocation.kappa > 0.999);
  CHECK(huge.result.n_outer == 1);

  const ToleranceRun run = run_to_tolerance(EstimatorKind::kDlmc, b.model, b.prior, v1(0.5), 0.2, 0.05, c, seeded(9));
  CHECK(run.result.n_outer == run.allocation.n_outer);
  CHECK(run.result.work_units ==
        doctest::Approx(static_cast<double>(run.allocation.n_outer *
                                            (run.allocation.m1_inner + run.allocation.m2_inner))));

  PilotConstants m;
  m.estimator = "mc2la";
  m.d3 = 1.0;
  m.mc2la_bias = 0.0;
  const ToleranceRun la = run_to_tolerance(EstimatorKind::kMc2la, b.model, b.prior, v1(0.5), 0.2, 0.05, m, seeded(9));
  CHECK(la.result.n_outer == la.allocation.n_outer);
  CHECK(la.result.work_units == doctest::Approx(static_cast<double>(la.allocation.n_outer)));
}
