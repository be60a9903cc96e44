#include <doctest.h>

#include <cmath>

#include "nested_eig/builtin_models.hpp"
#include "nested_eig/design.hpp"
#include "oracles.hpp"

using namespace nested_eig;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

DesignProblem example1_problem(double start, int sweeps) {
  DesignProblem p;
  p.lower = v1(0.01);
  p.upper = v1(1.0);
  p.initial_design = v1(start);
  p.max_sweeps = sweeps;
  return p;
}

RunOptions seeded(std::uint64_t seed) {
  RunOptions o;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("example 1 design climbs to the upper bound") {
  const auto b = make_example1();
  const DesignResult r =
      optimize_design(example1_problem(0.5, 40), b.model, b.prior, EstimatorKind::kMc2la, seeded(1));
  CHECK(r.design[0] >= 0.95);
  CHECK(r.final_eig > r.initial_eig);
  CHECK(r.trace.front().coordinate == -1);
  for (const TraceRow& row : r.trace) {
    CHECK(row.design[0] >= 0.01);
    CHECK(row.design[0] <= 1.0);
  }
}

TEST_CASE("a zero step leaves the design unchanged") {
  const auto b = make_example1();
  DesignProblem p = example1_problem(0.4, 3);
  p.initial_step = Vec::Zero(1);
  const DesignResult r = optimize_design(p, b.model, b.prior, EstimatorKind::kMc2la, seeded(2));
  CHECK(r.design[0] == 0.4);
  CHECK(r.final_eig == r.initial_eig);
}

TEST_CASE("bounds are hard on a multi-coordinate design") {
  const auto pk = make_pk();
  DesignProblem p;
  p.lower = Vec::Constant(15, 0.5);
  p.upper = Vec::Constant(15, 24.0);
  p.initial_design = pk_geometric_design();
  p.minibatch_n = 30;
  p.max_sweeps = 1;
  p.initial_step = Vec::Constant(15, 30.0);
  const DesignResult r = optimize_design(p, pk.model, pk.prior, EstimatorKind::kMc2la, seeded(3));
  CHECK(r.trace.size() == 16);
  for (const TraceRow& row : r.trace) {
    CHECK((row.design.array() >= 0.5).all());
    CHECK((row.design.array() <= 24.0).all());
  }
  CHECK_THROWS_AS(optimize_design([&] {
                    DesignProblem q = p;
                    q.initial_design[0] = 30.0;
                    return q;
                  }(),
                                  pk.model, pk.prior, EstimatorKind::kMc2la, seeded(3)),
                  std::invalid_argument);
}

TEST_CASE("CRN partial derivative matches the analytic slope") {
  const auto b = make_example1();
  for (double xi : {0.1, 0.3, 0.6}) {
    const PartialDerivative d =
        crn_partial(EstimatorKind::kMc2la, b.model, b.prior, v1(xi), 0, 1e-2, 300, 1, 1, seeded(4));
    const double exact = 100.0 * xi / (1.0 + 100.0 * xi * xi);
    CHECK(std::abs(d.value - exact) <= 3.0 * d.std_error + 1e-3 * exact);
  }
}

TEST_CASE("sweep over example 1 is monotone") {
  const auto b = make_example1();
  std::vector<Vec> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(v1(0.1 * i));
  const auto rows = sweep_design(b.model, b.prior, grid, EstimatorKind::kMc2la, 1000, 1, 1, seeded(5));
  REQUIRE(rows.size() == 10);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].eig >= rows[i - 1].eig - 2.0 * rows[i - 1].std_error);
    CHECK(rows[i].status == "ok");
  }
  const auto one = sweep_design(b.model, b.prior, {v1(0.5)}, EstimatorKind::kDlmc2is, 200, 2, 2, seeded(5));
  CHECK(one.size() == 1);
}

TEST_CASE("standard error scales as one over root N") {
  const auto b = make_example1();
  const auto small = sweep_design(b.model, b.prior, {v1(0.5)}, EstimatorKind::kMc2la, 1000, 1, 1, seeded(6));
  const auto large = sweep_design(b.model, b.prior, {v1(0.5)}, EstimatorKind::kMc2la, 4000, 1, 1, seeded(7));
  CHECK(small[0].std_error / large[0].std_error == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("optimizer improves the minibatch EIG in most seeded runs") {
  const auto b = make_example1();
  int improved = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const DesignResult r =
        optimize_design(example1_problem(0.3, 3), b.model, b.prior, EstimatorKind::kMc2la, seeded(100 + s));
    if (r.final_eig > r.initial_eig) ++improved;
  }
  CHECK(improved >= 18);
}
