#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "nested_eig/builtin_models.hpp"
#include "nested_eig/errors.hpp"
#include "nested_eig/model.hpp"
#include "oracles.hpp"

using namespace nested_eig;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

ExperimentModel scalar_model(double var) {
  return ExperimentModel(ModelDims{1, 1, 0, 0}, Mat::Constant(1, 1, var), 1,
                         [](const Vec&, const Vec& theta, const Vec&) { return theta; });
}

}  // namespace

TEST_CASE("sample_data adds unbiased noise with the right covariance") {
  const auto b = make_example1();
  RandomStream rng(5);
  const Vec xi = v1(0.3), theta = v1(0.7), phi = v1(-0.2);
  const Vec g = b.model.forward(xi, theta, phi);
  const int draws = 100000;
  Vec sum = Vec::Zero(2);
  Mat cov = Mat::Zero(2, 2);
  for (int i = 0; i < draws; ++i) {
    const Dataset d = sample_data(b.model, xi, theta, phi, rng);
    const Vec r = d.y.col(0) - g;
    sum += r;
    cov += r * r.transpose();
  }
  CHECK((sum / draws).cwiseAbs().maxCoeff() < 3e-3);
  cov /= draws;
  const Mat target = 1e-2 * Mat::Identity(2, 2);
  CHECK((cov - target).norm() / target.norm() < 0.02);
}

TEST_CASE("example 1 noise-free mean and data shape") {
  const auto b = make_example1();
  const Vec g = b.model.forward(v1(1.0), v1(2.0), v1(5.0));
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 0.0);

  ExperimentModel rep(ModelDims{2, 1, 1, 1}, 1e-2 * Mat::Identity(2, 2), 3,
                      [](const Vec& xi, const Vec& t, const Vec& p) {
                        return v2(xi[0] * t[0], (1.0 - xi[0]) * p[0]);
                      });
  RandomStream rng(1);
  const Dataset d = sample_data(rep, v1(0.5), v1(1.0), v1(1.0), rng);
  CHECK(d.y.cols() == 3);
  CHECK(d.y.allFinite());
}

TEST_CASE("log_likelihood closed-form values") {
  const ExperimentModel m = scalar_model(1.0);
  Dataset d{Mat::Constant(1, 1, 0.3), Vec(0)};
  CHECK(log_likelihood(m, d, v1(0.3), Vec(0)) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(log_likelihood(m, d, v1(2.3), Vec(0)) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi) - 2.0).epsilon(1e-14));
  CHECK(-0.5 * std::log(2.0 * std::numbers::pi) == doctest::Approx(-0.91894).epsilon(1e-5));

  const auto b = make_example1();
  Dataset e{Mat(2, 1), v1(0.5)};
  e.y << 0.1, 0.1;
  CHECK(log_likelihood(b.model, e, v1(0.0), v1(0.0)) ==
        doctest::Approx(-std::log(2.0 * std::numbers::pi * 1e-2) - 1.0).epsilon(1e-13));
}

TEST_CASE("log_likelihood is invariant under column permutations") {
  const auto b = make_example1();
  ExperimentModel rep(ModelDims{2, 1, 1, 1}, b.model.noise_cov(), 4,
                      [](const Vec& xi, const Vec& t, const Vec& p) {
                        return v2(xi[0] * t[0], (1.0 - xi[0]) * p[0]);
                      });
  RandomStream rng(9);
  Dataset d = sample_data(rep, v1(0.4), v1(0.1), v1(0.2), rng);
  const double base = log_likelihood(rep, d, v1(0.3), v1(-0.1));
  Dataset p = d;
  p.y.col(0) = d.y.col(3);
  p.y.col(3) = d.y.col(0);
  p.y.col(1).swap(p.y.col(2));
  CHECK(log_likelihood(rep, p, v1(0.3), v1(-0.1)) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("likelihood integrates to one over y (Gauss-Hermite)") {
  for (double var : {1e-2, 0.7, 4.0}) {
    const ExperimentModel m = scalar_model(var);
    const auto [x, w] = oracle::gauss_hermite(60);
    // y = mu + sqrt(2 var) x turns the Gaussian into exp(-x^2).
    const double mu = 0.37;
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double y = mu + std::sqrt(2.0 * var) * x[i];
      Dataset d{Mat::Constant(1, 1, y), Vec(0)};
      const double ll = log_likelihood(m, d, v1(mu), Vec(0));
      total += w[i] * std::exp(ll + x[i] * x[i]) * std::sqrt(2.0 * var);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("residual") {
  const auto b = make_example1();
  const Vec g = b.model.forward(v1(0.3), v1(1.0), v1(2.0));
  CHECK(residual(b.model, g, v1(0.3), v1(1.0), v1(2.0)).norm() == 0.0);
  const Vec r = residual(b.model, v2(2.0, 0.0), v1(1.0), v1(1.0), v1(0.0));
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 0.0);
  const Vec y = v2(0.4, -0.2), delta = v2(0.01, 3.0);
  const Vec diff = residual(b.model, y + delta, v1(0.3), v1(1.0), v1(2.0)) -
                   residual(b.model, y, v1(0.3), v1(1.0), v1(2.0));
  CHECK((diff - delta).norm() < 1e-14);
}

TEST_CASE("finite-difference Jacobians") {
  const auto b = make_example1();
  for (double xi : {0.0, 0.25, 0.8}) {
    const Mat j = jac_phi_fd(b.model, v1(xi), v1(0.4), v1(1.3));
    CHECK(std::abs(j(0, 0)) < 1e-8);
    CHECK(j(1, 0) == doctest::Approx(1.0 - xi).epsilon(1e-8));
  }
  ExperimentModel constant(ModelDims{2, 1, 2, 0}, Mat::Identity(2, 2), 1,
                           [](const Vec&, const Vec&, const Vec&) { return v2(1.0, 2.0); });
  CHECK(jac_phi_fd(constant, Vec(0), v1(0.0), v2(3.0, 4.0)).norm() == 0.0);

  // PK at the prior medians: analytic against central differences.
  const auto pk = make_pk();
  const Vec theta = v2(1.0, 0.1), phi = v1(20.0);
  const Vec xi = pk_geometric_design();
  const Mat ja = pk.model.jac_phi(xi, theta, phi);
  const Mat jf = jac_phi_fd(pk.model, xi, theta, phi);
  CHECK((ja - jf).norm() <= 1e-5 * ja.norm());
  const Mat jza = pk.model.jac_z(xi, theta, phi);
  const Mat jzf = jac_z_fd(pk.model, xi, theta, phi);
  CHECK((jza - jzf).norm() <= 1e-5 * jza.norm());
}

TEST_CASE("analytic Jacobians of the built-in models agree with finite differences") {
  RandomStream rng(77);
  struct Case {
    ModelBundle bundle;
    Vec xi;
  };
  std::vector<Case> cases;
  cases.push_back({make_example1(), v1(0.35)});
  cases.push_back({make_pk(), pk_geometric_design()});
  cases.push_back({make_example1_no_nuisance(), v1(0.6)});
  for (auto& c : cases) {
    for (int k = 0; k < 100; ++k) {
      const auto [theta, phi] = sample_prior(c.bundle.prior, rng);
      const Mat jt = c.bundle.model.jac_theta(c.xi, theta, phi);
      const Mat jt_fd = jac_theta_fd(c.bundle.model, c.xi, theta, phi);
      CHECK((jt - jt_fd).norm() <= 1e-5 * std::max(1.0, jt.norm()));
      const Mat jp = c.bundle.model.jac_phi(c.xi, theta, phi);
      const Mat jp_fd = jac_phi_fd(c.bundle.model, c.xi, theta, phi);
      CHECK((jp - jp_fd).norm() <= 1e-5 * std::max(1.0, jp.norm()));
    }
  }
}

TEST_CASE("forward failures carry the offending inputs") {
  ExperimentModel bad(ModelDims{1, 1, 1, 0}, Mat::Identity(1, 1), 1,
                      [](const Vec&, const Vec& t, const Vec& p) { return v1(std::log(t[0] - p[0])); });
  try {
    bad.forward(Vec(0), v1(1.0), v1(2.0));
    FAIL("expected ForwardMapError");
  } catch (const ForwardMapError& e) {
    CHECK(e.theta()[0] == 1.0);
    CHECK(e.phi()[0] == 2.0);
  }
}

TEST_CASE("noise covariance validation") {
  Mat asym(2, 2);
  asym << 1.0, 0.1, 0.0, 1.0;
  auto fwd = [](const Vec&, const Vec& t, const Vec&) { return v2(t[0], t[0]); };
  CHECK_THROWS_AS(ExperimentModel(ModelDims{2, 1, 0, 0}, asym, 1, fwd), std::invalid_argument);
  Mat indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(ExperimentModel(ModelDims{2, 1, 0, 0}, indef, 1, fwd), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentModel(ModelDims{2, 1, 0, 0}, Mat::Identity(2, 2), 0, fwd),
                  std::invalid_argument);
}

TEST_CASE("work per evaluation follows h^-gamma") {
  ExperimentModel m = scalar_model(1.0);
  CHECK(m.work_per_evaluation() == 1.0);
  m.with_discretization(Discretization{2.0, 1.0, 0.1});
  CHECK(m.work_per_evaluation() == doctest::Approx(100.0));
}
