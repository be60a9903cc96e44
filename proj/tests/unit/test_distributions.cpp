#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "nested_eig/distributions.hpp"
#include "nested_eig/numerics.hpp"
#include "oracles.hpp"

using namespace nested_eig;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("uniform box samples stay in the box") {
  const auto u = Distribution::uniform(Vec::Zero(2), Vec::Ones(2));
  RandomStream rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Vec x = u.sample(rng);
    CHECK((x.array() >= 0.0).all());
    CHECK((x.array() <= 1.0).all());
  }
  PriorSpec prior(u, Distribution::uniform(Vec::Zero(2), Vec::Ones(2)));
  const auto [theta, phi] = sample_prior(prior, rng);
  CHECK((theta.array() >= 0.0).all());
  CHECK((phi.array() <= 1.0).all());
}

TEST_CASE("standard normal sample mean converges") {
  const auto n = Distribution::normal(Vec::Zero(2), Mat::Identity(2, 2));
  RandomStream rng(12);
  Vec sum = Vec::Zero(2);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) sum += n.sample(rng);
  CHECK((sum / draws).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("lognormal log-sample mean matches its log-mean") {
  const auto ln = Distribution::lognormal(Vec::Constant(1, std::log(0.1)), Vec::Constant(1, 0.05));
  RandomStream rng(13);
  double sum = 0.0, sq = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double l = std::log(ln.sample(rng)[0]);
    sum += l;
    sq += l * l;
  }
  const double mean = sum / draws;
  CHECK(std::abs(mean - std::log(0.1)) < 0.005);
  // Second moment identifies the variance reading: var(log x) = 0.05.
  CHECK(sq / draws - mean * mean == doctest::Approx(0.05).epsilon(0.02));
}

TEST_CASE("log_prior_joint closed-form values") {
  const auto sn = Distribution::normal(Vec::Zero(1), Mat::Identity(1, 1));
  CHECK(sn.log_density(Vec::Zero(1)) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));

  const auto u = Distribution::uniform(Vec::Zero(1), Vec::Ones(1));
  CHECK(u.log_density(Vec::Constant(1, 0.5)) == 0.0);
  CHECK(u.log_density(Vec::Constant(1, 1.5)) == -std::numeric_limits<double>::infinity());

  const auto ln = Distribution::lognormal(Vec::Zero(1), Vec::Constant(1, 0.05));
  CHECK(ln.log_density(Vec::Ones(1)) ==
        doctest::Approx(-0.5 * std::log(0.1 * std::numbers::pi)).epsilon(1e-12));
  CHECK(ln.log_density(Vec::Ones(1)) == doctest::Approx(0.5789).epsilon(1e-4));

  PriorSpec prior(sn, u);
  CHECK(log_prior_joint(prior, Vec::Zero(1), Vec::Constant(1, 0.5)) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));
  CHECK(log_prior_joint(prior, Vec::Zero(1), Vec::Constant(1, 2.0)) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("normal factor matches the multivariate density and has Hessian -precision") {
  Mat cov(2, 2);
  cov << 2.0, 0.3, 0.3, 0.5;
  const Vec mean = vec2(1.0, -1.0);
  const auto n = Distribution::normal(mean, cov);
  const Vec x = vec2(0.2, 0.4);
  CHECK(n.log_density(x) == doctest::Approx(oracle::normal_log_pdf(x, mean, cov)).epsilon(1e-12));
  const Mat h = n.hess_log_density(x);
  CHECK(oracle::max_rel_diff(h, -cov.inverse()) < 1e-14);
  CHECK(oracle::max_rel_diff(n.grad_log_density(x), -cov.inverse() * (x - mean)) < 1e-12);
}

TEST_CASE("uniform factor density and derivatives") {
  const auto u = Distribution::uniform(vec2(0.0, -1.0), vec2(2.0, 3.0));
  CHECK(u.log_density(vec2(1.0, 0.0)) == doctest::Approx(-std::log(2.0) - std::log(4.0)));
  CHECK(u.grad_log_density(vec2(1.0, 0.0)).norm() == 0.0);
  CHECK(u.hess_log_density(vec2(1.0, 0.0)).norm() == 0.0);
  const Vec p = u.project_to_interior(vec2(5.0, -7.0));
  CHECK(p[0] < 2.0);
  CHECK(p[0] > 2.0 - 1e-8);
  CHECK(p[1] > -1.0);
  CHECK(u.in_support(p));
}

TEST_CASE("lognormal closed form, gradient and Hessian") {
  const Vec mu = vec2(0.3, -1.0);
  const Vec s2 = vec2(0.05, 0.2);
  const auto ln = Distribution::lognormal(mu, s2);
  const Vec x = vec2(1.7, 0.4);
  double expected = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double l = std::log(x[i]);
    expected -= l + 0.5 * std::log(2.0 * std::numbers::pi * s2[i]) +
                (l - mu[i]) * (l - mu[i]) / (2.0 * s2[i]);
  }
  CHECK(ln.log_density(x) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(ln.log_density(vec2(-1.0, 1.0)) == -std::numeric_limits<double>::infinity());
  CHECK(ln.center()[0] == doctest::Approx(std::exp(0.3)));
}

TEST_CASE("analytic prior gradients and Hessians match finite differences") {
  RandomStream rng(21);
  Mat cov(2, 2);
  cov << 1.0, 0.4, 0.4, 0.8;
  const Distribution dists[] = {
      Distribution::normal(vec2(0.5, -0.5), cov),
      Distribution::lognormal(vec2(0.0, std::log(0.1)), vec2(0.05, 0.05)),
  };
  for (const auto& d : dists) {
    for (int k = 0; k < 100; ++k) {
      const Vec x = d.sample(rng);
      auto f = [&](const Vec& v) { return d.log_density(v); };
      const Vec g_fd = fd_gradient(f, x);
      const Vec g = d.grad_log_density(x);
      CHECK((g - g_fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
      auto gf = [&](const Vec& v) { return d.grad_log_density(v); };
      const Mat h_fd = fd_jacobian(gf, x);
      const Mat h = d.hess_log_density(x);
      CHECK((h - h_fd).norm() <= 1e-5 * std::max(1.0, h.norm()));
    }
  }
}

TEST_CASE("conditional prior: joint gradient and Hessian match finite differences") {
  // phi | theta ~ N(2 theta, 0.5): the cross term of the Hessian is nonzero.
  PriorSpec prior(
      Distribution::normal(Vec::Zero(1), Mat::Identity(1, 1)),
      [](const Vec& theta) {
        return Distribution::normal(Vec::Constant(1, 2.0 * theta[0]), 0.5 * Mat::Identity(1, 1));
      },
      1);
  CHECK_FALSE(prior.independent());
  RandomStream rng(22);
  for (int k = 0; k < 20; ++k) {
    const auto [t, p] = sample_prior(prior, rng);
    Vec z(2);
    z << t, p;
    auto f = [&](const Vec& v) { return log_prior_joint(prior, v.head(1), v.tail(1)); };
    const Vec g = grad_log_prior_joint(prior, t, p);
    CHECK((g - fd_gradient(f, z)).norm() < 1e-5 * std::max(1.0, g.norm()));
    // Exact Hessian of -theta^2/2 - (phi - 2 theta)^2 / (2 * 0.5).
    Mat exact(2, 2);
    exact << -1.0 - 4.0 / 0.5, 2.0 / 0.5, 2.0 / 0.5, -1.0 / 0.5;
    CHECK(oracle::max_rel_diff(hess_log_prior_joint(prior, t, p), exact) < 1e-5);
  }
}
