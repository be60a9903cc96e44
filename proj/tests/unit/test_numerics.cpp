#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "nested_eig/errors.hpp"
#include "nested_eig/numerics.hpp"
#include "nested_eig/random.hpp"

using namespace nested_eig;

TEST_CASE("log_sum_exp is stable for large and tiny terms") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  const std::vector<double> tiny{-1000.0, -1001.0};
  CHECK(log_sum_exp(tiny) == doctest::Approx(-1000.0 + std::log1p(std::exp(-1.0))));
  const double ninf = -std::numeric_limits<double>::infinity();
  const std::vector<double> none{ninf, ninf};
  CHECK(log_sum_exp(none) == ninf);
  CHECK(log_mean_exp(std::vector<double>{}) == ninf);
  const std::vector<double> mixed{ninf, 0.0};
  CHECK(log_mean_exp(mixed) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("relative variance of exp matches the direct formula") {
  const std::vector<double> lw{0.1, -0.3, 0.7, 0.2};
  double mean = 0.0;
  for (double x : lw) mean += std::exp(x);
  mean /= 4.0;
  double var = 0.0;
  for (double x : lw) var += (std::exp(x) - mean) * (std::exp(x) - mean);
  var /= 3.0;
  CHECK(relative_sample_variance_of_exp(lw) == doctest::Approx(var / (mean * mean)));
  // Shift invariance: a common offset of 800 would overflow exp() directly.
  std::vector<double> shifted = lw;
  for (double& x : shifted) x += 800.0;
  CHECK(relative_sample_variance_of_exp(shifted) == doctest::Approx(var / (mean * mean)));
  CHECK(std::isnan(relative_sample_variance_of_exp(std::vector<double>{1.0})));
}

TEST_CASE("sample moments skip non-finite entries") {
  const std::vector<double> v{1.0, 2.0, std::numeric_limits<double>::quiet_NaN(), 3.0};
  const SampleMoments m = sample_moments(v);
  CHECK(m.count == 3);
  CHECK(m.mean == doctest::Approx(2.0));
  CHECK(m.variance == doctest::Approx(1.0));
}

TEST_CASE("factor_spd adds jitter only when needed") {
  Mat a(2, 2);
  a << 4.0, 1.0, 1.0, 3.0;
  const SpdFactor f = factor_spd(a);
  CHECK(f.jitter == 0.0);
  CHECK(f.log_det == doctest::Approx(std::log(11.0)));
  CHECK(((f.lower * f.lower.transpose()) - a).norm() < 1e-12);

  Mat singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;
  const SpdFactor g = factor_spd(singular);
  CHECK(g.jitter > 0.0);
  CHECK(g.jitter < 1e-4);

  Mat negative = -Mat::Identity(2, 2);
  CHECK_THROWS_AS(factor_spd(negative), FitError);

  const Vec x = Vec::Constant(2, 1.0);
  CHECK(inverse_quadratic_form(f, x) == doctest::Approx(x.dot(a.inverse() * x)));
  CHECK((inverse(f) - a.inverse()).norm() < 1e-12);
}

TEST_CASE("finite differences reproduce polynomial derivatives") {
  auto f = [](const Vec& x) { return x[0] * x[0] * x[1] + 3.0 * x[1]; };
  Vec x(2);
  x << 1.5, -2.0;
  const Vec g = fd_gradient(f, x);
  CHECK(g[0] == doctest::Approx(2.0 * 1.5 * -2.0).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(1.5 * 1.5 + 3.0).epsilon(1e-8));
  const Mat h = fd_hessian(f, x, f(x));
  CHECK(h(0, 0) == doctest::Approx(-4.0).epsilon(1e-5));
  CHECK(h(0, 1) == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(h(1, 1) == doctest::Approx(0.0).epsilon(1e-5));

  auto v = [](const Vec& x) {
    Vec out(2);
    out << std::sin(x[0]), x[0] * x[1];
    return out;
  };
  const Mat j = fd_jacobian(v, x);
  CHECK(j(0, 0) == doctest::Approx(std::cos(1.5)).epsilon(1e-8));
  CHECK(j(1, 0) == doctest::Approx(-2.0).epsilon(1e-8));
  CHECK(j(1, 1) == doctest::Approx(1.5).epsilon(1e-8));
}

TEST_CASE("fd_gradient falls back to one-sided differences at a support edge") {
  auto f = [](const Vec& x) {
    return x[0] < 0.0 ? -std::numeric_limits<double>::infinity() : x[0] * x[0];
  };
  const Vec x = Vec::Zero(1);
  CHECK(std::abs(fd_gradient(f, x)[0]) < 1e-4);
}

TEST_CASE("step rules scale with the magnitude of x") {
  CHECK(fd_step_first(0.0) == doctest::Approx(std::cbrt(std::numeric_limits<double>::epsilon())));
  CHECK(fd_step_first(100.0) == doctest::Approx(100.0 * fd_step_first(1.0)));
  CHECK(fd_step_second(-10.0) == doctest::Approx(10.0 * fd_step_second(1.0)));
}

TEST_CASE("normal quantile") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
}

TEST_CASE("random substreams are reproducible and distinct") {
  RandomStream a(42, "outer", 7), b(42, "outer", 7), c(42, "outer", 8), d(42, "inner", 7);
  const double x = a.normal();
  CHECK(x == b.normal());
  CHECK(x != c.normal());
  CHECK(x != d.normal());
  RandomStream u(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}
