#pragma once

#include <functional>
#include <span>

#include "nested_eig/types.hpp"

namespace nested_eig {

// log(sum_i exp(x_i)); -inf when every term is -inf or the span is empty.
double log_sum_exp(std::span<const double> log_terms);

// log((1/n) sum_i exp(x_i)).
double log_mean_exp(std::span<const double> log_terms);

// Sample variance of exp(x_i) divided by the squared sample mean of exp(x_i),
// evaluated on max-shifted values so neither moment under- or overflows.
// Requires at least two finite terms; returns NaN otherwise.
double relative_sample_variance_of_exp(std::span<const double> log_terms);

// Mean and unbiased sample variance of the finite entries.
struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;
  Index count = 0;
};
SampleMoments sample_moments(std::span<const double> values);

// Symmetrized SPD matrix with its Cholesky factor. When the plain
// factorization fails, lambda * I is added with lambda doubling from 1e-10
// until it succeeds; the final lambda is reported in `jitter`.
struct SpdFactor {
  Mat matrix;
  Mat lower;
  double log_det = 0.0;
  double jitter = 0.0;
};
SpdFactor factor_spd(const Mat& m);

// x^T A^{-1} x and tr(A^{-1} B) from a factor.
double inverse_quadratic_form(const SpdFactor& f, const Vec& x);
Mat inverse(const SpdFactor& f);

// Finite-difference step rules. The cube-root rule is used for first
// derivatives and the fourth-root rule for second derivatives.
double fd_step_first(double x);
double fd_step_second(double x);

using VectorFunction = std::function<Vec(const Vec&)>;
using ScalarFunction = std::function<double(const Vec&)>;

// Central differences; d_out x d_in.
Mat fd_jacobian(const VectorFunction& f, const Vec& x);

// Central differences; falls back to a one-sided difference when one probe
// is not finite (e.g. at a support boundary).
Vec fd_gradient(const ScalarFunction& f, const Vec& x);

// Central second differences of a scalar function. `f0` is f(x).
Mat fd_hessian(const ScalarFunction& f, const Vec& x, double f0);

// Inverse of the standard normal CDF.
double normal_quantile(double p);

}  // namespace nested_eig
