#include "nested_eig/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <boost/math/distributions/normal.hpp>

#include "nested_eig/errors.hpp"

namespace nested_eig {

double log_sum_exp(std::span<const double> log_terms) {
  double max_term = -std::numeric_limits<double>::infinity();
  for (double x : log_terms) max_term = std::max(max_term, x);
  if (!std::isfinite(max_term)) return max_term;
  double sum = 0.0;
  for (double x : log_terms) sum += std::exp(x - max_term);
  return max_term + std::log(sum);
}

double log_mean_exp(std::span<const double> log_terms) {
  if (log_terms.empty()) return -std::numeric_limits<double>::infinity();
  return log_sum_exp(log_terms) - std::log(static_cast<double>(log_terms.size()));
}

double relative_sample_variance_of_exp(std::span<const double> log_terms) {
  double max_term = -std::numeric_limits<double>::infinity();
  for (double x : log_terms) max_term = std::max(max_term, x);
  const auto n = static_cast<double>(log_terms.size());
  if (!std::isfinite(max_term) || log_terms.size() < 2) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double mean = 0.0;
  for (double x : log_terms) mean += std::exp(x - max_term);
  mean /= n;
  double ss = 0.0;
  for (double x : log_terms) {
    const double d = std::exp(x - max_term) - mean;
    ss += d * d;
  }
  return (ss / (n - 1.0)) / (mean * mean);
}

SampleMoments sample_moments(std::span<const double> values) {
  SampleMoments m;
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    sum += v;
    ++m.count;
  }
  if (m.count == 0) {
    m.mean = std::numeric_limits<double>::quiet_NaN();
    m.variance = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  m.mean = sum / static_cast<double>(m.count);
  double ss = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    ss += (v - m.mean) * (v - m.mean);
  }
  m.variance = m.count > 1 ? ss / static_cast<double>(m.count - 1) : 0.0;
  return m;
}

SpdFactor factor_spd(const Mat& m) {
  SpdFactor out;
  out.matrix = 0.5 * (m + m.transpose());
  if (out.matrix.size() == 0) {
    out.lower = out.matrix;
    return out;
  }
  if (!out.matrix.allFinite()) throw FitError("matrix to factor has non-finite entries");
  const Index n = out.matrix.rows();
  const double scale = std::max(1.0, std::abs(out.matrix.trace()) / static_cast<double>(n));
  double lambda = 0.0;
  Eigen::LLT<Mat> llt;
  while (true) {
    Mat trial = out.matrix;
    trial.diagonal().array() += lambda;
    llt.compute(trial);
    if (llt.info() == Eigen::Success) {
      out.matrix = std::move(trial);
      break;
    }
    lambda = lambda == 0.0 ? 1e-10 : 2.0 * lambda;
    if (lambda > scale) throw FitError("matrix is not positive definite even after jitter");
  }
  out.lower = llt.matrixL();
  out.jitter = lambda;
  out.log_det = 2.0 * out.lower.diagonal().array().log().sum();
  return out;
}

double inverse_quadratic_form(const SpdFactor& f, const Vec& x) {
  const Vec w = f.lower.triangularView<Eigen::Lower>().solve(x);
  return w.squaredNorm();
}

Mat inverse(const SpdFactor& f) {
  const Index n = f.lower.rows();
  Mat linv = f.lower.triangularView<Eigen::Lower>().solve(Mat::Identity(n, n));
  return linv.transpose() * linv;
}

double fd_step_first(double x) {
  static const double kCbrtEps = std::cbrt(std::numeric_limits<double>::epsilon());
  return kCbrtEps * std::max(1.0, std::abs(x));
}

double fd_step_second(double x) {
  static const double kQuartEps = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  return kQuartEps * std::max(1.0, std::abs(x));
}

Mat fd_jacobian(const VectorFunction& f, const Vec& x) {
  Mat jac;
  Vec probe = x;
  for (Index j = 0; j < x.size(); ++j) {
    const double h = fd_step_first(x[j]);
    probe[j] = x[j] + h;
    const Vec up = f(probe);
    probe[j] = x[j] - h;
    const Vec down = f(probe);
    probe[j] = x[j];
    if (jac.size() == 0) jac.resize(up.size(), x.size());
    jac.col(j) = (up - down) / (2.0 * h);
  }
  if (x.size() == 0) jac.resize(f(x).size(), 0);
  return jac;
}

Vec fd_gradient(const ScalarFunction& f, const Vec& x) {
  Vec grad(x.size());
  Vec probe = x;
  double f0 = std::numeric_limits<double>::quiet_NaN();
  for (Index j = 0; j < x.size(); ++j) {
    const double h = fd_step_first(x[j]);
    probe[j] = x[j] + h;
    const double up = f(probe);
    probe[j] = x[j] - h;
    const double down = f(probe);
    probe[j] = x[j];
    if (std::isfinite(up) && std::isfinite(down)) {
      grad[j] = (up - down) / (2.0 * h);
      continue;
    }
    if (std::isnan(f0)) f0 = f(x);
    if (std::isfinite(up)) {
      grad[j] = (up - f0) / h;
    } else if (std::isfinite(down)) {
      grad[j] = (f0 - down) / h;
    } else {
      grad[j] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return grad;
}

Mat fd_hessian(const ScalarFunction& f, const Vec& x, double f0) {
  const Index n = x.size();
  Mat hess(n, n);
  Vec step(n);
  for (Index i = 0; i < n; ++i) step[i] = fd_step_second(x[i]);
  Vec probe = x;
  for (Index i = 0; i < n; ++i) {
    probe[i] = x[i] + step[i];
    const double up = f(probe);
    probe[i] = x[i] - step[i];
    const double down = f(probe);
    probe[i] = x[i];
    hess(i, i) = (up - 2.0 * f0 + down) / (step[i] * step[i]);
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      double corners[4];
      int k = 0;
      for (double si : {1.0, -1.0}) {
        for (double sj : {1.0, -1.0}) {
          probe[i] = x[i] + si * step[i];
          probe[j] = x[j] + sj * step[j];
          corners[k++] = f(probe);
        }
      }
      probe[i] = x[i];
      probe[j] = x[j];
      hess(i, j) = (corners[0] - corners[1] - corners[2] + corners[3]) /
                   (4.0 * step[i] * step[j]);
      hess(j, i) = hess(i, j);
    }
  }
  return hess;
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

}  // namespace nested_eig
