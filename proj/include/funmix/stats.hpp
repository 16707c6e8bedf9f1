#pragma once

#include <armadillo>
#include <cmath>
#include <numbers>

// Log densities shared by priors, sampler targets and tests.
namespace funmix::stats {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

inline double log_normal(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var)) - 0.5 * r * r / var;
}

// Gamma(shape, rate).
inline double log_gamma_pdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

// Inverse gamma(shape, scale).
inline double log_inverse_gamma_pdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

inline double log_exponential_pdf(double x, double rate) { return std::log(rate) - rate * x; }

// log of the multivariate Beta function B(a) = prod Gamma(a_k) / Gamma(sum a).
inline double log_multivariate_beta(const arma::vec& a) {
  double s = 0.0;
  for (double v : a) s += std::lgamma(v);
  return s - std::lgamma(arma::accu(a));
}

inline double log_dirichlet_pdf(const arma::vec& x, const arma::vec& a) {
  double s = -log_multivariate_beta(a);
  for (arma::uword k = 0; k < x.n_elem; ++k) s += (a(k) - 1.0) * std::log(x(k));
  return s;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// log Phi(z), accurate in the far lower tail.
double log_normal_cdf(double z);

// Inverse of the standard normal cdf.
double normal_quantile(double p);

// Density of N(mean, sd^2) truncated to (lower, +inf), in log space.
inline double log_truncated_normal_pdf(double x, double mean, double sd, double lower = 0.0) {
  const double z = (x - mean) / sd;
  return -0.5 * (kLogTwoPi + z * z) - std::log(sd) - log_normal_cdf((mean - lower) / sd);
}

}  // namespace funmix::stats
