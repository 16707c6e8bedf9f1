#include "funmix/random.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>

#include "funmix/errors.hpp"
#include "funmix/stats.hpp"

namespace funmix {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

Rng Rng::stream(std::uint64_t seed, std::uint64_t chain, std::uint64_t stage) {
  const std::uint64_t key = splitmix64(splitmix64(splitmix64(seed) ^ chain) ^ (stage * 0x2545f4914f6cdd1dULL));
  return Rng(key);
}

double Rng::uniform() {
  // 53 random bits, shifted by half an ulp so that 0 is never returned.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  // Marsaglia polar method without caching, so that copies of a stream stay
  // in lockstep regardless of call parity.
  while (true) {
    const double u = 2.0 * uniform() - 1.0;
    const double v = 2.0 * uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

double Rng::exponential(double rate) { return -std::log(uniform()) / rate; }

double Rng::log_gamma_variate(double shape) {
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a + 1) * U^{1/a}
    return log_gamma_variate(shape + 1.0) + std::log(uniform()) / shape;
  }
  // Marsaglia & Tsang
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return std::log(d * v);
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

double Rng::gamma(double shape, double rate) { return std::exp(log_gamma_variate(shape)) / rate; }

double Rng::inverse_gamma(double shape, double scale) { return scale / gamma(shape, 1.0); }

arma::vec Rng::dirichlet(const arma::vec& concentration) {
  arma::vec logs(concentration.n_elem);
  for (arma::uword k = 0; k < logs.n_elem; ++k) logs(k) = log_gamma_variate(concentration(k));
  const double top = logs.max();
  arma::vec out = arma::exp(logs - top);
  return out / arma::accu(out);
}

double Rng::truncated_normal(double mean, double sd, double lower) {
  const double a = (lower - mean) / sd;
  if (a > 30.0) {
    // Far tail: exponential rejection (Robert 1995).
    const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
    while (true) {
      const double z = a + exponential(lambda);
      const double diff = z - lambda;
      if (std::log(uniform()) <= -0.5 * diff * diff) return mean + sd * z;
    }
  }
  // Inverse cdf on the upper tail mass Phi(-a), in log space.
  const double log_tail = stats::log_normal_cdf(-a);
  const double log_v = log_tail + std::log(uniform());
  const double z = -stats::normal_quantile(std::exp(log_v));
  return std::max(mean + sd * z, std::nextafter(lower, std::numeric_limits<double>::infinity()));
}

arma::vec Rng::standard_normal(arma::uword n) {
  arma::vec out(n);
  for (auto& v : out) v = normal();
  return out;
}

arma::mat robust_cholesky(const arma::mat& spd) {
  arma::mat lower;
  if (arma::chol(lower, spd, "lower")) return lower;
  const double scale = std::max(arma::mean(arma::abs(spd.diag())), 1e-300);
  for (double jitter = 1e-10; jitter <= 1.0001e-6; jitter *= 10.0) {
    arma::mat shifted = spd;
    shifted.diag() += jitter * scale;
    if (arma::chol(lower, shifted, "lower")) return lower;
  }
  throw NumericalError("matrix is not positive definite even after jitter");
}

arma::vec canonical_mean(const arma::mat& precision, const arma::vec& linear) {
  const arma::mat lower = robust_cholesky(precision);
  const arma::vec w = arma::solve(arma::trimatl(lower), linear);
  return arma::solve(arma::trimatu(lower.t()), w);
}

arma::vec sample_gaussian_canonical(const arma::mat& precision, const arma::vec& linear, Rng& rng) {
  const arma::mat lower = robust_cholesky(precision);
  const arma::vec w = arma::solve(arma::trimatl(lower), linear);
  const arma::vec z = rng.standard_normal(linear.n_elem);
  return arma::solve(arma::trimatu(lower.t()), w + z);
}

namespace stats {

double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  // Asymptotic Mills-ratio expansion.
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - 0.5 * kLogTwoPi + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw NumericalError("normal_quantile: probability outside [0, 1]");
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace stats

}  // namespace funmix
