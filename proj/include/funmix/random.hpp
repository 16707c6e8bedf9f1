#pragma once

#include <armadillo>
#include <cstdint>
#include <random>

namespace funmix {

// Random stream for one chain. Wraps a 64-bit Mersenne twister; streams for
// parallel chains and multi-start stages are derived by hashing
// (seed, chain, stage) so that every candidate is reproducible on its own.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  static Rng stream(std::uint64_t seed, std::uint64_t chain, std::uint64_t stage = 0);

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential(double rate);
  // Gamma with shape/rate parameterization.
  double gamma(double shape, double rate);
  // log of a Gamma(shape, 1) draw; stable for shape << 1.
  double log_gamma_variate(double shape);
  // Inverse gamma with shape/scale parameterization.
  double inverse_gamma(double shape, double scale);
  arma::vec dirichlet(const arma::vec& concentration);
  // Normal(mean, sd^2) restricted to (lower, +inf).
  double truncated_normal(double mean, double sd, double lower = 0.0);

  arma::vec standard_normal(arma::uword n);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Draw from N(Q^{-1} b, Q^{-1}) given a symmetric positive definite
// precision Q and linear term b. Cholesky with a jitter ladder
// 1e-10 .. 1e-6 (relative to the mean diagonal) on failure.
arma::vec sample_gaussian_canonical(const arma::mat& precision, const arma::vec& linear, Rng& rng);

// Mean Q^{-1} b of the same canonical-form Gaussian.
arma::vec canonical_mean(const arma::mat& precision, const arma::vec& linear);

// Lower Cholesky factor with the jitter ladder. Throws NumericalError if all
// rungs fail.
arma::mat robust_cholesky(const arma::mat& spd);

}  // namespace funmix
