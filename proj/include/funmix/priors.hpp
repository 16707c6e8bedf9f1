#pragma once

#include <armadillo>

#include "funmix/basis.hpp"
#include "funmix/model.hpp"
#include "funmix/random.hpp"

namespace funmix {

// Fixed prior constants and MH proposal tuning. The defaults are not taken
// from any published fit; they are weakly informative choices.
struct Hyperparameters {
  double nu_gamma = 3.0;
  double alpha1 = 2.0, beta1 = 1.0;
  double alpha2 = 3.0, beta2 = 1.0;
  double alpha_tau = 1.0, beta_tau = 1.0;
  double alpha0 = 1.0, beta0 = 1.0;
  arma::vec c;  // Dirichlet concentration for pi; empty means all ones
  double b = 1.0;
  double a_z = 100.0, a_pi = 100.0;
  double sigma_alpha3 = 0.5;
  double eps1 = 0.5, eps2 = 0.5;

  // Concentration vector for a K-feature model.
  arma::vec concentration(arma::uword K) const;

  // Throws ConfigError for non-positive values or alpha2 <= beta2.
  void validate() const;
};

// Hierarchical draw from the prior. The random-walk prior on nu is
// intrinsic; its null-space (constant) direction is drawn with variance
// 1 / tau_k so that the result is proper.
ModelState sample_prior(const Hyperparameters& hyper, const ModelDims& dims, const arma::mat& penalty, Rng& rng);

// v'Pen v evaluated on the mean-centered vector. The penalty annihilates
// constants, so this is exact, but it stays accurate (and non-negative) when
// v carries a huge constant offset.
double penalty_quadratic(const arma::mat& penalty, const arma::rowvec& v);

// Sum of all prior log-densities. The nu term is
// -tau/2 nu'P nu + rank(P)/2 log tau - rank(P)/2 log(2 pi).
double log_prior(const ModelState& state, const Hyperparameters& hyper, const arma::mat& penalty);

// Pieces of log_prior, used by the sampler tests.
double log_prior_phi(const ModelState& state, const Hyperparameters& hyper);
double log_prior_nu(const ModelState& state, const Hyperparameters& hyper, const arma::mat& penalty);
double log_prior_membership(const ModelState& state, const Hyperparameters& hyper);

}  // namespace funmix
