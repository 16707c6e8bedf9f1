#pragma once

#include <armadillo>
#include <utility>

#include "funmix/basis.hpp"
#include "funmix/data.hpp"

namespace funmix {

struct ModelDims {
  arma::uword K = 1;  // latent features
  arma::uword P = 1;  // basis size
  arma::uword M = 1;  // eigen-directions, 1 <= M <= K * P
  arma::uword N = 0;  // observations

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

// Z entries are kept inside [kZFloor, 1 - kZFloor].
inline constexpr double kZFloor = 1e-10;

// One full parameter configuration.
//
// Layout: phi and gamma are P x M x K cubes; slice k holds the vectors
// phi_k1 .. phi_kM as columns. delta is M x K.
struct ModelState {
  arma::mat nu;      // K x P, row k = nu_k
  arma::cube phi;    // P x M x K
  arma::mat chi;     // N x M
  arma::mat Z;       // N x K
  arma::vec pi;      // K
  double alpha3 = 1.0;
  double sigma2 = 1.0;
  arma::mat delta;   // M x K
  arma::cube gamma;  // P x M x K
  arma::vec a1;      // K
  arma::vec a2;      // K
  arma::vec tau;     // K

  // Zero-filled state with unit scale parameters and uniform memberships.
  static ModelState zeros(const ModelDims& dims);

  ModelDims dims() const;

  // Cumulative shrinkage prod_{n <= m} delta_nk (m is 0-based).
  double tau_tilde(arma::uword m, arma::uword k) const;

  // Throws DataError on shape mismatch or a violated positivity/simplex
  // constraint.
  void validate() const;

  // Clamp Z to [kZFloor, 1 - kZFloor] and renormalize rows; same for pi.
  void normalize_simplex();

  // Basis coefficients of observation i's conditional mean:
  // sum_k Z_ik (nu_k + sum_m chi_im phi_km).
  arma::vec fitted_coefficients(arma::uword i) const;

  // Basis coefficients of the chi-free mean: sum_k Z_ik nu_k.
  arma::vec mean_coefficients(arma::uword i) const;

  bool operator==(const ModelState& other) const;
};

// Conditional log-likelihood log p(Y | Theta) including chi. Computed from
// explicit residuals.
double log_likelihood_conditional(const ModelState& state, const DesignSet& designs);

// Per-observation terms of the above.
arma::vec log_likelihood_terms(const ModelState& state, const DesignSet& designs);

// Residual sum of squares of observation i from the sufficient statistics
// y'y - 2 c'S y + c'S S'c. Fast path used inside the sampler.
double residual_sum_squares(const ObservationDesign& d, const arma::vec& coef);

// chi-integrated log-likelihood: Y_i ~ N(S_i' sum_k Z_ik nu_k, V_i + sigma2 I).
double log_likelihood_marginal(const ModelState& state, const DesignSet& designs);

// Log densities of each single point y_ij under the chi-integrated model
// (variance V_i(t_ij, t_ij) + sigma2). Concatenated over observations.
arma::vec pointwise_marginal_log_density(const ModelState& state, const DesignSet& designs);

// mu^(k) on a grid (dimension x n).
arma::vec mean_function(const ModelState& state, arma::uword k, const BasisSystem& basis, const arma::mat& grid);

// C^(k,k')(s, t) = B(s)' sum_m phi_km phi_k'm' B(t).
arma::mat covariance_function(const ModelState& state, arma::uword k, arma::uword kp, const BasisSystem& basis,
                              const arma::mat& grid_s, const arma::mat& grid_t);

// Same from precomputed design matrices (P x n_s, P x n_t).
arma::mat covariance_from_design(const ModelState& state, arma::uword k, arma::uword kp, const arma::mat& design_s,
                                 const arma::mat& design_t);

// KP x KP matrix with block (k, k') = sum_m phi_km phi_k'm'.
arma::mat feature_covariance(const ModelState& state);

// Mean and covariance of Y_i under the chi-integrated model.
std::pair<arma::vec, arma::mat> observation_moments(const ModelState& state, arma::uword i,
                                                    const ObservationDesign& design);

}  // namespace funmix
