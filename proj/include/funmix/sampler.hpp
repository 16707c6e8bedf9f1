#pragma once

#include <armadillo>
#include <map>
#include <string>
#include <vector>

#include "funmix/data.hpp"
#include "funmix/model.hpp"
#include "funmix/priors.hpp"
#include "funmix/random.hpp"

namespace funmix {

// Everything a sweep reads but never changes.
struct SamplerContext {
  const DesignSet* designs = nullptr;
  Hyperparameters hyper;
  arma::mat penalty;  // random-walk penalty
  arma::mat gram;     // basis Gram matrix, only needed for the orthogonal update

  const DesignSet& data() const { return *designs; }
};

// Which blocks a sweep touches. Multiple start and the tests freeze subsets.
struct BlockMask {
  bool phi = true, delta = true, gamma = true, a = true, nu = true, tau = true;
  bool z = true, pi = true, alpha3 = true, chi = true, sigma2 = true;

  static BlockMask none() { return {false, false, false, false, false, false, false, false, false, false, false}; }
};

struct SweepOptions {
  double beta = 1.0;  // likelihood power; 1 is the untempered posterior
  bool orthogonal_phi = false;
  // Apply blocks (and loops inside blocks) in reverse order. This is the
  // reversal of the forward sweep, used on the down pass of a tempered
  // transition.
  bool reverse = false;
  BlockMask blocks;
};

struct SweepReport {
  std::vector<char> a1, a2, z;  // per feature / per observation acceptance
  char pi = 0, alpha3 = 0;
  double log_likelihood = 0.0;

  // Flattened "a1[0]" -> accepted view.
  std::map<std::string, bool> accepted() const;
};

// Canonical Gaussian N(Q^{-1} b, Q^{-1}).
struct GaussianConditional {
  arma::mat precision;
  arma::vec linear;
};

// Gamma(shape, rate); for sigma2 the pair is the inverse-gamma shape/scale.
struct GammaConditional {
  double shape = 1.0;
  double rate = 1.0;
};

// ---- Gibbs full conditionals (beta scales every data term) ----

GaussianConditional phi_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword j, arma::uword m,
                                    double beta = 1.0);
GaussianConditional nu_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword j, double beta = 1.0);
GaussianConditional chi_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword i, arma::uword m,
                                    double beta = 1.0);
GammaConditional delta_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword n, arma::uword k);
GammaConditional gamma_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword p, arma::uword m,
                                   arma::uword k);
GammaConditional tau_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword k);
GammaConditional sigma2_conditional(const ModelState& s, const SamplerContext& ctx, double beta = 1.0);

// Orthogonality constraints for phi_jm: rows of L' phi = -c. Columns of L
// that vanish identically are dropped.
struct LinearConstraint {
  arma::mat L;  // P x r
  arma::vec c;  // r
};
LinearConstraint phi_orthogonality_constraint(const ModelState& s, const arma::mat& gram, arma::uword j, arma::uword m);

// Condition a draw x ~ N(mu, Sigma) on L'x = -c (exact for Gaussians).
// Throws NumericalError("constraint-singular ...") when L'Sigma L is singular.
arma::vec condition_on_constraint(const arma::vec& x, const arma::mat& covariance, const LinearConstraint& con);

// ---- Metropolis targets (unnormalized log densities) ----

double log_target_a1(const ModelState& s, const Hyperparameters& h, arma::uword k, double a1);
double log_target_a2(const ModelState& s, const Hyperparameters& h, arma::uword k, double a2);
double log_target_z(const ModelState& s, const SamplerContext& ctx, arma::uword i, const arma::vec& z,
                    double beta = 1.0);
double log_target_pi(const ModelState& s, const Hyperparameters& h, const arma::vec& pi);
double log_target_alpha3(const ModelState& s, const Hyperparameters& h, double alpha3);

// log Q(current | proposed) - log Q(proposed | current) for the random walk
// truncated to (0, inf) with standard deviation sd.
double truncated_normal_log_hastings(double current, double proposed, double sd);

// Same for the Dirichlet proposal Dir(a * current).
double dirichlet_log_hastings(const arma::vec& current, const arma::vec& proposed, double a);

// Proposals with a component below this are rejected outright.
inline constexpr double kProposalFloor = 1e-12;

// ---- block updates ----

void update_phi(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta = 1.0, bool reverse = false);
void update_phi_orthogonal(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta = 1.0,
                           bool reverse = false);
void update_delta(ModelState& s, const SamplerContext& ctx, Rng& rng, bool reverse = false);
void update_gamma(ModelState& s, const SamplerContext& ctx, Rng& rng);
void update_a1_a2(ModelState& s, const SamplerContext& ctx, Rng& rng, SweepReport* report = nullptr);
void update_nu(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta = 1.0, bool reverse = false);
void update_tau(ModelState& s, const SamplerContext& ctx, Rng& rng);
void update_z(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta = 1.0, SweepReport* report = nullptr);
void update_pi(ModelState& s, const SamplerContext& ctx, Rng& rng, SweepReport* report = nullptr);
void update_alpha3(ModelState& s, const SamplerContext& ctx, Rng& rng, SweepReport* report = nullptr);
void update_chi(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta = 1.0, bool reverse = false);
void update_sigma2(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta = 1.0);

// One Metropolis-within-Gibbs sweep in the order
// phi, delta, gamma, a1/a2, nu, tau, Z, pi, alpha3, chi, sigma2.
SweepReport sweep(ModelState& s, const SamplerContext& ctx, Rng& rng, const SweepOptions& opt = {});

}  // namespace funmix
