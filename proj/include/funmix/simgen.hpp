#pragma once

#include <armadillo>
#include <cstdint>
#include <vector>

#include "funmix/basis.hpp"
#include "funmix/data.hpp"
#include "funmix/model.hpp"
#include "funmix/random.hpp"

namespace funmix {

enum class Study { Study1, Study2, Custom };

struct MixtureComponent {
  double weight = 1.0;
  arma::vec concentration;
};

struct SimSpec {
  Study study = Study::Study1;
  arma::uword N = 40;
  arma::uword n_points = 100;
  arma::uword K = 2;
  arma::uword M = 3;
  BasisSpec basis;
  double sigma2 = 0.001;
  arma::mat nu_mean;             // K x P
  double nu_scale = 4.0;         // nu_k ~ N(mean, scale * penalty), see draw_truth
  arma::vec phi_variance;        // per eigen-direction m
  bool orthogonal_phi = true;    // draw phi from the complement of span(nu)
  std::vector<MixtureComponent> mixture;
  // false: block assignment floor(w_c N) per component, remainder to the last.
  bool stochastic_assignment = false;
  std::uint64_t seed = 1;

  void validate() const;
};

// Two-feature design: descending / ascending linear means, shrinking
// eigen-scales 2.25, 1, 0.49 inside the orthogonal complement of span(nu).
SimSpec study1_spec(arma::uword N = 40);
// Three features with a flat third mean, unconstrained phi with variances
// 1, 0.5, 0.2.
SimSpec study2_spec(arma::uword N = 100);

// Arithmetic sequence from `first` with step `step`, length P.
arma::rowvec linear_mean(double first, double step, arma::uword P);

// Component index of each observation.
std::vector<arma::uword> mixture_assignment(const SimSpec& spec, Rng& rng);

// True parameters. nu_k = mean + U_r diag(sqrt(scale lambda_r)) e + sqrt(scale) e0 1/sqrt(P), where
// penalty = U diag(lambda) U'; the last term makes the singular covariance
// proper along the constant direction.
ModelState draw_truth(const SimSpec& spec, const BasisSystem& basis, Rng& rng);

// Fresh chi ~ N(0, 1) and Z from the membership mixture for spec.N
// observations; nu, Phi and sigma2 are kept. Replicates share a truth this way.
void draw_allocations(ModelState& truth, const SimSpec& spec, Rng& rng);

// Orthonormal basis (P x (P - r)) of the complement of the row space of nu.
arma::mat orthogonal_complement(const arma::mat& nu);

// n_points equally spaced evaluation points per observation, values equal
// to the model mean plus N(0, sigma2) noise.
Dataset synthesize(const ModelState& truth, const SimSpec& spec, const BasisSystem& basis, Rng& rng);

}  // namespace funmix
