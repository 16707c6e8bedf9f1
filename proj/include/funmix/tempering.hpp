#pragma once

#include <armadillo>

#include "funmix/sampler.hpp"

namespace funmix {

// Geometric ladder beta_h = beta_max^(h / N_t), h = 0..N_t.
struct TemperatureLadder {
  arma::vec betas;

  arma::uword rungs() const noexcept { return betas.n_elem ? betas.n_elem - 1 : 0; }
  double beta(arma::uword h) const { return betas(h); }
};

TemperatureLadder build_ladder(arma::uword n_rungs, double beta_max);

// A sweep whose likelihood is raised to the power beta.
SweepReport tempered_sweep(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta,
                           const SweepOptions& base = {});

struct TemperedResult {
  bool accepted = false;
  double log_ratio = 0.0;
};

// Up pass with beta_1..beta_Nt, down pass with beta_Nt..beta_1 (down sweeps
// run in reverse block order), then a single accept/reject of the end
// state. On rejection the state is left exactly as it was.
TemperedResult tempered_transition(ModelState& s, const SamplerContext& ctx, const TemperatureLadder& ladder,
                                   Rng& rng, const SweepOptions& base = {});

// log acceptance ratio from the conditional log-likelihoods of the 2 N_t + 1
// visited states Theta_0..Theta_2Nt.
double tempered_log_ratio(const TemperatureLadder& ladder, const arma::vec& logliks);

}  // namespace funmix
