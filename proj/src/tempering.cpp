#include "funmix/tempering.hpp"

#include <cmath>

#include "funmix/errors.hpp"

namespace funmix {

TemperatureLadder build_ladder(arma::uword n_rungs, double beta_max) {
  if (n_rungs < 1) throw ConfigError("invalid ladder: need at least one rung", "tempering.n_rungs");
  if (!(beta_max >= 1.0) || !std::isfinite(beta_max))
    throw ConfigError("invalid ladder: beta_max must be >= 1", "tempering.beta_max");
  TemperatureLadder ladder;
  ladder.betas.set_size(n_rungs + 1);
  ladder.betas(0) = 1.0;
  for (arma::uword h = 1; h < n_rungs; ++h)
    ladder.betas(h) = std::pow(beta_max, static_cast<double>(h) / static_cast<double>(n_rungs));
  ladder.betas(n_rungs) = beta_max;
  return ladder;
}

SweepReport tempered_sweep(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta,
                           const SweepOptions& base) {
  if (!(beta > 0.0)) throw DataError("tempered sweep needs beta > 0");
  SweepOptions opt = base;
  opt.beta = beta;
  return sweep(s, ctx, rng, opt);
}

double tempered_log_ratio(const TemperatureLadder& ladder, const arma::vec& logliks) {
  const arma::uword nt = ladder.rungs();
  if (logliks.n_elem != 2 * nt + 1) throw DataError("tempered ratio needs 2 N_t + 1 log-likelihoods");
  const arma::vec& b = ladder.betas;
  double r = 0.0;
  for (arma::uword h = 0; h < nt; ++h) r += (b(h + 1) - b(h)) * logliks(h);
  // Theta_h on the way down was produced at beta_{2Nt-h+1}; its ratio
  // compares the next rung below with that one.
  for (arma::uword h = nt + 1; h <= 2 * nt; ++h) r += (b(2 * nt - h) - b(2 * nt - h + 1)) * logliks(h);
  return r;
}

TemperedResult tempered_transition(ModelState& s, const SamplerContext& ctx, const TemperatureLadder& ladder,
                                   Rng& rng, const SweepOptions& base) {
  const arma::uword nt = ladder.rungs();
  if (nt < 1) throw DataError("tempered transition needs a ladder with at least one rung");
  const ModelState original = s;
  arma::vec ll(2 * nt + 1);
  ll(0) = log_likelihood_conditional(s, ctx.data());
  SweepOptions opt = base;
  opt.reverse = false;
  for (arma::uword h = 1; h <= nt; ++h) {
    opt.beta = ladder.beta(h);
    ll(h) = sweep(s, ctx, rng, opt).log_likelihood;
  }
  opt.reverse = true;
  for (arma::uword h = nt + 1; h <= 2 * nt; ++h) {
    opt.beta = ladder.beta(2 * nt + 1 - h);
    ll(h) = sweep(s, ctx, rng, opt).log_likelihood;
  }
  TemperedResult out;
  out.log_ratio = tempered_log_ratio(ladder, ll);
  out.accepted = out.log_ratio >= 0.0 || std::log(rng.uniform()) < out.log_ratio;
  if (!out.accepted) s = original;
  return out;
}

}  // namespace funmix
