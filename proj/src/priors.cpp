#include "funmix/priors.hpp"

#include <algorithm>
#include <cmath>

#include "funmix/errors.hpp"
#include "funmix/stats.hpp"

namespace funmix {

namespace {

void require_positive(double v, const char* key) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("must be a positive finite number", key);
}

}  // namespace

arma::vec Hyperparameters::concentration(arma::uword K) const {
  if (c.is_empty()) return arma::vec(K, arma::fill::ones);
  if (c.n_elem == 1) return arma::vec(K, arma::fill::value(c(0)));
  if (c.n_elem != K) throw ConfigError("length must equal K", "hyper.c");
  return c;
}

void Hyperparameters::validate() const {
  require_positive(nu_gamma, "hyper.nu_gamma");
  require_positive(alpha1, "hyper.alpha1");
  require_positive(beta1, "hyper.beta1");
  require_positive(alpha2, "hyper.alpha2");
  require_positive(beta2, "hyper.beta2");
  require_positive(alpha_tau, "hyper.alpha_tau");
  require_positive(beta_tau, "hyper.beta_tau");
  require_positive(alpha0, "hyper.alpha0");
  require_positive(beta0, "hyper.beta0");
  require_positive(b, "hyper.b");
  require_positive(a_z, "hyper.a_z");
  require_positive(a_pi, "hyper.a_pi");
  require_positive(sigma_alpha3, "hyper.sigma_alpha3");
  require_positive(eps1, "hyper.eps1");
  require_positive(eps2, "hyper.eps2");
  for (double v : c) require_positive(v, "hyper.c");
  if (!(alpha2 > beta2)) throw ConfigError("alpha2 must exceed beta2", "hyper.alpha2");
}

ModelState sample_prior(const Hyperparameters& hyper, const ModelDims& dims, const arma::mat& penalty, Rng& rng) {
  dims.validate();
  if (penalty.n_rows != dims.P || penalty.n_cols != dims.P) throw DataError("penalty size does not match P");
  ModelState s = ModelState::zeros(dims);
  const arma::uword K = dims.K, P = dims.P, M = dims.M, N = dims.N;

  for (arma::uword k = 0; k < K; ++k) {
    s.a1(k) = rng.gamma(hyper.alpha1, hyper.beta1);
    s.a2(k) = rng.gamma(hyper.alpha2, hyper.beta2);
    s.delta(0, k) = rng.gamma(s.a1(k), 1.0);
    for (arma::uword m = 1; m < M; ++m) s.delta(m, k) = rng.gamma(s.a2(k), 1.0);
    for (arma::uword m = 0; m < M; ++m) {
      const double tt = s.tau_tilde(m, k);
      for (arma::uword p = 0; p < P; ++p) {
        s.gamma(p, m, k) = rng.gamma(0.5 * hyper.nu_gamma, 0.5 * hyper.nu_gamma);
        s.phi(p, m, k) = rng.normal() / std::sqrt(s.gamma(p, m, k) * tt);
      }
    }
  }

  // Range space of the penalty carries precision tau * P; the constant
  // direction gets precision tau.
  arma::mat proper = penalty;
  proper += arma::mat(P, P, arma::fill::value(1.0 / static_cast<double>(P)));
  const arma::vec zero(P, arma::fill::zeros);
  for (arma::uword k = 0; k < K; ++k) {
    s.tau(k) = rng.gamma(hyper.alpha_tau, hyper.beta_tau);
    s.nu.row(k) = sample_gaussian_canonical(s.tau(k) * proper, zero, rng).t();
  }

  s.pi = K > 1 ? rng.dirichlet(hyper.concentration(K)) : arma::vec{1.0};
  s.alpha3 = rng.exponential(hyper.b);
  for (arma::uword i = 0; i < N; ++i) {
    if (K > 1) s.Z.row(i) = rng.dirichlet(s.alpha3 * s.pi).t();
  }
  s.sigma2 = rng.inverse_gamma(hyper.alpha0, hyper.beta0);
  for (arma::uword i = 0; i < N; ++i)
    for (arma::uword m = 0; m < M; ++m) s.chi(i, m) = rng.normal();
  s.normalize_simplex();
  return s;
}

double log_prior_phi(const ModelState& s, const Hyperparameters& hyper) {
  const arma::uword K = s.phi.n_slices, P = s.phi.n_rows, M = s.phi.n_cols;
  double lp = 0.0;
  for (arma::uword k = 0; k < K; ++k) {
    lp += stats::log_gamma_pdf(s.a1(k), hyper.alpha1, hyper.beta1);
    lp += stats::log_gamma_pdf(s.a2(k), hyper.alpha2, hyper.beta2);
    lp += stats::log_gamma_pdf(s.delta(0, k), s.a1(k), 1.0);
    for (arma::uword m = 1; m < M; ++m) lp += stats::log_gamma_pdf(s.delta(m, k), s.a2(k), 1.0);
    for (arma::uword m = 0; m < M; ++m) {
      const double tt = s.tau_tilde(m, k);
      for (arma::uword p = 0; p < P; ++p) {
        const double g = s.gamma(p, m, k);
        lp += stats::log_gamma_pdf(g, 0.5 * hyper.nu_gamma, 0.5 * hyper.nu_gamma);
        lp += stats::log_normal(s.phi(p, m, k), 0.0, 1.0 / (g * tt));
      }
    }
  }
  return lp;
}

double penalty_quadratic(const arma::mat& penalty, const arma::rowvec& v) {
  const arma::rowvec c = v - arma::mean(v);
  return std::max(0.0, arma::as_scalar(c * penalty * c.t()));
}

double log_prior_nu(const ModelState& s, const Hyperparameters& hyper, const arma::mat& penalty) {
  const double rank = static_cast<double>(s.nu.n_cols > 1 ? s.nu.n_cols - 1 : 0);
  double lp = 0.0;
  for (arma::uword k = 0; k < s.nu.n_rows; ++k) {
    const arma::rowvec v = s.nu.row(k);
    const double quad = penalty_quadratic(penalty, v);
    lp += -0.5 * s.tau(k) * quad + 0.5 * rank * (std::log(s.tau(k)) - stats::kLogTwoPi);
    lp += stats::log_gamma_pdf(s.tau(k), hyper.alpha_tau, hyper.beta_tau);
  }
  return lp;
}

double log_prior_membership(const ModelState& s, const Hyperparameters& hyper) {
  const arma::uword K = s.Z.n_cols;
  double lp = stats::log_exponential_pdf(s.alpha3, hyper.b);
  if (K == 1) return lp;
  lp += stats::log_dirichlet_pdf(s.pi, hyper.concentration(K));
  const arma::vec conc = s.alpha3 * s.pi;
  const double norm = stats::log_multivariate_beta(conc);
  for (arma::uword i = 0; i < s.Z.n_rows; ++i) {
    double row = -norm;
    for (arma::uword k = 0; k < K; ++k) row += (conc(k) - 1.0) * std::log(std::max(s.Z(i, k), kZFloor));
    lp += row;
  }
  return lp;
}

double log_prior(const ModelState& state, const Hyperparameters& hyper, const arma::mat& penalty) {
  double lp = log_prior_phi(state, hyper) + log_prior_nu(state, hyper, penalty) + log_prior_membership(state, hyper);
  lp += stats::log_inverse_gamma_pdf(state.sigma2, hyper.alpha0, hyper.beta0);
  lp += -0.5 * arma::accu(arma::square(state.chi)) - 0.5 * static_cast<double>(state.chi.n_elem) * stats::kLogTwoPi;
  return lp;
}

}  // namespace funmix
