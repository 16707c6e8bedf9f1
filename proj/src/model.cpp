#include "funmix/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "funmix/errors.hpp"
#include "funmix/stats.hpp"

namespace funmix {

namespace {

void require_shape(bool ok, const char* what) {
  if (!ok) throw DataError(std::string("invalid state: ") + what);
}

// log N(y; mean, cov) via Cholesky, with one jitter retry.
double log_mvn(const arma::vec& y, const arma::vec& mean, const arma::mat& cov) {
  arma::mat lower;
  if (!arma::chol(lower, cov, "lower")) {
    arma::mat shifted = cov;
    shifted.diag() += 1e-10 * arma::trace(cov) / static_cast<double>(cov.n_rows);
    if (!arma::chol(lower, shifted, "lower"))
      throw NumericalError("marginal covariance is not positive definite");
  }
  const arma::vec w = arma::solve(arma::trimatl(lower), y - mean);
  return -0.5 * static_cast<double>(y.n_elem) * stats::kLogTwoPi - arma::accu(arma::log(lower.diag())) -
         0.5 * arma::dot(w, w);
}

// P x M matrix of per-observation loadings a_m = sum_k Z_ik phi_km.
arma::mat mixed_loadings(const ModelState& s, arma::uword i) {
  arma::mat a(s.phi.n_rows, s.phi.n_cols, arma::fill::zeros);
  for (arma::uword k = 0; k < s.Z.n_cols; ++k) a += s.Z(i, k) * s.phi.slice(k);
  return a;
}

}  // namespace

void ModelDims::validate() const {
  if (K < 1) throw DataError("K must be at least 1");
  if (P < 1) throw DataError("P must be at least 1");
  if (M < 1 || M > K * P) throw DataError("M must satisfy 1 <= M <= K * P");
}

ModelState ModelState::zeros(const ModelDims& d) {
  ModelState s;
  s.nu.zeros(d.K, d.P);
  s.phi.zeros(d.P, d.M, d.K);
  s.chi.zeros(d.N, d.M);
  s.Z.set_size(d.N, d.K);
  s.Z.fill(1.0 / static_cast<double>(d.K));
  s.pi.set_size(d.K);
  s.pi.fill(1.0 / static_cast<double>(d.K));
  s.alpha3 = 1.0;
  s.sigma2 = 1.0;
  s.delta.ones(d.M, d.K);
  s.gamma.ones(d.P, d.M, d.K);
  s.a1.ones(d.K);
  s.a2.ones(d.K);
  s.tau.ones(d.K);
  return s;
}

ModelDims ModelState::dims() const { return {nu.n_rows, nu.n_cols, phi.n_cols, Z.n_rows}; }

double ModelState::tau_tilde(arma::uword m, arma::uword k) const {
  double t = 1.0;
  for (arma::uword n = 0; n <= m; ++n) t *= delta(n, k);
  return t;
}

void ModelState::validate() const {
  const ModelDims d = dims();
  d.validate();
  require_shape(phi.n_rows == d.P && phi.n_slices == d.K, "phi must be P x M x K");
  require_shape(chi.n_rows == d.N && chi.n_cols == d.M, "chi must be N x M");
  require_shape(Z.n_cols == d.K, "Z must be N x K");
  require_shape(pi.n_elem == d.K, "pi must have K entries");
  require_shape(delta.n_rows == d.M && delta.n_cols == d.K, "delta must be M x K");
  require_shape(gamma.n_rows == d.P && gamma.n_cols == d.M && gamma.n_slices == d.K, "gamma must be P x M x K");
  require_shape(a1.n_elem == d.K && a2.n_elem == d.K && tau.n_elem == d.K, "a1, a2, tau must have K entries");
  require_shape(sigma2 > 0.0 && std::isfinite(sigma2), "sigma2 must be positive");
  require_shape(alpha3 > 0.0 && std::isfinite(alpha3), "alpha3 must be positive");
  require_shape(delta.min() > 0.0 && gamma.min() > 0.0, "delta and gamma must be positive");
  require_shape(a1.min() > 0.0 && a2.min() > 0.0 && tau.min() > 0.0, "a1, a2, tau must be positive");
  require_shape(nu.is_finite() && phi.is_finite() && chi.is_finite(), "nu, phi, chi must be finite");
  require_shape(pi.min() > 0.0 && std::abs(arma::accu(pi) - 1.0) < 1e-8, "pi must lie in the simplex");
  for (arma::uword i = 0; i < Z.n_rows; ++i) {
    require_shape(d.K == 1 || Z.row(i).min() > 0.0, "Z rows must be interior");
    require_shape(std::abs(arma::accu(Z.row(i)) - 1.0) < 1e-8, "Z rows must sum to one");
  }
}

void ModelState::normalize_simplex() {
  if (Z.n_cols > 1) {
    Z = arma::clamp(Z, kZFloor, 1.0 - kZFloor);
    for (arma::uword i = 0; i < Z.n_rows; ++i) Z.row(i) /= arma::accu(Z.row(i));
  } else {
    Z.ones();
  }
  if (pi.n_elem > 1) {
    pi = arma::clamp(pi, kZFloor, 1.0 - kZFloor);
    pi /= arma::accu(pi);
  } else {
    pi.ones();
  }
}

arma::vec ModelState::fitted_coefficients(arma::uword i) const {
  arma::vec c(nu.n_cols, arma::fill::zeros);
  const arma::vec x = chi.row(i).t();
  for (arma::uword k = 0; k < nu.n_rows; ++k) c += Z(i, k) * (nu.row(k).t() + phi.slice(k) * x);
  return c;
}

arma::vec ModelState::mean_coefficients(arma::uword i) const { return nu.t() * Z.row(i).t(); }

bool ModelState::operator==(const ModelState& o) const {
  auto same = [](const auto& a, const auto& b) {
    return a.n_elem == b.n_elem && std::equal(a.begin(), a.end(), b.begin());
  };
  return same(nu, o.nu) && same(phi, o.phi) && same(chi, o.chi) && same(Z, o.Z) && same(pi, o.pi) &&
         alpha3 == o.alpha3 && sigma2 == o.sigma2 && same(delta, o.delta) && same(gamma, o.gamma) &&
         same(a1, o.a1) && same(a2, o.a2) && same(tau, o.tau);
}

arma::vec log_likelihood_terms(const ModelState& state, const DesignSet& designs) {
  if (!(state.sigma2 > 0.0)) throw DataError("invalid state: sigma2 must be positive");
  arma::vec out(designs.size());
  const double log_norm = stats::kLogTwoPi + std::log(state.sigma2);
  for (arma::uword i = 0; i < designs.size(); ++i) {
    const auto& d = designs[i];
    const arma::vec r = d.y - d.S.t() * state.fitted_coefficients(i);
    out(i) = -0.5 * static_cast<double>(d.y.n_elem) * log_norm - 0.5 * arma::dot(r, r) / state.sigma2;
  }
  return out;
}

double log_likelihood_conditional(const ModelState& state, const DesignSet& designs) {
  return arma::accu(log_likelihood_terms(state, designs));
}

double residual_sum_squares(const ObservationDesign& d, const arma::vec& coef) {
  return std::max(0.0, d.sq - 2.0 * arma::dot(coef, d.proj) + arma::as_scalar(coef.t() * d.gram * coef));
}

double log_likelihood_marginal(const ModelState& state, const DesignSet& designs) {
  if (!(state.sigma2 > 0.0)) throw DataError("invalid state: sigma2 must be positive");
  double total = 0.0;
  for (arma::uword i = 0; i < designs.size(); ++i) {
    auto [mean, cov] = observation_moments(state, i, designs[i]);
    total += log_mvn(designs[i].y, mean, cov);
  }
  return total;
}

arma::vec pointwise_marginal_log_density(const ModelState& state, const DesignSet& designs) {
  arma::vec out(designs.total_points());
  arma::uword pos = 0;
  for (arma::uword i = 0; i < designs.size(); ++i) {
    const auto& d = designs[i];
    const arma::vec mean = d.S.t() * state.mean_coefficients(i);
    const arma::mat proj = d.S.t() * mixed_loadings(state, i);  // n_i x M
    const arma::vec var = arma::sum(arma::square(proj), 1) + state.sigma2;
    for (arma::uword j = 0; j < d.y.n_elem; ++j) out(pos++) = stats::log_normal(d.y(j), mean(j), var(j));
  }
  return out;
}

arma::vec mean_function(const ModelState& state, arma::uword k, const BasisSystem& basis, const arma::mat& grid) {
  if (k >= state.nu.n_rows) throw DataError("feature index out of range");
  return basis.design(grid).t() * state.nu.row(k).t();
}

arma::mat covariance_from_design(const ModelState& state, arma::uword k, arma::uword kp, const arma::mat& design_s,
                                 const arma::mat& design_t) {
  if (k >= state.phi.n_slices || kp >= state.phi.n_slices) throw DataError("feature index out of range");
  return (design_s.t() * state.phi.slice(k)) * (state.phi.slice(kp).t() * design_t);
}

arma::mat covariance_function(const ModelState& state, arma::uword k, arma::uword kp, const BasisSystem& basis,
                              const arma::mat& grid_s, const arma::mat& grid_t) {
  return covariance_from_design(state, k, kp, basis.design(grid_s), basis.design(grid_t));
}

arma::mat feature_covariance(const ModelState& state) {
  const arma::uword K = state.phi.n_slices, P = state.phi.n_rows;
  arma::mat out(K * P, K * P);
  for (arma::uword k = 0; k < K; ++k)
    for (arma::uword kp = 0; kp < K; ++kp)
      out.submat(k * P, kp * P, (k + 1) * P - 1, (kp + 1) * P - 1) = state.phi.slice(k) * state.phi.slice(kp).t();
  return out;
}

std::pair<arma::vec, arma::mat> observation_moments(const ModelState& state, arma::uword i,
                                                    const ObservationDesign& design) {
  const arma::vec mean = design.S.t() * state.mean_coefficients(i);
  const arma::mat proj = design.S.t() * mixed_loadings(state, i);
  arma::mat cov = proj * proj.t();
  cov.diag() += state.sigma2;
  return {mean, cov};
}

}  // namespace funmix
