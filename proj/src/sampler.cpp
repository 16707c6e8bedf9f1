#include "funmix/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "funmix/errors.hpp"
#include "funmix/stats.hpp"

namespace funmix {

namespace {

// Fitted coefficient vectors c_i as rows of an N x P matrix.
arma::mat fitted_matrix(const ModelState& s) {
  arma::mat c(s.Z.n_rows, s.nu.n_cols);
  for (arma::uword i = 0; i < s.Z.n_rows; ++i) c.row(i) = s.fitted_coefficients(i).t();
  return c;
}

// sum_k Z_ik phi_km
arma::vec mixed_direction(const ModelState& s, arma::uword i, arma::uword m) {
  arma::vec a(s.phi.n_rows, arma::fill::zeros);
  for (arma::uword k = 0; k < s.phi.n_slices; ++k) a += s.Z(i, k) * s.phi.slice(k).col(m);
  return a;
}

GaussianConditional phi_conditional_from(const ModelState& s, const SamplerContext& ctx, const arma::mat& fitted,
                                         arma::uword j, arma::uword m, double beta) {
  const arma::uword P = s.phi.n_rows;
  GaussianConditional out;
  const double tt = s.tau_tilde(m, j);
  out.precision = arma::diagmat(tt * s.gamma.slice(j).col(m));
  out.linear.zeros(P);
  const double w = beta / s.sigma2;
  const arma::vec phi = s.phi.slice(j).col(m);
  for (arma::uword i = 0; i < ctx.data().size(); ++i) {
    const double zc = s.Z(i, j) * s.chi(i, m);
    if (zc == 0.0) continue;
    const auto& d = ctx.data()[i];
    out.precision += (w * zc * zc) * d.gram;
    const arma::vec rest = fitted.row(i).t() - zc * phi;
    out.linear += (w * zc) * (d.proj - d.gram * rest);
  }
  return out;
}

GaussianConditional nu_conditional_from(const ModelState& s, const SamplerContext& ctx, const arma::mat& fitted,
                                        arma::uword j, double beta) {
  GaussianConditional out;
  out.precision = s.tau(j) * ctx.penalty;
  out.linear.zeros(s.nu.n_cols);
  const double w = beta / s.sigma2;
  const arma::vec nu = s.nu.row(j).t();
  for (arma::uword i = 0; i < ctx.data().size(); ++i) {
    const double z = s.Z(i, j);
    const auto& d = ctx.data()[i];
    out.precision += (w * z * z) * d.gram;
    const arma::vec rest = fitted.row(i).t() - z * nu;
    out.linear += (w * z) * (d.proj - d.gram * rest);
  }
  return out;
}

GaussianConditional chi_conditional_from(const ModelState& s, const SamplerContext& ctx, const arma::vec& fitted_i,
                                         arma::uword i, arma::uword m, double beta) {
  const auto& d = ctx.data()[i];
  const arma::vec a = mixed_direction(s, i, m);
  const arma::vec Ga = d.gram * a;
  const double w = beta / s.sigma2;
  const arma::vec rest = fitted_i - s.chi(i, m) * a;
  GaussianConditional out;
  out.precision = arma::mat{1.0 + w * arma::dot(a, Ga)};
  out.linear = arma::vec{w * (arma::dot(a, d.proj) - arma::dot(Ga, rest))};
  return out;
}

// Quadratic form of the residual sum of squares in z_i:
// RSS(z) = yy - 2 z'A'h + z'A'GA z with column k of A = nu_k + Phi_k chi_i.
struct ZQuadratic {
  double yy = 0.0;
  arma::vec Ah;
  arma::mat AGA;

  double rss(const arma::vec& z) const {
    return std::max(0.0, yy - 2.0 * arma::dot(z, Ah) + arma::as_scalar(z.t() * AGA * z));
  }
};

ZQuadratic z_quadratic(const ModelState& s, const SamplerContext& ctx, arma::uword i) {
  const auto& d = ctx.data()[i];
  const arma::uword K = s.nu.n_rows;
  arma::mat A(s.nu.n_cols, K);
  const arma::vec x = s.chi.row(i).t();
  for (arma::uword k = 0; k < K; ++k) A.col(k) = s.nu.row(k).t() + s.phi.slice(k) * x;
  return {d.sq, A.t() * d.proj, A.t() * d.gram * A};
}

double z_prior_kernel(const ModelState& s, const arma::vec& z) {
  double lp = 0.0;
  for (arma::uword k = 0; k < z.n_elem; ++k) lp += (s.alpha3 * s.pi(k) - 1.0) * std::log(z(k));
  return lp;
}

bool below_floor(const arma::vec& v) { return v.min() < kProposalFloor; }

// log sum_i log Z_ik per feature, shared by the pi and alpha3 targets.
arma::vec log_z_sums(const ModelState& s) { return arma::sum(arma::log(s.Z), 0).t(); }

double membership_kernel(const arma::vec& logz, double n, const arma::vec& conc) {
  return -n * stats::log_multivariate_beta(conc) + arma::dot(conc - 1.0, logz);
}

bool metropolis(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio)) return false;
  return log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio;
}

template <class F>
void for_range(arma::uword n, bool reverse, F&& f) {
  if (reverse) {
    for (arma::uword r = n; r-- > 0;) f(r);
  } else {
    for (arma::uword r = 0; r < n; ++r) f(r);
  }
}

void require_context(const ModelState& s, const SamplerContext& ctx) {
  if (!ctx.designs) throw DataError("sampler context has no data");
  if (ctx.data().size() != s.Z.n_rows) throw DataError("state and data disagree on the number of observations");
  if (!(s.sigma2 > 0.0)) throw DataError("invalid state: sigma2 must be positive");
}

}  // namespace

std::map<std::string, bool> SweepReport::accepted() const {
  std::map<std::string, bool> out;
  for (std::size_t k = 0; k < a1.size(); ++k) out["a1[" + std::to_string(k) + "]"] = a1[k];
  for (std::size_t k = 0; k < a2.size(); ++k) out["a2[" + std::to_string(k) + "]"] = a2[k];
  for (std::size_t i = 0; i < z.size(); ++i) out["z[" + std::to_string(i) + "]"] = z[i];
  out["pi"] = pi;
  out["alpha3"] = alpha3;
  return out;
}

GaussianConditional phi_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword j, arma::uword m,
                                    double beta) {
  require_context(s, ctx);
  return phi_conditional_from(s, ctx, fitted_matrix(s), j, m, beta);
}

GaussianConditional nu_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword j, double beta) {
  require_context(s, ctx);
  return nu_conditional_from(s, ctx, fitted_matrix(s), j, beta);
}

GaussianConditional chi_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword i, arma::uword m,
                                    double beta) {
  require_context(s, ctx);
  return chi_conditional_from(s, ctx, s.fitted_coefficients(i), i, m, beta);
}

GammaConditional delta_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword n, arma::uword k) {
  const arma::uword P = s.phi.n_rows, M = s.phi.n_cols;
  const double prior_shape = n == 0 ? s.a1(k) : s.a2(k);
  double rate = 1.0;
  // tau_tilde_mk / delta_nk = prod_{l <= m, l != n} delta_lk
  double partial = 1.0;
  for (arma::uword l = 0; l < n; ++l) partial *= s.delta(l, k);
  for (arma::uword m = n; m < M; ++m) {
    if (m > n) partial *= s.delta(m, k);
    const arma::vec phi = s.phi.slice(k).col(m);
    const arma::vec g = s.gamma.slice(k).col(m);
    rate += 0.5 * partial * arma::dot(g, arma::square(phi));
  }
  (void)ctx;
  return {prior_shape + 0.5 * static_cast<double>(P * (M - n)), rate};
}

GammaConditional gamma_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword p, arma::uword m,
                                   arma::uword k) {
  const double nu = ctx.hyper.nu_gamma;
  const double phi = s.phi(p, m, k);
  return {0.5 * (nu + 1.0), 0.5 * (phi * phi * s.tau_tilde(m, k) + nu)};
}

GammaConditional tau_conditional(const ModelState& s, const SamplerContext& ctx, arma::uword k) {
  const arma::rowvec v = s.nu.row(k);
  const double rank = static_cast<double>(v.n_elem > 1 ? v.n_elem - 1 : 0);
  return {ctx.hyper.alpha_tau + 0.5 * rank,
          ctx.hyper.beta_tau + 0.5 * penalty_quadratic(ctx.penalty, v)};
}

GammaConditional sigma2_conditional(const ModelState& s, const SamplerContext& ctx, double beta) {
  require_context(s, ctx);
  double rss = 0.0;
  for (arma::uword i = 0; i < ctx.data().size(); ++i)
    rss += residual_sum_squares(ctx.data()[i], s.fitted_coefficients(i));
  return {ctx.hyper.alpha0 + 0.5 * beta * static_cast<double>(ctx.data().total_points()),
          ctx.hyper.beta0 + 0.5 * beta * rss};
}

LinearConstraint phi_orthogonality_constraint(const ModelState& s, const arma::mat& gram, arma::uword j,
                                              arma::uword m) {
  const arma::uword P = s.phi.n_rows, M = s.phi.n_cols, K = s.phi.n_slices;
  if (gram.n_rows != P || gram.n_cols != P) throw DataError("Gram matrix size does not match P");
  std::vector<arma::vec> cols;
  std::vector<double> rhs;
  for (arma::uword mp = 0; mp < M; ++mp) {
    if (mp == m) continue;
    const arma::vec l = gram * s.phi.slice(j).col(mp);
    double c = 0.0;
    for (arma::uword k = 0; k < K; ++k)
      if (k != j) c += arma::dot(s.phi.slice(k).col(m), gram * s.phi.slice(k).col(mp));
    if (arma::abs(l).max() == 0.0) {
      if (std::abs(c) > 1e-12)
        throw NumericalError("constraint-singular: orthogonality constraint cannot be satisfied");
      continue;
    }
    cols.push_back(l);
    rhs.push_back(c);
  }
  LinearConstraint out;
  out.L.set_size(P, cols.size());
  for (std::size_t r = 0; r < cols.size(); ++r) out.L.col(r) = cols[r];
  out.c = arma::vec(rhs);
  return out;
}

arma::vec condition_on_constraint(const arma::vec& x, const arma::mat& covariance, const LinearConstraint& con) {
  if (con.L.n_cols == 0) return x;
  const arma::mat SL = covariance * con.L;
  const arma::mat S = arma::symmatu(con.L.t() * SL);
  if (con.L.n_cols > con.L.n_rows || arma::rcond(S) < 1e-13)
    throw NumericalError("constraint-singular: orthogonality constraints are rank deficient");
  return x - SL * arma::solve(S, con.L.t() * x + con.c, arma::solve_opts::likely_sympd);
}

double log_target_a1(const ModelState& s, const Hyperparameters& h, arma::uword k, double a1) {
  if (!(a1 > 0.0)) return -arma::datum::inf;
  return (a1 - 1.0) * std::log(s.delta(0, k)) + (h.alpha1 - 1.0) * std::log(a1) - h.beta1 * a1 - std::lgamma(a1);
}

double log_target_a2(const ModelState& s, const Hyperparameters& h, arma::uword k, double a2) {
  if (!(a2 > 0.0)) return -arma::datum::inf;
  const arma::uword M = s.delta.n_rows;
  double lp = (h.alpha2 - 1.0) * std::log(a2) - h.beta2 * a2;
  for (arma::uword n = 1; n < M; ++n) lp += (a2 - 1.0) * std::log(s.delta(n, k)) - std::lgamma(a2);
  return lp;
}

double log_target_z(const ModelState& s, const SamplerContext& ctx, arma::uword i, const arma::vec& z, double beta) {
  require_context(s, ctx);
  if (z.min() <= 0.0) return -arma::datum::inf;
  return z_prior_kernel(s, z) - 0.5 * beta * z_quadratic(s, ctx, i).rss(z) / s.sigma2;
}

double log_target_pi(const ModelState& s, const Hyperparameters& h, const arma::vec& pi) {
  if (pi.min() <= 0.0) return -arma::datum::inf;
  const arma::vec c = h.concentration(pi.n_elem);
  return arma::dot(c - 1.0, arma::log(pi)) +
         membership_kernel(log_z_sums(s), static_cast<double>(s.Z.n_rows), s.alpha3 * pi);
}

double log_target_alpha3(const ModelState& s, const Hyperparameters& h, double alpha3) {
  if (!(alpha3 > 0.0)) return -arma::datum::inf;
  return -h.b * alpha3 + membership_kernel(log_z_sums(s), static_cast<double>(s.Z.n_rows), alpha3 * s.pi);
}

double truncated_normal_log_hastings(double current, double proposed, double sd) {
  return stats::log_normal_cdf(current / sd) - stats::log_normal_cdf(proposed / sd);
}

double dirichlet_log_hastings(const arma::vec& current, const arma::vec& proposed, double a) {
  return stats::log_dirichlet_pdf(current, a * proposed) - stats::log_dirichlet_pdf(proposed, a * current);
}

void update_phi(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta, bool reverse) {
  require_context(s, ctx);
  arma::mat fitted = fitted_matrix(s);
  const arma::uword K = s.phi.n_slices, M = s.phi.n_cols;
  for_range(K, reverse, [&](arma::uword j) {
    for_range(M, reverse, [&](arma::uword m) {
      const auto cond = phi_conditional_from(s, ctx, fitted, j, m, beta);
      const arma::vec draw = sample_gaussian_canonical(cond.precision, cond.linear, rng);
      const arma::vec change = draw - s.phi.slice(j).col(m);
      s.phi.slice(j).col(m) = draw;
      for (arma::uword i = 0; i < s.Z.n_rows; ++i) fitted.row(i) += (s.Z(i, j) * s.chi(i, m)) * change.t();
    });
  });
}

void update_phi_orthogonal(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta, bool reverse) {
  require_context(s, ctx);
  arma::mat fitted = fitted_matrix(s);
  const arma::uword K = s.phi.n_slices, M = s.phi.n_cols;
  for_range(K, reverse, [&](arma::uword j) {
    for_range(M, reverse, [&](arma::uword m) {
      const auto cond = phi_conditional_from(s, ctx, fitted, j, m, beta);
      arma::vec draw = sample_gaussian_canonical(cond.precision, cond.linear, rng);
      const auto con = phi_orthogonality_constraint(s, ctx.gram, j, m);
      if (con.L.n_cols > 0) {
        const arma::mat cov = arma::inv_sympd(arma::symmatu(cond.precision));
        draw = condition_on_constraint(draw, cov, con);
      }
      const arma::vec change = draw - s.phi.slice(j).col(m);
      s.phi.slice(j).col(m) = draw;
      for (arma::uword i = 0; i < s.Z.n_rows; ++i) fitted.row(i) += (s.Z(i, j) * s.chi(i, m)) * change.t();
    });
  });
}

void update_delta(ModelState& s, const SamplerContext& ctx, Rng& rng, bool reverse) {
  const arma::uword K = s.delta.n_cols, M = s.delta.n_rows;
  for (arma::uword k = 0; k < K; ++k) {
    for_range(M, reverse, [&](arma::uword n) {
      const auto g = delta_conditional(s, ctx, n, k);
      s.delta(n, k) = rng.gamma(g.shape, g.rate);
    });
  }
}

void update_gamma(ModelState& s, const SamplerContext& ctx, Rng& rng) {
  for (arma::uword k = 0; k < s.gamma.n_slices; ++k)
    for (arma::uword m = 0; m < s.gamma.n_cols; ++m)
      for (arma::uword p = 0; p < s.gamma.n_rows; ++p) {
        const auto g = gamma_conditional(s, ctx, p, m, k);
        s.gamma(p, m, k) = rng.gamma(g.shape, g.rate);
      }
}

void update_a1_a2(ModelState& s, const SamplerContext& ctx, Rng& rng, SweepReport* report) {
  const auto& h = ctx.hyper;
  const double sd1 = std::sqrt(h.eps1 / h.beta1), sd2 = std::sqrt(h.eps2 / h.beta2);
  const arma::uword K = s.a1.n_elem;
  if (report) {
    report->a1.assign(K, 0);
    report->a2.assign(K, 0);
  }
  for (arma::uword k = 0; k < K; ++k) {
    const double p1 = rng.truncated_normal(s.a1(k), sd1);
    const double r1 = log_target_a1(s, h, k, p1) - log_target_a1(s, h, k, s.a1(k)) +
                      truncated_normal_log_hastings(s.a1(k), p1, sd1);
    if (metropolis(r1, rng)) {
      s.a1(k) = p1;
      if (report) report->a1[k] = 1;
    }
    const double p2 = rng.truncated_normal(s.a2(k), sd2);
    const double r2 = log_target_a2(s, h, k, p2) - log_target_a2(s, h, k, s.a2(k)) +
                      truncated_normal_log_hastings(s.a2(k), p2, sd2);
    if (metropolis(r2, rng)) {
      s.a2(k) = p2;
      if (report) report->a2[k] = 1;
    }
  }
}

void update_nu(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta, bool reverse) {
  require_context(s, ctx);
  arma::mat fitted = fitted_matrix(s);
  for_range(s.nu.n_rows, reverse, [&](arma::uword j) {
    const auto cond = nu_conditional_from(s, ctx, fitted, j, beta);
    const arma::vec draw = sample_gaussian_canonical(cond.precision, cond.linear, rng);
    const arma::rowvec change = draw.t() - s.nu.row(j);
    s.nu.row(j) = draw.t();
    for (arma::uword i = 0; i < s.Z.n_rows; ++i) fitted.row(i) += s.Z(i, j) * change;
  });
}

void update_tau(ModelState& s, const SamplerContext& ctx, Rng& rng) {
  for (arma::uword k = 0; k < s.tau.n_elem; ++k) {
    const auto g = tau_conditional(s, ctx, k);
    s.tau(k) = rng.gamma(g.shape, g.rate);
  }
}

void update_z(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta, SweepReport* report) {
  require_context(s, ctx);
  const arma::uword N = s.Z.n_rows, K = s.Z.n_cols;
  if (report) report->z.assign(N, 0);
  if (K == 1) return;
  const double a = ctx.hyper.a_z;
  const double w = 0.5 * beta / s.sigma2;
  for (arma::uword i = 0; i < N; ++i) {
    const arma::vec cur = s.Z.row(i).t();
    const arma::vec prop = rng.dirichlet(a * cur);
    if (below_floor(prop)) continue;
    const ZQuadratic q = z_quadratic(s, ctx, i);
    const double ratio = (z_prior_kernel(s, prop) - w * q.rss(prop)) - (z_prior_kernel(s, cur) - w * q.rss(cur)) +
                         dirichlet_log_hastings(cur, prop, a);
    if (metropolis(ratio, rng)) {
      s.Z.row(i) = prop.t();
      if (report) report->z[i] = 1;
    }
  }
}

void update_pi(ModelState& s, const SamplerContext& ctx, Rng& rng, SweepReport* report) {
  if (report) report->pi = 0;
  const arma::uword K = s.pi.n_elem;
  if (K == 1) return;
  const auto& h = ctx.hyper;
  const arma::vec prop = rng.dirichlet(h.a_pi * s.pi);
  if (below_floor(prop)) return;
  const arma::vec logz = log_z_sums(s);
  const double n = static_cast<double>(s.Z.n_rows);
  const arma::vec c = h.concentration(K);
  auto target = [&](const arma::vec& p) {
    return arma::dot(c - 1.0, arma::log(p)) + membership_kernel(logz, n, s.alpha3 * p);
  };
  const double ratio = target(prop) - target(s.pi) + dirichlet_log_hastings(s.pi, prop, h.a_pi);
  if (metropolis(ratio, rng)) {
    s.pi = prop;
    if (report) report->pi = 1;
  }
}

void update_alpha3(ModelState& s, const SamplerContext& ctx, Rng& rng, SweepReport* report) {
  if (report) report->alpha3 = 0;
  const auto& h = ctx.hyper;
  const double prop = rng.truncated_normal(s.alpha3, h.sigma_alpha3);
  const arma::vec logz = log_z_sums(s);
  const double n = static_cast<double>(s.Z.n_rows);
  auto target = [&](double a3) { return -h.b * a3 + membership_kernel(logz, n, a3 * s.pi); };
  const double ratio =
      target(prop) - target(s.alpha3) + truncated_normal_log_hastings(s.alpha3, prop, h.sigma_alpha3);
  if (metropolis(ratio, rng)) {
    s.alpha3 = prop;
    if (report) report->alpha3 = 1;
  }
}

void update_chi(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta, bool reverse) {
  require_context(s, ctx);
  const arma::uword M = s.chi.n_cols;
  for (arma::uword i = 0; i < s.chi.n_rows; ++i) {
    arma::vec fitted = s.fitted_coefficients(i);
    for_range(M, reverse, [&](arma::uword m) {
      const auto cond = chi_conditional_from(s, ctx, fitted, i, m, beta);
      const double var = 1.0 / cond.precision(0, 0);
      const double draw = var * cond.linear(0) + std::sqrt(var) * rng.normal();
      fitted += (draw - s.chi(i, m)) * mixed_direction(s, i, m);
      s.chi(i, m) = draw;
    });
  }
}

void update_sigma2(ModelState& s, const SamplerContext& ctx, Rng& rng, double beta) {
  const auto g = sigma2_conditional(s, ctx, beta);
  s.sigma2 = rng.inverse_gamma(g.shape, g.rate);
}

SweepReport sweep(ModelState& s, const SamplerContext& ctx, Rng& rng, const SweepOptions& opt) {
  require_context(s, ctx);
  SweepReport report;
  const auto& b = opt.blocks;
  const double beta = opt.beta;
  const bool rev = opt.reverse;
  const std::function<void()> steps[] = {
      [&] {
        if (!b.phi) return;
        if (opt.orthogonal_phi)
          update_phi_orthogonal(s, ctx, rng, beta, rev);
        else
          update_phi(s, ctx, rng, beta, rev);
      },
      [&] { if (b.delta) update_delta(s, ctx, rng, rev); },
      [&] { if (b.gamma) update_gamma(s, ctx, rng); },
      [&] { if (b.a) update_a1_a2(s, ctx, rng, &report); },
      [&] { if (b.nu) update_nu(s, ctx, rng, beta, rev); },
      [&] { if (b.tau) update_tau(s, ctx, rng); },
      [&] { if (b.z) update_z(s, ctx, rng, beta, &report); },
      [&] { if (b.pi) update_pi(s, ctx, rng, &report); },
      [&] { if (b.alpha3) update_alpha3(s, ctx, rng, &report); },
      [&] { if (b.chi) update_chi(s, ctx, rng, beta, rev); },
      [&] { if (b.sigma2) update_sigma2(s, ctx, rng, beta); },
  };
  const std::size_t n = std::size(steps);
  for (std::size_t r = 0; r < n; ++r) steps[rev ? n - 1 - r : r]();
  if (report.a1.empty()) report.a1.assign(s.a1.n_elem, 0);
  if (report.a2.empty()) report.a2.assign(s.a2.n_elem, 0);
  if (report.z.empty()) report.z.assign(s.Z.n_rows, 0);
  report.log_likelihood = log_likelihood_conditional(s, ctx.data());
  return report;
}

}  // namespace funmix
