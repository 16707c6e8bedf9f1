#include "funmix/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "funmix/errors.hpp"
#include "funmix/stats.hpp"

namespace funmix {

arma::uword parameter_count(arma::uword N, arma::uword P, arma::uword K, arma::uword M) {
  return (N + P) * K + 2 * M * K * P + 4 * K + (N + K) * M + 2;
}

double plugin_log_likelihood(const std::vector<ModelState>& draws, const DesignSet& designs) {
  if (draws.empty()) throw DataError("archive has no draws");
  const arma::uword N = designs.size();
  const arma::uword P = designs.basis_size();
  arma::mat coef(P, N, arma::fill::zeros);
  double sigma2 = 0.0;
  for (const auto& s : draws) {
    if (s.Z.n_rows != N) throw DataError("draw does not match the dataset");
    for (arma::uword i = 0; i < N; ++i) coef.col(i) += s.fitted_coefficients(i);
    sigma2 += s.sigma2;
  }
  const double n = static_cast<double>(draws.size());
  coef /= n;
  sigma2 /= n;
  double lp = 0.0;
  for (arma::uword i = 0; i < N; ++i) {
    const auto& d = designs[i];
    const arma::vec r = d.y - d.S.t() * coef.col(i);
    lp += -0.5 * static_cast<double>(d.y.n_elem) * (stats::kLogTwoPi + std::log(sigma2)) -
          arma::dot(r, r) / (2.0 * sigma2);
  }
  return lp;
}

InformationCriteria bic_aic(double log_p, arma::uword d, arma::uword total_points) {
  InformationCriteria c;
  c.log_p = log_p;
  c.bic = 2.0 * log_p - static_cast<double>(d) * std::log(static_cast<double>(total_points));
  c.aic = -2.0 * log_p + 2.0 * static_cast<double>(d);
  return c;
}

InformationCriteria compute_bic_aic(const std::vector<ModelState>& draws, const DesignSet& designs) {
  if (draws.empty()) throw DataError("archive has no draws");
  const ModelDims dims = draws.front().dims();
  const arma::uword d = parameter_count(dims.N, dims.P, dims.K, dims.M);
  return bic_aic(plugin_log_likelihood(draws, designs), d, designs.total_points());
}

double dic_from_pointwise(const arma::mat& log_density) {
  if (log_density.n_rows == 0) throw DataError("no draws for DIC");
  const double L = static_cast<double>(log_density.n_rows);
  const double expected = arma::accu(log_density) / L;
  double log_fhat = 0.0;
  for (arma::uword j = 0; j < log_density.n_cols; ++j) {
    const arma::vec c = log_density.col(j);
    const double mx = c.max();
    log_fhat += mx + std::log(arma::accu(arma::exp(c - mx))) - std::log(L);
  }
  return -4.0 * expected + 2.0 * log_fhat;
}

double compute_dic(const std::vector<ModelState>& draws, const DesignSet& designs) {
  if (draws.empty()) throw DataError("archive has no draws");
  // Streaming log-sum-exp per point keeps memory at O(points).
  const arma::uword n = designs.total_points();
  arma::vec run_max(n), run_sum(n, arma::fill::zeros);
  run_max.fill(-arma::datum::inf);
  double total = 0.0;
  for (const auto& s : draws) {
    const arma::vec lf = pointwise_marginal_log_density(s, designs);
    total += arma::accu(lf);
    for (arma::uword j = 0; j < n; ++j) {
      if (lf(j) > run_max(j)) {
        run_sum(j) = run_sum(j) * std::exp(run_max(j) - lf(j)) + 1.0;
        run_max(j) = lf(j);
      } else {
        run_sum(j) += std::exp(lf(j) - run_max(j));
      }
    }
  }
  const double L = static_cast<double>(draws.size());
  double log_fhat = 0.0;
  for (arma::uword j = 0; j < n; ++j) log_fhat += run_max(j) + std::log(run_sum(j)) - std::log(L);
  return -4.0 * total / L + 2.0 * log_fhat;
}

CriteriaReport criteria_report(const std::vector<ModelState>& draws, const std::vector<double>& loglik,
                               const DesignSet& designs) {
  if (draws.empty()) throw DataError("archive has no draws");
  const ModelDims dims = draws.front().dims();
  CriteriaReport r;
  r.K = dims.K;
  r.d = parameter_count(dims.N, dims.P, dims.K, dims.M);
  const InformationCriteria ic = compute_bic_aic(draws, designs);
  r.aic = ic.aic;
  r.bic = ic.bic;
  r.dic = compute_dic(draws, designs);
  r.mean_loglik = loglik.empty() ? 0.0 : std::accumulate(loglik.begin(), loglik.end(), 0.0) / loglik.size();
  return r;
}

ElbowResult elbow_scan(const std::vector<arma::uword>& Ks, const std::vector<double>& mean_loglik) {
  if (Ks.size() != mean_loglik.size()) throw DataError("K values and log-likelihoods differ in length");
  if (Ks.size() < 3) throw DataError("elbow scan needs at least three K values");
  for (std::size_t j = 1; j < Ks.size(); ++j)
    if (Ks[j] <= Ks[j - 1]) throw DataError("K values must be increasing");
  ElbowResult out;
  const std::size_t n = Ks.size();
  out.curvature.set_size(n - 2);
  double scale = 0.0;
  for (double v : mean_loglik) scale = std::max(scale, std::abs(v));
  for (std::size_t j = 1; j + 1 < n; ++j)
    out.curvature(j - 1) = (mean_loglik[j] - mean_loglik[j - 1]) - (mean_loglik[j + 1] - mean_loglik[j]);
  if (arma::abs(out.curvature).max() <= 1e-12 * std::max(scale, 1.0)) return out;
  std::size_t best = 0;
  for (std::size_t j = 1; j < out.curvature.n_elem; ++j)
    if (out.curvature(j) > out.curvature(best)) best = j;
  out.K = Ks[best + 1];
  return out;
}

void write_criteria_csv(const std::vector<CriteriaReport>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "K,d,AIC,BIC,DIC,mean_loglik\n";
  for (const auto& r : rows)
    out << r.K << ',' << r.d << ',' << format_double(r.aic) << ',' << format_double(r.bic) << ','
        << format_double(r.dic) << ',' << format_double(r.mean_loglik) << '\n';
}

double r_mise(const arma::vec& truth, const arma::vec& estimate, const arma::vec& weights) {
  if (truth.n_elem != estimate.n_elem || truth.n_elem != weights.n_elem)
    throw DataError("r_mise inputs differ in length");
  const double denom = arma::dot(weights, arma::square(truth));
  if (!(denom > 0.0)) throw NumericalError("undefined-metric: the true function has zero norm");
  return 100.0 * arma::dot(weights, arma::square(truth - estimate)) / denom;
}

double z_rmse(const arma::mat& Z_true, const arma::mat& Z_est) {
  if (Z_true.n_rows != Z_est.n_rows || Z_true.n_cols != Z_est.n_cols) throw DataError("Z shapes differ");
  if (Z_true.is_empty()) return 0.0;
  return std::sqrt(arma::accu(arma::square(Z_true - Z_est)) / static_cast<double>(Z_true.n_elem));
}

std::vector<arma::uword> align_features(const arma::mat& Z_true, const arma::mat& Z_est) {
  if (Z_true.n_cols != Z_est.n_cols) throw DataError("feature counts differ");
  std::vector<arma::uword> perm(Z_true.n_cols), best;
  std::iota(perm.begin(), perm.end(), arma::uword{0});
  double best_err = arma::datum::inf;
  do {
    arma::mat T(Z_true.n_rows, Z_true.n_cols);
    for (arma::uword k = 0; k < perm.size(); ++k) T.col(k) = Z_true.col(perm[k]);
    const double e = z_rmse(T, Z_est);
    if (e < best_err) {
      best_err = e;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

EvalReport evaluate(const ModelState& truth, const std::vector<ModelState>& draws, const BasisSystem& basis,
                    const SummaryOptions& opt) {
  if (draws.empty()) throw DataError("archive has no draws");
  const arma::uword K = truth.nu.n_rows;
  if (draws.front().nu.n_rows != K) throw DataError("truth and archive have different K");
  if (draws.front().Z.n_rows != truth.Z.n_rows) throw DataError("truth and archive have different N");
  const ModelState ref = opt.rescale && K == 2 ? membership_rescale(truth).state : truth;

  std::vector<ModelState> used;
  used.reserve(draws.size());
  arma::mat Zbar(truth.Z.n_rows, K, arma::fill::zeros);
  for (const auto& d : draws) {
    used.push_back(opt.rescale && K == 2 ? membership_rescale(d).state : d);
    Zbar += used.back().Z;
  }
  Zbar /= static_cast<double>(draws.size());

  EvalReport rep;
  rep.permutation = align_features(ref.Z, Zbar);
  rep.z_rmse = z_rmse(ref.Z.cols(arma::uvec(rep.permutation)), Zbar);

  SummaryOptions so = opt;
  so.rescale = false;  // already applied
  const auto targets = default_targets(K);
  const auto summaries = summarize_functions(used, basis, targets, so);
  const arma::vec tm = equally_spaced(basis.factor(0).domain(), opt.mean_points);
  const arma::vec tc = equally_spaced(basis.factor(0).domain(), opt.cov_points);
  const arma::vec wm = trapezoid_weights(tm);
  const arma::vec wc1 = trapezoid_weights(tc);
  const arma::vec wc = arma::vectorise(wc1 * wc1.t());
  for (const auto& s : summaries) {
    // Map the estimate's feature labels onto the truth's.
    std::string truth_target;
    arma::uword k = 0, l = 0;
    if (s.target.rfind("mean:", 0) == 0) {
      k = std::stoul(s.target.substr(5)) - 1;
      truth_target = "mean:" + std::to_string(rep.permutation[k] + 1);
    } else {
      const std::string rest = s.target.substr(4);
      const auto colon = rest.find(':');
      k = std::stoul(rest.substr(0, colon)) - 1;
      l = std::stoul(rest.substr(colon + 1)) - 1;
      truth_target = "cov:" + std::to_string(rep.permutation[k] + 1) + ":" + std::to_string(rep.permutation[l] + 1);
    }
    const bool mean = s.points.n_rows == 1;
    const arma::vec f = target_values(ref, basis, truth_target, mean ? tm : tc);
    rep.rows.push_back({s.target, r_mise(f, s.median, mean ? wm : wc)});
  }
  return rep;
}

}  // namespace funmix
