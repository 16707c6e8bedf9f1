#pragma once

#include <armadillo>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "funmix/basis.hpp"
#include "funmix/data.hpp"
#include "funmix/model.hpp"
#include "funmix/postprocess.hpp"

namespace funmix {

// (N + P) K + 2 M K P + 4 K + (N + K) M + 2.
arma::uword parameter_count(arma::uword N, arma::uword P, arma::uword K, arma::uword M);

struct InformationCriteria {
  double log_p = 0.0;  // plug-in log-likelihood
  double bic = 0.0;
  double aic = 0.0;
};

// Gaussian log-likelihood at the posterior mean of every observation's mean
// coefficients and the posterior mean of sigma2.
double plugin_log_likelihood(const std::vector<ModelState>& draws, const DesignSet& designs);

// BIC = 2 log P - d log(sum n_i) (larger is better), AIC = -2 log P + 2 d.
InformationCriteria bic_aic(double log_p, arma::uword d, arma::uword total_points);
InformationCriteria compute_bic_aic(const std::vector<ModelState>& draws, const DesignSet& designs);

// -4 mean_l sum_ij log f_l(y_ij) + 2 sum_ij log mean_l f_l(y_ij), with f_l the
// chi-integrated single-point density under draw l.
double compute_dic(const std::vector<ModelState>& draws, const DesignSet& designs);
// Same from precomputed pointwise log densities (one row per draw).
double dic_from_pointwise(const arma::mat& log_density);

struct CriteriaReport {
  arma::uword K = 0;
  arma::uword d = 0;
  double aic = 0.0, bic = 0.0, dic = 0.0, mean_loglik = 0.0;
};

CriteriaReport criteria_report(const std::vector<ModelState>& draws, const std::vector<double>& loglik,
                               const DesignSet& designs);

struct ElbowResult {
  std::optional<arma::uword> K;  // empty when the curve has no curvature
  arma::vec curvature;           // drop in slope at each interior K
};

// K maximizing (L_j - L_{j-1}) - (L_{j+1} - L_j); ties go to the smaller K.
ElbowResult elbow_scan(const std::vector<arma::uword>& Ks, const std::vector<double>& mean_loglik);

// Header "K,d,AIC,BIC,DIC,mean_loglik".
void write_criteria_csv(const std::vector<CriteriaReport>& rows, const std::filesystem::path& path);

// 100 * int (f - g)^2 w / int f^2 w.
double r_mise(const arma::vec& truth, const arma::vec& estimate, const arma::vec& weights);

// sqrt(mean over all entries of (A - B)^2).
double z_rmse(const arma::mat& Z_true, const arma::mat& Z_est);

// Feature permutation p minimizing the Z RMSE between truth column p[k]
// and estimate column k.
std::vector<arma::uword> align_features(const arma::mat& Z_true, const arma::mat& Z_est);

struct EvalRow {
  std::string target;
  double r_mise_pct = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double z_rmse = 0.0;
  std::vector<arma::uword> permutation;
};

// Posterior medians of every default target against the truth, after
// optional rescaling (truth and draws alike) and label alignment.
EvalReport evaluate(const ModelState& truth, const std::vector<ModelState>& draws, const BasisSystem& basis,
                    const SummaryOptions& opt = {});

}  // namespace funmix
