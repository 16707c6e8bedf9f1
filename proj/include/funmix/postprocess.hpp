#pragma once

#include <armadillo>
#include <filesystem>
#include <string>
#include <vector>

#include "funmix/basis.hpp"
#include "funmix/model.hpp"

namespace funmix {

struct RescaleResult {
  ModelState state;
  bool rescaled = false;
  // Set when the draw was passed through unchanged: K != 2, both column
  // maxima on the same observation, or a singular T.
  std::string note;
};

// For K = 2, T has row k equal to the row of Z attaining the maximum of
// column k. Returns Z T^-1, T nu and T Phi_m so that the extreme
// observations sit on the simplex vertices. The likelihood is unchanged.
RescaleResult membership_rescale(const ModelState& draw);

// Trapezoid weights for an increasing 1-D grid.
arma::vec trapezoid_weights(const arma::vec& grid);

struct EigenSystem {
  arma::uword K = 0;
  arma::vec grid;       // R points shared by every component
  arma::vec weights;    // quadrature weights on grid
  arma::vec values;     // non-increasing
  arma::mat functions;  // (K R) x n; rows k R .. (k + 1) R - 1 hold component k

  arma::uword size() const noexcept { return values.n_elem; }
  arma::vec function(arma::uword p, arma::uword k) const;
};

// Discretized multivariate Karhunen-Loeve decomposition of the feature
// covariance on a 1-D grid: eigenpairs of W^1/2 C W^1/2, back-transformed
// so that sum_r w_r Psi_p(t_r) Psi_q(t_r) = 1{p = q}.
EigenSystem eigen_decompose(const ModelState& draw, const BasisSystem& basis, const arma::vec& grid,
                            const arma::vec& weights);
// Default grid: 4 P equally spaced points with trapezoid weights.
EigenSystem eigen_decompose(const ModelState& draw, const BasisSystem& basis);

struct CredibleBand {
  double alpha = 0.05;
  arma::vec center;  // pointwise mean
  arma::vec sd;
  double m_alpha = 0.0;
  arma::vec lower, upper;
};

// draws: one row per posterior draw, one column per grid point. M_alpha is
// the ceil((1 - alpha) N)-th smallest of max_t |g(t) - mean| / sd, with
// sd = 0 points left out of the max.
CredibleBand simultaneous_band(const arma::mat& draws, double alpha);

// Sample quantile with linear interpolation between order statistics.
double quantile_sorted(const arma::vec& sorted, double q);

struct FunctionSummary {
  std::string target;  // "mean:k" or "cov:k:l", features numbered from 1
  arma::mat points;    // 1 row (t) for means, 2 rows (s, t) for covariances
  arma::vec median, lo_pt, hi_pt, lo_sim, hi_sim;
};

struct SummaryOptions {
  double alpha = 0.05;
  bool rescale = true;
  arma::uword mean_points = 101;
  arma::uword cov_points = 25;
};

// Default targets: every mean and every (k <= l) covariance.
std::vector<std::string> default_targets(arma::uword K);

// Posterior median, pointwise bands and simultaneous bands of the requested
// targets on a 1-D grid covering the basis domain.
std::vector<FunctionSummary> summarize_functions(const std::vector<ModelState>& draws, const BasisSystem& basis,
                                                 const std::vector<std::string>& targets,
                                                 const SummaryOptions& opt = {});

// Posterior median curve of one target; used by eval.
arma::vec target_values(const ModelState& s, const BasisSystem& basis, const std::string& target,
                        const arma::vec& grid);

// Columns t,median,lo_pt,hi_pt,lo_sim,hi_sim (s,t,... for covariances).
void write_summary_csv(const FunctionSummary& summary, const std::filesystem::path& path);

// Posterior median and pointwise interval of each eigenvalue index
// ("index,median,lo_pt,hi_pt").
void write_eigenvalue_csv(const std::vector<EigenSystem>& systems, double alpha, const std::filesystem::path& path);

}  // namespace funmix
