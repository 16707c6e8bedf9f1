#include "funmix/simgen.hpp"

#include <cmath>

#include "funmix/errors.hpp"

namespace funmix {

void SimSpec::validate() const {
  if (N < 1) throw DataError("simulation needs N >= 1");
  if (n_points < 1) throw DataError("simulation needs n_points >= 1");
  if (!(sigma2 > 0.0)) throw DataError("sigma2 must be positive");
  if (K < 1 || M < 1) throw DataError("K and M must be positive");
  const arma::uword P = basis.build().size();
  if (nu_mean.n_rows != K || nu_mean.n_cols != P)
    throw DataError("nu_mean must be K x P (" + std::to_string(K) + " x " + std::to_string(P) + ")");
  if (phi_variance.n_elem != M) throw DataError("phi_variance needs one entry per eigen-direction");
  if (phi_variance.min() < 0.0) throw DataError("phi_variance must be non-negative");
  if (!(nu_scale >= 0.0)) throw DataError("nu_scale must be non-negative");
  if (orthogonal_phi && K >= P) throw DataError("K >= P leaves no orthogonal complement for phi");
  if (mixture.empty()) throw DataError("membership mixture is empty");
  double w = 0.0;
  for (const auto& c : mixture) {
    if (c.concentration.n_elem != K) throw DataError("mixture concentration must have K entries");
    if (c.concentration.min() <= 0.0) throw DataError("mixture concentration must be positive");
    if (c.weight < 0.0) throw DataError("mixture weights must be non-negative");
    w += c.weight;
  }
  if (std::abs(w - 1.0) > 1e-9) throw DataError("mixture weights must sum to 1");
}

arma::rowvec linear_mean(double first, double step, arma::uword P) {
  arma::rowvec v(P);
  for (arma::uword p = 0; p < P; ++p) v(p) = first + step * static_cast<double>(p);
  return v;
}

SimSpec study1_spec(arma::uword N) {
  SimSpec s;
  s.study = Study::Study1;
  s.N = N;
  s.K = 2;
  s.M = 3;
  const arma::uword P = 8;
  s.nu_mean = arma::join_cols(linear_mean(6.0, -2.0, P), linear_mean(-8.0, 2.0, P));
  s.phi_variance = {2.25, 1.0, 0.49};
  s.orthogonal_phi = true;
  s.mixture = {{0.3, {10.0, 1.0}}, {0.3, {1.0, 10.0}}, {0.4, {1.0, 1.0}}};
  return s;
}

SimSpec study2_spec(arma::uword N) {
  SimSpec s;
  s.study = Study::Study2;
  s.N = N;
  s.K = 3;
  s.M = 3;
  const arma::uword P = 8;
  s.nu_mean = arma::join_cols(linear_mean(6.0, -2.0, P), linear_mean(-8.0, 2.0, P), arma::rowvec(P, arma::fill::zeros));
  s.phi_variance = {1.0, 0.5, 0.2};
  s.orthogonal_phi = false;
  s.mixture = {{0.2, {10.0, 1.0, 1.0}}, {0.2, {1.0, 10.0, 1.0}}, {0.2, {1.0, 1.0, 10.0}}, {0.4, {1.0, 1.0, 1.0}}};
  return s;
}

std::vector<arma::uword> mixture_assignment(const SimSpec& spec, Rng& rng) {
  std::vector<arma::uword> out(spec.N);
  const arma::uword C = spec.mixture.size();
  if (spec.stochastic_assignment) {
    for (auto& c : out) {
      double u = rng.uniform(), acc = 0.0;
      c = C - 1;
      for (arma::uword j = 0; j < C; ++j) {
        acc += spec.mixture[j].weight;
        if (u < acc) {
          c = j;
          break;
        }
      }
    }
    return out;
  }
  arma::uword i = 0;
  for (arma::uword j = 0; j + 1 < C; ++j) {
    const auto n = static_cast<arma::uword>(std::floor(spec.mixture[j].weight * static_cast<double>(spec.N)));
    for (arma::uword t = 0; t < n && i < spec.N; ++t) out[i++] = j;
  }
  while (i < spec.N) out[i++] = C - 1;
  return out;
}

arma::mat orthogonal_complement(const arma::mat& nu) {
  const arma::uword P = nu.n_cols;
  arma::mat U, V;
  arma::vec s;
  arma::svd(U, s, V, nu);  // V is P x P
  const double tol = std::max(nu.n_rows, P) * (s.n_elem ? s(0) : 0.0) * 1e-12;
  const auto rank = static_cast<arma::uword>(arma::accu(s > tol));
  if (rank >= P) return arma::mat(P, 0);
  return V.cols(rank, P - 1);
}

ModelState draw_truth(const SimSpec& spec, const BasisSystem& basis, Rng& rng) {
  spec.validate();
  const arma::uword P = basis.size();
  if (spec.nu_mean.n_cols != P) throw DataError("basis size does not match nu_mean");
  const ModelDims dims{spec.K, P, spec.M, spec.N};
  ModelState s = ModelState::zeros(dims);

  arma::vec lambda;
  arma::mat U;
  arma::eig_sym(lambda, U, basis.penalty());
  const double tol = 1e-10 * std::max(1.0, lambda.max());
  for (arma::uword k = 0; k < spec.K; ++k) {
    arma::vec nu = spec.nu_mean.row(k).t();
    for (arma::uword r = 0; r < P; ++r) {
      // Zero eigenvalues belong to the constant direction.
      const double var = lambda(r) > tol ? spec.nu_scale * lambda(r) : spec.nu_scale;
      nu += std::sqrt(var) * rng.normal() * U.col(r);
    }
    s.nu.row(k) = nu.t();
  }

  if (spec.orthogonal_phi) {
    const arma::mat B = orthogonal_complement(s.nu);
    for (arma::uword k = 0; k < spec.K; ++k)
      for (arma::uword m = 0; m < spec.M; ++m)
        s.phi.slice(k).col(m) = B * (std::sqrt(spec.phi_variance(m)) * rng.standard_normal(B.n_cols));
  } else {
    for (arma::uword k = 0; k < spec.K; ++k)
      for (arma::uword m = 0; m < spec.M; ++m)
        s.phi.slice(k).col(m) = std::sqrt(spec.phi_variance(m)) * rng.standard_normal(P);
  }

  draw_allocations(s, spec, rng);
  s.sigma2 = spec.sigma2;
  s.normalize_simplex();
  return s;
}

void draw_allocations(ModelState& s, const SimSpec& spec, Rng& rng) {
  s.chi.set_size(spec.N, spec.M);
  for (arma::uword i = 0; i < spec.N; ++i)
    for (arma::uword m = 0; m < spec.M; ++m) s.chi(i, m) = rng.normal();
  s.Z.set_size(spec.N, spec.K);
  const auto comp = mixture_assignment(spec, rng);
  for (arma::uword i = 0; i < spec.N; ++i) s.Z.row(i) = rng.dirichlet(spec.mixture[comp[i]].concentration).t();
  s.normalize_simplex();
}

namespace {

// Tensor grid with n points per dimension, last dimension fastest.
arma::mat tensor_grid(const BasisSystem& basis, arma::uword n) {
  const int d = basis.dimension();
  std::vector<arma::vec> axes;
  arma::uword total = 1;
  for (int j = 0; j < d; ++j) {
    axes.push_back(equally_spaced(basis.factor(j).domain(), n));
    total *= n;
  }
  arma::mat grid(static_cast<arma::uword>(d), total);
  for (arma::uword c = 0; c < total; ++c) {
    arma::uword rem = c;
    for (int j = d - 1; j >= 0; --j) {
      grid(static_cast<arma::uword>(j), c) = axes[static_cast<std::size_t>(j)](rem % n);
      rem /= n;
    }
  }
  return grid;
}

}  // namespace

Dataset synthesize(const ModelState& truth, const SimSpec& spec, const BasisSystem& basis, Rng& rng) {
  truth.validate();
  const arma::mat grid = tensor_grid(basis, spec.n_points);
  const arma::mat S = basis.design(grid);
  const double sd = std::sqrt(truth.sigma2);
  Dataset data;
  data.observations.reserve(truth.Z.n_rows);
  for (arma::uword i = 0; i < truth.Z.n_rows; ++i) {
    Observation o;
    o.grid = grid;
    o.values = S.t() * truth.fitted_coefficients(i);
    for (auto& v : o.values) v += sd * rng.normal();
    data.observations.push_back(std::move(o));
  }
  return data;
}

}  // namespace funmix
