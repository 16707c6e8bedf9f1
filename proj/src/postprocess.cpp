#include "funmix/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "funmix/data.hpp"
#include "funmix/errors.hpp"

namespace funmix {

RescaleResult membership_rescale(const ModelState& draw) {
  RescaleResult out{draw, false, {}};
  if (draw.Z.n_cols != 2) {
    out.note = "rescaling is only defined for K = 2; draw passed through";
    return out;
  }
  if (draw.Z.n_rows < 2) {
    out.note = "rescale-degenerate: fewer than two observations";
    return out;
  }
  const arma::uword i1 = draw.Z.col(0).index_max();
  const arma::uword i2 = draw.Z.col(1).index_max();
  if (i1 == i2) {
    out.note = "rescale-degenerate: both column maxima at observation " + std::to_string(i1);
    return out;
  }
  arma::mat T(2, 2);
  T.row(0) = draw.Z.row(i1);
  T.row(1) = draw.Z.row(i2);
  if (arma::rcond(T) < 1e-12) {
    out.note = "rescale-degenerate: singular transformation";
    return out;
  }
  const arma::mat Tinv = arma::inv(T);
  ModelState& s = out.state;
  s.Z = draw.Z * Tinv;
  // Exact vertices for the two anchor observations.
  s.Z.row(i1) = arma::rowvec{1.0, 0.0};
  s.Z.row(i2) = arma::rowvec{0.0, 1.0};
  s.nu = T * draw.nu;
  for (arma::uword m = 0; m < draw.phi.n_cols; ++m)
    for (arma::uword k = 0; k < 2; ++k)
      s.phi.slice(k).col(m) = T(k, 0) * draw.phi.slice(0).col(m) + T(k, 1) * draw.phi.slice(1).col(m);
  out.rescaled = true;
  return out;
}

arma::vec trapezoid_weights(const arma::vec& grid) {
  const arma::uword n = grid.n_elem;
  arma::vec w(n, arma::fill::zeros);
  for (arma::uword r = 0; r + 1 < n; ++r) {
    const double h = grid(r + 1) - grid(r);
    if (h <= 0.0) throw DataError("grid must be strictly increasing");
    w(r) += 0.5 * h;
    w(r + 1) += 0.5 * h;
  }
  return w;
}

arma::vec EigenSystem::function(arma::uword p, arma::uword k) const {
  const arma::uword R = grid.n_elem;
  return functions.col(p).subvec(k * R, (k + 1) * R - 1);
}

EigenSystem eigen_decompose(const ModelState& draw, const BasisSystem& basis, const arma::vec& grid,
                            const arma::vec& weights) {
  if (basis.dimension() != 1) throw DataError("eigen decomposition supports 1-D domains only");
  if (grid.n_elem != weights.n_elem) throw DataError("grid and weights differ in length");
  if (weights.min() <= 0.0) throw DataError("quadrature weights must be positive");
  const arma::uword K = draw.phi.n_slices, M = draw.phi.n_cols, R = grid.n_elem;
  EigenSystem es;
  es.K = K;
  es.grid = grid;
  es.weights = weights;

  const arma::mat D = basis.design(grid.t());  // P x R
  arma::mat A(K * R, M);
  for (arma::uword k = 0; k < K; ++k) A.rows(k * R, (k + 1) * R - 1) = D.t() * draw.phi.slice(k);
  const arma::vec sw = arma::sqrt(arma::repmat(weights, K, 1));
  const arma::mat WA = A.each_col() % sw;
  arma::mat C = WA * WA.t();
  C = 0.5 * (C + C.t());

  arma::vec lambda;
  arma::mat V;
  arma::eig_sym(lambda, V, C);
  lambda = arma::flipud(lambda);
  V = arma::fliplr(V);
  if (lambda.is_empty() || lambda(0) <= 0.0) {
    es.values.reset();
    es.functions.set_size(K * R, 0);
    return es;
  }
  const double cut = 1e-12 * lambda(0);
  const auto keep = static_cast<arma::uword>(arma::accu(lambda > cut));
  es.values = lambda.head(keep);
  es.functions = V.head_cols(keep).each_col() / sw;
  // Fix the sign so that each eigenfunction has a positive largest entry.
  for (arma::uword p = 0; p < keep; ++p) {
    const arma::uword at = arma::abs(es.functions.col(p)).index_max();
    if (es.functions(at, p) < 0.0) es.functions.col(p) *= -1.0;
  }
  return es;
}

EigenSystem eigen_decompose(const ModelState& draw, const BasisSystem& basis) {
  if (basis.dimension() != 1) throw DataError("eigen decomposition supports 1-D domains only");
  const arma::vec grid = equally_spaced(basis.factor(0).domain(), 4 * basis.size());
  return eigen_decompose(draw, basis, grid, trapezoid_weights(grid));
}

double quantile_sorted(const arma::vec& sorted, double q) {
  const arma::uword n = sorted.n_elem;
  if (n == 0) throw DataError("quantile of an empty sample");
  const double h = q * static_cast<double>(n - 1);
  const auto lo = static_cast<arma::uword>(std::floor(h));
  const arma::uword hi = std::min(lo + 1, n - 1);
  return sorted(lo) + (h - static_cast<double>(lo)) * (sorted(hi) - sorted(lo));
}

CredibleBand simultaneous_band(const arma::mat& draws, double alpha) {
  if (draws.n_rows < 2) throw NumericalError("simultaneous band needs at least two draws");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must lie in (0, 1)");
  CredibleBand b;
  b.alpha = alpha;
  b.center = arma::mean(draws, 0).t();
  b.sd = arma::stddev(draws, 0, 0).t();
  const arma::uvec live = arma::find(b.sd > 0.0);
  if (live.is_empty()) throw NumericalError("degenerate-band: zero posterior sd at every point");

  const arma::uword N = draws.n_rows;
  arma::vec dev(N);
  for (arma::uword n = 0; n < N; ++n) {
    double mx = 0.0;
    for (arma::uword t : live) mx = std::max(mx, std::abs(draws(n, t) - b.center(t)) / b.sd(t));
    dev(n) = mx;
  }
  dev = arma::sort(dev);
  const auto order = static_cast<arma::uword>(std::ceil((1.0 - alpha) * static_cast<double>(N)));
  b.m_alpha = dev(std::clamp<arma::uword>(order, 1, N) - 1);
  b.lower = b.center - b.m_alpha * b.sd;
  b.upper = b.center + b.m_alpha * b.sd;
  return b;
}

std::vector<std::string> default_targets(arma::uword K) {
  std::vector<std::string> out;
  for (arma::uword k = 1; k <= K; ++k) out.push_back("mean:" + std::to_string(k));
  for (arma::uword k = 1; k <= K; ++k)
    for (arma::uword l = k; l <= K; ++l) out.push_back("cov:" + std::to_string(k) + ":" + std::to_string(l));
  return out;
}

namespace {

struct Target {
  bool mean = true;
  arma::uword k = 0, l = 0;
};

Target parse_target(const std::string& name, arma::uword K) {
  Target t;
  auto feature = [&](const std::string& s) -> arma::uword {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || v < 1 || v > K) throw DataError("bad target '" + name + "': feature out of range");
    return static_cast<arma::uword>(v - 1);
  };
  if (name.rfind("mean:", 0) == 0) {
    t.k = feature(name.substr(5));
    return t;
  }
  if (name.rfind("cov:", 0) == 0) {
    const std::string rest = name.substr(4);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw DataError("bad target '" + name + "': expected cov:k:l");
    t.mean = false;
    t.k = feature(rest.substr(0, colon));
    t.l = feature(rest.substr(colon + 1));
    return t;
  }
  throw DataError("bad target '" + name + "': expected mean:k or cov:k:l");
}

arma::vec evaluate_target(const ModelState& s, const arma::mat& D, const Target& t) {
  if (t.mean) return D.t() * s.nu.row(t.k).t();
  const arma::mat C = covariance_from_design(s, t.k, t.l, D, D);
  return arma::vectorise(C);
}

arma::vec domain_grid(const BasisSystem& basis, arma::uword n) {
  if (basis.dimension() != 1) throw DataError("function summaries support 1-D domains only");
  return equally_spaced(basis.factor(0).domain(), n);
}

}  // namespace

arma::vec target_values(const ModelState& s, const BasisSystem& basis, const std::string& target,
                        const arma::vec& grid) {
  const Target t = parse_target(target, s.nu.n_rows);
  return evaluate_target(s, basis.design(grid.t()), t);
}

std::vector<FunctionSummary> summarize_functions(const std::vector<ModelState>& draws, const BasisSystem& basis,
                                                 const std::vector<std::string>& targets,
                                                 const SummaryOptions& opt) {
  if (draws.empty()) throw DataError("no draws to summarize");
  const arma::uword K = draws.front().nu.n_rows;
  std::vector<ModelState> used;
  used.reserve(draws.size());
  for (const auto& d : draws) used.push_back(opt.rescale && K == 2 ? membership_rescale(d).state : d);

  const arma::vec tm = domain_grid(basis, opt.mean_points);
  const arma::vec tc = domain_grid(basis, opt.cov_points);
  const arma::mat Dm = basis.design(tm.t());
  const arma::mat Dc = basis.design(tc.t());

  std::vector<FunctionSummary> out;
  for (const auto& name : targets) {
    const Target t = parse_target(name, K);
    FunctionSummary fs;
    fs.target = name;
    const arma::mat& D = t.mean ? Dm : Dc;
    if (t.mean) {
      fs.points = tm.t();
    } else {
      const arma::uword n = tc.n_elem;
      fs.points.set_size(2, n * n);
      for (arma::uword j = 0; j < n; ++j)
        for (arma::uword i = 0; i < n; ++i) {
          fs.points(0, i + j * n) = tc(i);
          fs.points(1, i + j * n) = tc(j);
        }
    }
    arma::mat values(used.size(), fs.points.n_cols);
    for (std::size_t n = 0; n < used.size(); ++n) values.row(n) = evaluate_target(used[n], D, t).t();

    const double lo = opt.alpha / 2.0, hi = 1.0 - opt.alpha / 2.0;
    fs.median.set_size(values.n_cols);
    fs.lo_pt.set_size(values.n_cols);
    fs.hi_pt.set_size(values.n_cols);
    for (arma::uword c = 0; c < values.n_cols; ++c) {
      const arma::vec col = arma::sort(values.col(c));
      fs.median(c) = quantile_sorted(col, 0.5);
      fs.lo_pt(c) = quantile_sorted(col, lo);
      fs.hi_pt(c) = quantile_sorted(col, hi);
    }
    if (values.n_rows >= 2 && arma::any(arma::stddev(values, 0, 0) > 0.0)) {
      const CredibleBand band = simultaneous_band(values, opt.alpha);
      fs.lo_sim = band.lower;
      fs.hi_sim = band.upper;
    } else {
      // One draw or no spread: the band collapses onto the pointwise mean.
      fs.lo_sim = arma::mean(values, 0).t();
      fs.hi_sim = fs.lo_sim;
    }
    out.push_back(std::move(fs));
  }
  return out;
}

void write_summary_csv(const FunctionSummary& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const bool surface = s.points.n_rows == 2;
  out << (surface ? "s,t," : "t,") << "median,lo_pt,hi_pt,lo_sim,hi_sim\n";
  for (arma::uword c = 0; c < s.points.n_cols; ++c) {
    if (surface) out << format_double(s.points(0, c)) << ',' << format_double(s.points(1, c)) << ',';
    else out << format_double(s.points(0, c)) << ',';
    out << format_double(s.median(c)) << ',' << format_double(s.lo_pt(c)) << ',' << format_double(s.hi_pt(c)) << ','
        << format_double(s.lo_sim(c)) << ',' << format_double(s.hi_sim(c)) << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

void write_eigenvalue_csv(const std::vector<EigenSystem>& systems, double alpha, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "index,median,lo_pt,hi_pt\n";
  arma::uword n = 0;
  for (const auto& e : systems) n = std::max(n, e.size());
  for (arma::uword p = 0; p < n; ++p) {
    // Draws with fewer eigenvalues contribute zeros.
    arma::vec v(systems.size(), arma::fill::zeros);
    for (std::size_t d = 0; d < systems.size(); ++d)
      if (p < systems[d].size()) v(d) = systems[d].values(p);
    v = arma::sort(v);
    out << (p + 1) << ',' << format_double(quantile_sorted(v, 0.5)) << ','
        << format_double(quantile_sorted(v, alpha / 2.0)) << ',' << format_double(quantile_sorted(v, 1.0 - alpha / 2.0))
        << '\n';
  }
}

}  // namespace funmix
