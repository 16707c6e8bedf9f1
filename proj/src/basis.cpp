#include "funmix/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "funmix/errors.hpp"

namespace funmix {

namespace {

double domain_tolerance(Interval domain) { return 1e-12 * std::max(1.0, domain.width()); }

}  // namespace

BSplineBasis::BSplineBasis(int degree, std::vector<double> interior_knots, Interval domain)
    : degree_(degree), interior_(std::move(interior_knots)), domain_(domain) {
  if (degree_ < 0) throw DataError("B-spline degree must be non-negative");
  if (!(domain_.lo < domain_.hi)) throw DataError("invalid knot: domain must satisfy lo < hi");
  for (std::size_t i = 0; i < interior_.size(); ++i) {
    const double k = interior_[i];
    if (!(k > domain_.lo && k < domain_.hi))
      throw DataError("invalid knot: interior knot " + std::to_string(k) + " is not strictly inside the domain");
    if (i > 0 && !(k > interior_[i - 1]))
      throw DataError("invalid knot: interior knots must be strictly increasing");
  }
  knots_.assign(static_cast<std::size_t>(degree_ + 1), domain_.lo);
  knots_.insert(knots_.end(), interior_.begin(), interior_.end());
  knots_.insert(knots_.end(), static_cast<std::size_t>(degree_ + 1), domain_.hi);
  size_ = static_cast<arma::uword>(degree_ + 1) + interior_.size();
}

BSplineBasis BSplineBasis::uniform(int degree, int n_interior_knots, Interval domain) {
  if (n_interior_knots < 0) throw DataError("number of interior knots must be non-negative");
  std::vector<double> knots;
  const double step = domain.width() / (n_interior_knots + 1);
  for (int j = 1; j <= n_interior_knots; ++j) knots.push_back(domain.lo + j * step);
  return BSplineBasis(degree, std::move(knots), domain);
}

arma::uword BSplineBasis::find_span(double t) const {
  const auto p = static_cast<std::size_t>(degree_);
  const std::size_t last = size_ - 1;
  if (t >= knots_[last + 1]) return last;
  // knots_[span] <= t < knots_[span + 1], span in [p, last]
  auto it = std::upper_bound(knots_.begin() + static_cast<std::ptrdiff_t>(p),
                             knots_.begin() + static_cast<std::ptrdiff_t>(last + 1), t);
  return static_cast<arma::uword>(std::distance(knots_.begin(), it) - 1);
}

arma::vec BSplineBasis::evaluate(double t) const {
  const double tol = domain_tolerance(domain_);
  if (!(t >= domain_.lo - tol && t <= domain_.hi + tol))
    throw DataError("domain error: point " + std::to_string(t) + " outside [" + std::to_string(domain_.lo) + ", " +
                    std::to_string(domain_.hi) + "]");
  t = std::clamp(t, domain_.lo, domain_.hi);

  const int p = degree_;
  const arma::uword span = find_span(t);
  // Cox-de Boor triangle for the p + 1 non-vanishing functions.
  std::vector<double> n(static_cast<std::size_t>(p + 1), 0.0), left(n.size()), right(n.size());
  n[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[static_cast<std::size_t>(j)] = t - knots_[span + 1 - static_cast<arma::uword>(j)];
    right[static_cast<std::size_t>(j)] = knots_[span + static_cast<arma::uword>(j)] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
      const double temp = n[static_cast<std::size_t>(r)] / denom;
      n[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
      saved = left[static_cast<std::size_t>(j - r)] * temp;
    }
    n[static_cast<std::size_t>(j)] = saved;
  }

  arma::vec out(size_, arma::fill::zeros);
  const arma::uword first = span - static_cast<arma::uword>(p);
  for (int j = 0; j <= p; ++j) out(first + static_cast<arma::uword>(j)) = n[static_cast<std::size_t>(j)];
  return out;
}

arma::mat BSplineBasis::design(const arma::vec& grid) const {
  arma::mat out(size_, grid.n_elem);
  for (arma::uword j = 0; j < grid.n_elem; ++j) out.col(j) = evaluate(grid(j));
  return out;
}

arma::mat BSplineBasis::gram(int quadrature_order) const {
  if (quadrature_order < degree_ + 1) throw DataError("quadrature order must be at least degree + 1");
  arma::vec nodes, weights;
  gauss_legendre(quadrature_order, nodes, weights);

  arma::mat g(size_, size_, arma::fill::zeros);
  std::vector<double> breaks{domain_.lo};
  breaks.insert(breaks.end(), interior_.begin(), interior_.end());
  breaks.push_back(domain_.hi);
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (arma::uword q = 0; q < nodes.n_elem; ++q) {
      const arma::vec v = evaluate(mid + half * nodes(q));
      g += (half * weights(q)) * (v * v.t());
    }
  }
  return arma::symmatu(g);
}

arma::mat BSplineBasis::penalty() const {
  arma::mat pen(size_, size_, arma::fill::zeros);
  for (arma::uword p = 0; p + 1 < size_; ++p) {
    pen(p, p) += 1.0;
    pen(p + 1, p + 1) += 1.0;
    pen(p, p + 1) = -1.0;
    pen(p + 1, p) = -1.0;
  }
  return pen;
}

BasisSystem::BasisSystem(std::vector<BSplineBasis> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw DataError("basis system needs at least one dimension");
  if (factors_.size() > static_cast<std::size_t>(kMaxDimension))
    throw DataError("unsupported dimension: tensor bases are limited to " + std::to_string(kMaxDimension) +
                    " dimensions");
  size_ = 1;
  for (const auto& f : factors_) size_ *= f.size();
}

bool BasisSystem::contains(const arma::vec& point) const {
  if (point.n_elem != factors_.size()) return false;
  for (std::size_t d = 0; d < factors_.size(); ++d) {
    const Interval dom = factors_[d].domain();
    const double tol = domain_tolerance(dom);
    if (!(point(d) >= dom.lo - tol && point(d) <= dom.hi + tol)) return false;
  }
  return true;
}

arma::vec BasisSystem::evaluate(const arma::vec& point) const {
  if (point.n_elem != factors_.size())
    throw DataError("point has dimension " + std::to_string(point.n_elem) + ", basis expects " +
                    std::to_string(factors_.size()));
  arma::vec out = factors_[0].evaluate(point(0));
  for (std::size_t d = 1; d < factors_.size(); ++d) out = arma::kron(out, factors_[d].evaluate(point(d)));
  return out;
}

arma::mat BasisSystem::design(const arma::mat& grid) const {
  arma::mat out(size_, grid.n_cols);
  for (arma::uword j = 0; j < grid.n_cols; ++j) out.col(j) = evaluate(grid.col(j));
  return out;
}

arma::mat BasisSystem::gram(int quadrature_order) const {
  arma::mat g = factors_[0].gram(quadrature_order);
  for (std::size_t d = 1; d < factors_.size(); ++d) g = arma::kron(g, factors_[d].gram(quadrature_order));
  return g;
}

arma::mat BasisSystem::gram() const {
  arma::mat g = factors_[0].gram();
  for (std::size_t d = 1; d < factors_.size(); ++d) g = arma::kron(g, factors_[d].gram());
  return g;
}

arma::mat BasisSystem::penalty() const {
  if (factors_.size() == 1) return factors_[0].penalty();
  std::vector<arma::mat> grams;
  for (const auto& f : factors_) grams.push_back(f.gram());
  arma::mat total(size_, size_, arma::fill::zeros);
  for (std::size_t slot = 0; slot < factors_.size(); ++slot) {
    arma::mat term = slot == 0 ? factors_[0].penalty() : grams[0];
    for (std::size_t d = 1; d < factors_.size(); ++d) term = arma::kron(term, d == slot ? factors_[d].penalty() : grams[d]);
    total += term;
  }
  return arma::symmatu(total);
}

void gauss_legendre(int order, arma::vec& nodes, arma::vec& weights) {
  if (order < 1) throw DataError("Gauss-Legendre order must be positive");
  const auto n = static_cast<arma::uword>(order);
  nodes.set_size(n);
  weights.set_size(n);
  for (arma::uword i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (arma::uword k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (arma::uword k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
      p0 = p1;
      p1 = pk;
    }
    dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
    nodes(i) = -x;
    nodes(n - 1 - i) = x;
    weights(i) = weights(n - 1 - i) = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  if (n % 2 == 1) nodes((n - 1) / 2) = 0.0;
}

arma::vec equally_spaced(Interval domain, arma::uword n) {
  if (n == 1) return arma::vec{0.5 * (domain.lo + domain.hi)};
  arma::vec out = arma::linspace(domain.lo, domain.hi, n);
  out(n - 1) = domain.hi;
  return out;
}

}  // namespace funmix

namespace funmix {

BasisSystem BasisSpec::build() const {
  const std::size_t d = domain.size();
  if (d == 0) throw DataError("basis needs at least one dimension");
  if (degree.size() != d && degree.size() != 1) throw DataError("basis.degree must have one entry per dimension");
  if (knots.empty() && n_knots.size() != d && n_knots.size() != 1)
    throw DataError("basis.n_knots must have one entry per dimension");
  if (!knots.empty() && knots.size() != d) throw DataError("basis.knots must have one list per dimension");
  if (d > static_cast<std::size_t>(BasisSystem::kMaxDimension))
    throw DataError("unsupported dimension: tensor bases are limited to " +
                    std::to_string(BasisSystem::kMaxDimension) + " dimensions");
  std::vector<BSplineBasis> factors;
  for (std::size_t i = 0; i < d; ++i) {
    const int deg = degree.size() == 1 ? degree[0] : degree[i];
    if (!knots.empty())
      factors.emplace_back(deg, knots[i], domain[i]);
    else
      factors.push_back(BSplineBasis::uniform(deg, n_knots.size() == 1 ? n_knots[0] : n_knots[i], domain[i]));
  }
  return BasisSystem(std::move(factors));
}

}  // namespace funmix
