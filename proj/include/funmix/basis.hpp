#pragma once

#include <armadillo>
#include <vector>

namespace funmix {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
};

// One-dimensional B-spline basis on a clamped (open) knot vector: the
// boundary knots are repeated degree + 1 times so that the first and last
// basis functions interpolate the domain endpoints.
class BSplineBasis {
 public:
  BSplineBasis(int degree, std::vector<double> interior_knots, Interval domain);

  // Interior knots placed at equal spacing inside the domain.
  static BSplineBasis uniform(int degree, int n_interior_knots, Interval domain);

  int degree() const noexcept { return degree_; }
  const std::vector<double>& interior_knots() const noexcept { return interior_; }
  const std::vector<double>& knot_vector() const noexcept { return knots_; }
  Interval domain() const noexcept { return domain_; }
  arma::uword size() const noexcept { return size_; }

  // Values of all basis functions at t (length size()).
  arma::vec evaluate(double t) const;

  // P x n matrix, column j = B(grid[j]).
  arma::mat design(const arma::vec& grid) const;

  // Integrals of b_i b_j by Gauss-Legendre on every knot span.
  arma::mat gram(int quadrature_order) const;
  arma::mat gram() const { return gram(degree_ + 2); }

  // First-order random-walk penalty: tridiagonal with diagonal (1, 2, ..., 2, 1).
  arma::mat penalty() const;

 private:
  int degree_;
  std::vector<double> interior_;
  Interval domain_;
  std::vector<double> knots_;
  arma::uword size_;

  arma::uword find_span(double t) const;
};

// Tensor product of 1 to 4 one-dimensional bases. The product index runs
// with the last dimension fastest, i.e. B(t) = B_1(t_1) (x) ... (x) B_d(t_d).
class BasisSystem {
 public:
  static constexpr int kMaxDimension = 4;

  explicit BasisSystem(std::vector<BSplineBasis> factors);
  explicit BasisSystem(BSplineBasis factor) : BasisSystem(std::vector<BSplineBasis>{std::move(factor)}) {}

  int dimension() const noexcept { return static_cast<int>(factors_.size()); }
  arma::uword size() const noexcept { return size_; }
  const std::vector<BSplineBasis>& factors() const noexcept { return factors_; }
  const BSplineBasis& factor(int d) const { return factors_.at(static_cast<std::size_t>(d)); }

  bool contains(const arma::vec& point) const;

  arma::vec evaluate(const arma::vec& point) const;

  // grid is dimension() x n (one column per point); returns P x n.
  arma::mat design(const arma::mat& grid) const;

  arma::mat gram(int quadrature_order) const;
  arma::mat gram() const;

  // 1-D: the random-walk penalty. d-D: sum over dimensions of the 1-D
  // penalty in that slot Kronecker-multiplied with the Gram matrices of the
  // other factors.
  arma::mat penalty() const;

  // Rank of penalty(): P - 1 (constants form the null space), 0 when P = 1.
  arma::uword penalty_rank() const noexcept { return size_ > 1 ? size_ - 1 : 0; }

 private:
  std::vector<BSplineBasis> factors_;
  arma::uword size_;
};

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int order, arma::vec& nodes, arma::vec& weights);

// n equally spaced points covering [lo, hi] inclusive.
arma::vec equally_spaced(Interval domain, arma::uword n);

}  // namespace funmix

namespace funmix {

// Serializable description of a BasisSystem. Per dimension either an
// explicit interior knot list or a count of equally spaced knots.
struct BasisSpec {
  std::vector<int> degree{3};
  std::vector<int> n_knots{4};
  std::vector<std::vector<double>> knots;  // overrides n_knots when non-empty
  std::vector<Interval> domain{Interval{0.0, 1.0}};

  BasisSystem build() const;
};

}  // namespace funmix
