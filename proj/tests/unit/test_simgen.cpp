#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "funmix/errors.hpp"
#include "funmix/simgen.hpp"
#include "oracles.hpp"

using namespace funmix;
namespace fs = std::filesystem;

TEST_SUITE("simgen") {

TEST_CASE("study presets") {
  const SimSpec s1 = study1_spec();
  CHECK(s1.K == 2);
  CHECK(s1.N == 40);
  CHECK(s1.basis.build().size() == 8);
  CHECK(s1.nu_mean(0, 0) == 6.0);
  CHECK(s1.nu_mean(0, 7) == -8.0);
  CHECK(s1.nu_mean(1, 7) == 6.0);
  for (arma::uword m = 1; m < s1.M; ++m) CHECK(s1.phi_variance(m) < s1.phi_variance(m - 1));
  CHECK_NOTHROW(s1.validate());

  const SimSpec s2 = study2_spec();
  CHECK(s2.K == 3);
  CHECK(arma::all(s2.nu_mean.row(2) == 0.0));
  for (arma::uword m = 1; m < s2.M; ++m) CHECK(s2.phi_variance(m) < s2.phi_variance(m - 1));
  CHECK_FALSE(s2.orthogonal_phi);
}

TEST_CASE("phi is orthogonal to nu") {
  const SimSpec spec = study1_spec();
  const BasisSystem basis = spec.basis.build();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const ModelState t = draw_truth(spec, basis, rng);
    CHECK_NOTHROW(t.validate());
    for (arma::uword k = 0; k < spec.K; ++k) CHECK(arma::abs(t.nu * t.phi.slice(k)).max() < 1e-10);
  }
}

TEST_CASE("complement coordinates carry the stated variance") {
  const SimSpec spec = study1_spec(4);
  const BasisSystem basis = spec.basis.build();
  Rng rng(3);
  const int draws = 10000;
  arma::vec q(draws);
  for (int d = 0; d < draws; ++d) {
    const ModelState t = draw_truth(spec, basis, rng);
    const arma::mat B = orthogonal_complement(t.nu);
    q(d) = arma::as_scalar(B.col(0).t() * t.phi.slice(0).col(0));
  }
  // Var of a normal sample variance: 2 sigma^4 / (n - 1).
  const double se = std::sqrt(2.0 / (draws - 1)) * 2.25;
  CHECK(std::abs(arma::var(q) - 2.25) < 3.0 * se);
}

TEST_CASE("orthogonal complement") {
  const arma::mat nu = {{1, 0, 0, 0}, {0, 1, 1, 0}};
  const arma::mat B = orthogonal_complement(nu);
  CHECK(B.n_cols == 2);
  CHECK(arma::abs(nu * B).max() < 1e-14);
  CHECK(arma::abs(B.t() * B - arma::eye(2, 2)).max() < 1e-14);
  CHECK(orthogonal_complement(arma::eye(3, 3)).n_cols == 0);
}

TEST_CASE("stochastic mixture fractions") {
  SimSpec spec = study1_spec(10000);
  spec.stochastic_assignment = true;
  Rng rng(8);
  const auto comp = mixture_assignment(spec, rng);
  double first = 0.0;
  for (auto c : comp) first += c == 0 ? 1.0 : 0.0;
  const double frac = first / 10000.0;
  CHECK(std::abs(frac - 0.3) < 3.0 * std::sqrt(0.3 * 0.7 / 10000.0));
}

TEST_CASE("block assignment") {
  const SimSpec spec = study1_spec(41);
  Rng rng(1);
  const auto comp = mixture_assignment(spec, rng);
  // floor(0.3 * 41) = 12 each for the first two, the remainder 17 for the last.
  CHECK(std::count(comp.begin(), comp.end(), 0u) == 12);
  CHECK(std::count(comp.begin(), comp.end(), 1u) == 12);
  CHECK(std::count(comp.begin(), comp.end(), 2u) == 17);
  CHECK(std::is_sorted(comp.begin(), comp.end()));
}

TEST_CASE("noise-free data equal the model mean") {
  SimSpec spec = study1_spec(6);
  spec.sigma2 = 1e-300;
  spec.n_points = 25;
  const BasisSystem basis = spec.basis.build();
  Rng rng(4);
  const ModelState t = draw_truth(spec, basis, rng);
  const Dataset data = synthesize(t, spec, basis, rng);
  REQUIRE(data.size() == 6);
  for (arma::uword i = 0; i < data.size(); ++i) {
    const auto& o = data.observations[i];
    CHECK(o.size() == 25);
    CHECK(o.grid(0, 0) == 0.0);
    CHECK(o.grid(0, 24) == 1.0);
    for (arma::uword j = 0; j < o.size(); ++j)
      CHECK(std::abs(o.values(j) - oracle::point_mean(t, i, basis.evaluate(o.grid.col(j)))) < 1e-10);
  }
}

TEST_CASE("residual variance matches sigma2") {
  SimSpec spec = study1_spec(160);
  const BasisSystem basis = spec.basis.build();
  Rng rng(5);
  const ModelState t = draw_truth(spec, basis, rng);
  const Dataset data = synthesize(t, spec, basis, rng);
  CHECK(data.total_points() == 16000);
  double ss = 0.0;
  for (arma::uword i = 0; i < data.size(); ++i) {
    const auto& o = data.observations[i];
    for (arma::uword j = 0; j < o.size(); ++j) {
      const double r = o.values(j) - oracle::point_mean(t, i, basis.evaluate(o.grid.col(j)));
      ss += r * r;
    }
  }
  CHECK(std::abs(ss / 16000.0 / spec.sigma2 - 1.0) < 0.1);
}

TEST_CASE("same seed gives the same data") {
  const SimSpec spec = study2_spec(12);
  const BasisSystem basis = spec.basis.build();
  Rng a(21), b(21);
  const ModelState ta = draw_truth(spec, basis, a), tb = draw_truth(spec, basis, b);
  CHECK(ta == tb);
  const Dataset da = synthesize(ta, spec, basis, a), db = synthesize(tb, spec, basis, b);
  for (arma::uword i = 0; i < da.size(); ++i) CHECK(arma::all(da.observations[i].values == db.observations[i].values));

  // Replicates keep nu and phi but redraw memberships.
  ModelState r = ta;
  Rng c(22);
  draw_allocations(r, spec, c);
  CHECK(arma::all(arma::vectorise(r.nu == ta.nu)));
  CHECK(arma::all(arma::vectorise(r.phi == ta.phi)));
  CHECK_FALSE(arma::all(arma::vectorise(r.chi == ta.chi)));
}

TEST_CASE("synthetic data survive the file formats") {
  const SimSpec spec = study1_spec(5);
  const BasisSystem basis = spec.basis.build();
  Rng rng(6);
  const Dataset data = synthesize(draw_truth(spec, basis, rng), spec, basis, rng);
  const fs::path dir = fs::temp_directory_path() / "funmix_unit_simgen";
  fs::create_directories(dir);
  for (const char* name : {"sim.csv", "sim.jsonl"}) {
    write_dataset(data, dir / name);
    const Dataset back = read_dataset(dir / name);
    REQUIRE(back.size() == data.size());
    for (arma::uword i = 0; i < data.size(); ++i) {
      CHECK(arma::all(back.observations[i].values == data.observations[i].values));
      CHECK(arma::all(arma::vectorise(back.observations[i].grid == data.observations[i].grid)));
    }
  }
}

TEST_CASE("invalid specs") {
  SimSpec spec = study1_spec();
  spec.K = 8;
  spec.nu_mean = arma::mat(8, 8, arma::fill::zeros);
  spec.mixture = {{1.0, arma::vec(8, arma::fill::ones)}};
  CHECK_THROWS_AS(spec.validate(), DataError);
  spec.orthogonal_phi = false;
  CHECK_NOTHROW(spec.validate());

  SimSpec w = study1_spec();
  w.mixture[0].weight = 0.5;
  CHECK_THROWS_AS(w.validate(), DataError);
  SimSpec shape = study1_spec();
  shape.nu_mean = arma::mat(2, 5);
  CHECK_THROWS_AS(shape.validate(), DataError);
  SimSpec noise = study1_spec();
  noise.sigma2 = 0.0;
  CHECK_THROWS_AS(noise.validate(), DataError);
}

}  // TEST_SUITE
