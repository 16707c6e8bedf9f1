#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <thread>

#include "funmix/errors.hpp"
#include "funmix/orchestration.hpp"
#include "funmix/simgen.hpp"
#include "oracles.hpp"

using namespace funmix;
namespace fs = std::filesystem;

namespace {

struct Planted {
  SimSpec spec;
  BasisSystem basis;
  ModelState truth;
  Dataset data;

  Planted(arma::uword N, arma::uword n_points, std::uint64_t seed)
      : spec(study1_spec(N)), basis(spec.basis.build()) {
    spec.n_points = n_points;
    Rng rng(seed);
    truth = draw_truth(spec, basis, rng);
    data = synthesize(truth, spec, basis, rng);
  }
};

RunConfig small_config() {
  RunConfig c;
  c.iterations = 60;
  c.burn_in_fraction = 0.5;
  c.thin = 3;
  c.multistart.n_try1 = 2;
  c.multistart.n_try2 = 2;
  c.multistart.n_mcmc1 = 20;
  c.multistart.n_mcmc2 = 20;
  return c;
}

// Mean |Z - Z_true| under the better of the two labelings.
double z_distance(const arma::mat& Z, const arma::mat& truth) {
  const double direct = arma::mean(arma::mean(arma::abs(Z - truth)));
  const double swapped = arma::mean(arma::mean(arma::abs(arma::fliplr(Z) - truth)));
  return std::min(direct, swapped);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "funmix_unit_orch";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("orchestration") {

TEST_CASE("run config validation and draw counts") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.iterations = 1000;
  c.burn_in_fraction = 0.3;
  c.thin = 7;
  CHECK(c.burn_in() == 300);
  CHECK(c.expected_draws() == 100);

  auto path_of = [](const RunConfig& bad) {
    try {
      bad.validate();
    } catch (const ConfigError& e) {
      return e.path();
    }
    return std::string("<none>");
  };
  RunConfig b = c;
  b.thin = 0;
  CHECK(path_of(b) == "run.thin");
  b = c;
  b.iterations = 0;
  CHECK(path_of(b) == "run.iterations");
  b = c;
  b.burn_in_fraction = 1.0;
  CHECK(path_of(b) == "run.burn_in_fraction");
  b = c;
  b.M = 100;
  CHECK(path_of(b) == "model.M");
  b = c;
  b.multistart.n_try1 = 0;
  CHECK(path_of(b) == "multistart.n_try1");
  b = c;
  b.tempering.enabled = true;
  b.tempering.beta_max = 0.5;
  CHECK(path_of(b) != "<none>");
}

TEST_CASE("candidate scoring") {
  CHECK(trailing_mean({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.2) == doctest::Approx(9.5));
  CHECK(trailing_mean({4.0}, 0.2) == 4.0);
  CHECK(select_best({1.0, 3.0, 3.0, 2.0}) == 1);
  CHECK(select_best({std::numeric_limits<double>::quiet_NaN(), -5.0}) == 1);

  // Stub chains: candidate i emits a ramp whose tail mean is known.
  const std::vector<std::vector<double>> traces = {
      {0, 0, 0, 0, 0, 0, 0, 0, 5, 5},   // tail 5
      {9, 9, 9, 9, 9, 9, 9, 9, 1, 2},   // tail 1.5 despite a high head
      {1, 1, 1, 1, 1, 1, 1, 1, 6, 4}};  // tail 5, ties with 0
  std::vector<double> scores;
  const CandidateRunner runner = [&](arma::uword, arma::uword i) {
    Candidate c;
    c.state = ModelState::zeros({1, 1, 1, 0});
    c.state.sigma2 = static_cast<double>(i + 1);
    c.score = trailing_mean(traces[i], 0.2);
    return c;
  };
  const Candidate best = pick_candidate(1, 3, runner, &scores);
  CHECK(best.state.sigma2 == 1.0);
  REQUIRE(scores.size() == 3);
  CHECK(scores[1] == doctest::Approx(1.5));
}

TEST_CASE("minimal multiple start returns a valid state") {
  Planted p(12, 20, 3);
  RunConfig c = small_config();
  c.multistart.n_try1 = 1;
  c.multistart.n_try2 = 1;
  Problem prob(p.basis, p.data, c.hyper);
  MultiStartReport rep;
  const ModelState s = multiple_start(prob, c, 0, &rep);
  CHECK_NOTHROW(s.validate());
  CHECK(rep.stage1_scores.size() == 1);
  CHECK(rep.stage2_scores.size() == 1);
}

TEST_CASE("multiple start returns the best stage-2 candidate") {
  Planted p(12, 20, 4);
  RunConfig c = small_config();
  c.multistart.n_try1 = 3;
  c.multistart.n_try2 = 3;
  Problem prob(p.basis, p.data, c.hyper);
  MultiStartReport rep;
  const ModelState s = multiple_start(prob, c, 0, &rep);
  const double best = *std::max_element(rep.stage2_scores.begin(), rep.stage2_scores.end());
  CHECK(rep.stage2_scores[rep.stage2_best] == best);
  CHECK(rep.stage1_scores[rep.stage1_best] ==
        *std::max_element(rep.stage1_scores.begin(), rep.stage1_scores.end()));
  // Stage 2 holds nu and Z at the stage-1 winner.
  CHECK(arma::approx_equal(s.nu, rep.stage1_state.nu, "absdiff", 0.0));
  CHECK(arma::approx_equal(s.Z, rep.stage1_state.Z, "absdiff", 0.0));
  // Reproducible.
  CHECK(multiple_start(prob, c, 0) == s);
}

TEST_CASE("stage-1 winner recovers planted memberships") {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Planted p(30, 25, 100 + seed);
    RunConfig c = small_config();
    c.seed = seed;
    c.multistart.n_try1 = 4;
    c.multistart.n_try2 = 1;
    c.multistart.n_mcmc1 = 150;
    c.multistart.n_mcmc2 = 1;
    Problem prob(p.basis, p.data, c.hyper);
    MultiStartReport rep;
    multiple_start(prob, c, 0, &rep);
    Rng rng(seed);
    arma::mat random(30, 2);
    for (arma::uword i = 0; i < 30; ++i) random.row(i) = rng.dirichlet(arma::vec{1.0, 1.0}).t();
    if (z_distance(rep.stage1_state.Z, p.truth.Z) < z_distance(random, p.truth.Z)) ++wins;
  }
  CHECK(wins >= 9);
}

TEST_CASE("run chain bookkeeping") {
  Planted p(8, 15, 5);
  RunConfig c = small_config();
  c.iterations = 10;
  c.burn_in_fraction = 0.0;
  c.thin = 1;
  Problem prob(p.basis, p.data, c.hyper);
  Rng r0(9);
  const ModelState init = random_start(prob, c, r0);
  Rng r1(1), r2(1);
  const ChainArchive a = run_chain(prob, c, init, r1);
  CHECK(a.size() == 10);
  CHECK(a.iterations.front() == 1);
  const ChainArchive b = run_chain(prob, c, init, r2);
  REQUIRE(b.size() == a.size());
  for (std::size_t d = 0; d < a.size(); ++d) CHECK(a.draws[d] == b.draws[d]);
  CHECK(a.loglik == b.loglik);

  // Recount acceptance by replaying the sweeps.
  Rng r3(1);
  ModelState s = init;
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> recount;
  for (int it = 0; it < 10; ++it) {
    const SweepReport rep = sweep(s, prob.context, r3);
    for (const auto& [k, v] : rep.accepted()) {
      recount[k].first += v ? 1 : 0;
      recount[k].second += 1;
    }
    CHECK(rep.log_likelihood == a.loglik[static_cast<std::size_t>(it)]);
  }
  CHECK(recount == a.acceptance.counts);
}

TEST_CASE("burn-in and thinning") {
  Planted p(6, 10, 6);
  RunConfig c = small_config();
  c.iterations = 100;
  c.burn_in_fraction = 0.25;
  c.thin = 10;
  Problem prob(p.basis, p.data, c.hyper);
  Rng rng(3);
  const ModelState init = random_start(prob, c, rng);
  const ChainArchive a = run_chain(prob, c, init, rng);
  CHECK(a.size() == c.expected_draws());
  CHECK(a.iterations.front() == 35);
  CHECK(a.iterations.back() == 95);
  for (double l : a.loglik) CHECK(std::isfinite(l));
}

TEST_CASE("tempering schedule records tempered moves") {
  Planted p(6, 10, 7);
  RunConfig c = small_config();
  c.iterations = 40;
  c.tempering.enabled = true;
  c.tempering.n_rungs = 2;
  c.tempering.beta_max = 1.5;
  c.tempering.every = 10;
  Problem prob(p.basis, p.data, c.hyper);
  Rng rng(3);
  const ModelState init = random_start(prob, c, rng);
  const ChainArchive a = run_chain(prob, c, init, rng);
  CHECK(a.acceptance.counts.at("tempered").second == 4);
  CHECK(a.acceptance.counts.at("pi").second == 36);
}

TEST_CASE("streamed archive equals the in-memory chain") {
  Planted p(6, 10, 8);
  RunConfig c = small_config();
  Problem prob(p.basis, p.data, c.hyper);
  Rng rng(3);
  const ModelState init = random_start(prob, c, rng);
  Rng r1(4);
  const auto path = scratch("stream.fma");
  const ChainArchive a = run_chain(prob, c, init, r1, path);
  const ChainArchive b = read_archive(path);
  REQUIRE(b.size() == a.size());
  for (std::size_t d = 0; d < a.size(); ++d) CHECK(a.draws[d] == b.draws[d]);
  CHECK(a.loglik == b.loglik);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("fit chain is reproducible and chains differ by stream") {
  Planted p(8, 12, 9);
  RunConfig c = small_config();
  Problem prob(p.basis, p.data, c.hyper);
  const ChainArchive a = fit_chain(prob, c, 0);
  const ChainArchive b = fit_chain(prob, c, 0);
  const ChainArchive d = fit_chain(prob, c, 1);
  CHECK(a.loglik == b.loglik);
  CHECK(a.loglik != d.loglik);
  CHECK(a.meta.at("chain") == 0);
  CHECK(d.meta.at("chain") == 1);
  CHECK(a.meta.at("config_hash") == d.meta.at("config_hash"));

  c.multistart.enabled = false;
  const ChainArchive e = fit_chain(prob, c, 0);
  CHECK(e.size() == c.expected_draws());
}

TEST_CASE("parallel chains") {
  Planted p(8, 12, 10);
  RunConfig c = small_config();
  Problem prob(p.basis, p.data, c.hyper);
  const auto one = run_parallel_chains(prob, c, 1);
  REQUIRE(one.size() == 1);
  REQUIRE(one[0].archive);
  const ChainArchive ref = fit_chain(prob, c, 0);
  CHECK(one[0].archive->loglik == ref.loglik);

  // Chain 1 writes into a missing directory and fails on its own.
  const auto outs = run_parallel_chains(prob, c, 3, [](arma::uword k) -> std::optional<fs::path> {
    if (k == 1) return fs::path("/nonexistent-dir/x/chain1.fma");
    return std::nullopt;
  });
  REQUIRE(outs.size() == 3);
  CHECK(outs[0].archive);
  CHECK_FALSE(outs[1].archive);
  CHECK_FALSE(outs[1].error.empty());
  CHECK(outs[2].archive);
  CHECK(outs[0].archive->loglik == ref.loglik);
  CHECK(outs[2].archive->loglik != ref.loglik);
}

TEST_CASE("parallel speed-up on a multi-core machine") {
  if (std::thread::hardware_concurrency() < 4) {
    MESSAGE("fewer than 4 hardware threads; timing check skipped");
    return;
  }
  Planted p(30, 40, 11);
  RunConfig c = small_config();
  c.iterations = 600;
  Problem prob(p.basis, p.data, c.hyper);
  auto t0 = std::chrono::steady_clock::now();
  run_parallel_chains(prob, c, 1);
  const double single = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  t0 = std::chrono::steady_clock::now();
  run_parallel_chains(prob, c, 4);
  const double four = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(four < 4.0 * single);
}

TEST_CASE("empty data is rejected") {
  const BasisSystem b(BSplineBasis::uniform(3, 2, {0, 1}));
  Dataset empty;
  RunConfig c = small_config();
  CHECK_THROWS_AS(Problem(b, empty, c.hyper), DataError);
}

}  // TEST_SUITE
