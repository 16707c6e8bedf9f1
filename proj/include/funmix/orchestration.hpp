#pragma once

#include <armadillo>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "funmix/archive.hpp"
#include "funmix/basis.hpp"
#include "funmix/data.hpp"
#include "funmix/priors.hpp"
#include "funmix/sampler.hpp"
#include "funmix/tempering.hpp"

namespace funmix {

struct MultiStartConfig {
  bool enabled = true;
  arma::uword n_try1 = 10;
  arma::uword n_try2 = 3;
  arma::uword n_mcmc1 = 2000;
  arma::uword n_mcmc2 = 2000;
  // Candidates are scored on the mean log-likelihood of this trailing
  // fraction of their iterations.
  double score_fraction = 0.2;
};

struct TemperingConfig {
  bool enabled = false;
  arma::uword n_rungs = 10;
  double beta_max = 2.0;
  arma::uword every = 10;  // attempt a tempered transition every k-th iteration
};

struct RunConfig {
  arma::uword K = 2;
  arma::uword M = 3;
  BasisSpec basis;
  Hyperparameters hyper;
  MultiStartConfig multistart;
  arma::uword iterations = 10000;
  double burn_in_fraction = 0.5;
  arma::uword thin = 10;
  std::uint64_t seed = 1;
  TemperingConfig tempering;
  bool orthogonal_phi = false;
  arma::uword chains = 1;
  std::string output_dir = "out";

  void validate() const;
  // Draws retained by run_chain: floor((iterations - burn) / thin).
  arma::uword burn_in() const;
  arma::uword expected_draws() const;
};

// Everything a chain needs, bundled once per dataset.
struct Problem {
  BasisSystem basis;
  DesignSet designs;
  SamplerContext context;

  Problem(BasisSystem b, const Dataset& data, const Hyperparameters& hyper);
  Problem(const Problem&) = delete;
  Problem& operator=(const Problem&) = delete;
};

// Mean of the trailing `fraction` of a log-likelihood trace.
double trailing_mean(const std::vector<double>& trace, double fraction);

// Index of the largest score; the first one wins ties.
std::size_t select_best(const std::vector<double>& scores);

struct Candidate {
  ModelState state;
  double score = 0.0;
};

// Hook so tests can replace the short chains with deterministic stubs.
using CandidateRunner = std::function<Candidate(arma::uword stage, arma::uword index)>;

// Runs n candidates through `runner` and returns the best one.
Candidate pick_candidate(arma::uword stage, arma::uword n, const CandidateRunner& runner,
                         std::vector<double>* scores = nullptr);

struct MultiStartReport {
  std::vector<double> stage1_scores;
  std::vector<double> stage2_scores;
  std::size_t stage1_best = 0;
  std::size_t stage2_best = 0;
  ModelState stage1_state;
};

// Two-stage warm start. Stage 1 runs n_try1 chains with Phi = 0 and chi = 0
// held fixed; stage 2 starts n_try2 chains from the stage-1 winner with nu and
// Z held fixed. Candidate streams are keyed by (seed, chain, stage * 1000 + try).
ModelState multiple_start(const Problem& problem, const RunConfig& config, std::uint64_t chain,
                          MultiStartReport* report = nullptr);

// Random starting point: a random observation's penalized least-squares fit
// for each nu_k, flat-ish memberships and prior draws for the rest.
ModelState random_start(const Problem& problem, const RunConfig& config, Rng& rng);

// Progress callback: (iteration, total).
using ProgressFn = std::function<void(arma::uword, arma::uword)>;

// Main loop with burn-in, thinning and the tempering schedule. When
// `archive_path` is given, draws are streamed to disk as they are kept.
ChainArchive run_chain(const Problem& problem, const RunConfig& config, const ModelState& init, Rng& rng,
                       const std::optional<std::filesystem::path>& archive_path = std::nullopt,
                       const ProgressFn& progress = {});

// Multiple start (when enabled) followed by run_chain for one chain id.
ChainArchive fit_chain(const Problem& problem, const RunConfig& config, std::uint64_t chain,
                       const std::optional<std::filesystem::path>& archive_path = std::nullopt);

struct ChainOutcome {
  std::optional<ChainArchive> archive;
  std::string error;  // empty on success
  double wall_seconds = 0.0;
};

// Independent chains on a worker pool; result i belongs to chain id i.
// A failing chain is reported in its own slot without stopping the others.
std::vector<ChainOutcome> run_parallel_chains(const Problem& problem, const RunConfig& config, arma::uword n_chains,
                                              const std::function<std::optional<std::filesystem::path>(arma::uword)>&
                                                  archive_path_for = {});

}  // namespace funmix
