#include "funmix/orchestration.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "funmix/config.hpp"
#include "funmix/errors.hpp"

namespace funmix {

namespace {

constexpr std::uint64_t kMainStage = 0;
constexpr std::uint64_t kStage1 = 1000;
constexpr std::uint64_t kStage2 = 2000;

BlockMask stage1_mask() {
  BlockMask b = BlockMask::none();
  b.nu = b.tau = b.z = b.pi = b.alpha3 = b.sigma2 = true;
  return b;
}

BlockMask stage2_mask() {
  BlockMask b;
  b.nu = false;
  b.z = false;
  return b;
}

double run_candidate(ModelState& s, const Problem& problem, const RunConfig& config, const BlockMask& mask,
                     arma::uword iterations, Rng& rng) {
  SweepOptions opt;
  opt.blocks = mask;
  opt.orthogonal_phi = config.orthogonal_phi;
  std::vector<double> trace;
  trace.reserve(iterations);
  for (arma::uword it = 0; it < iterations; ++it) trace.push_back(sweep(s, problem.context, rng, opt).log_likelihood);
  return trailing_mean(trace, config.multistart.score_fraction);
}

nlohmann::json chain_meta(const Problem& problem, const RunConfig& config, std::uint64_t chain) {
  nlohmann::json cfg = run_config_to_json(config);
  nlohmann::json meta;
  meta["format"] = "funmix-archive";
  meta["version"] = 1;
  meta["config"] = cfg;
  meta["config_hash"] = config_hash(cfg);
  meta["chain"] = chain;
  meta["basis_size"] = problem.basis.size();
  return meta;
}

}  // namespace

void RunConfig::validate() const {
  if (K < 1) throw ConfigError("must be at least 1", "model.K");
  if (M < 1) throw ConfigError("must be at least 1", "model.M");
  if (iterations < 1) throw ConfigError("must be positive", "run.iterations");
  if (thin < 1) throw ConfigError("must be at least 1", "run.thin");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
    throw ConfigError("must lie in [0, 1)", "run.burn_in_fraction");
  if (chains < 1) throw ConfigError("must be at least 1", "run.chains");
  if (multistart.enabled) {
    if (multistart.n_try1 < 1) throw ConfigError("must be at least 1", "multistart.n_try1");
    if (multistart.n_try2 < 1) throw ConfigError("must be at least 1", "multistart.n_try2");
    if (multistart.n_mcmc1 < 1) throw ConfigError("must be at least 1", "multistart.n_mcmc1");
    if (multistart.n_mcmc2 < 1) throw ConfigError("must be at least 1", "multistart.n_mcmc2");
    if (!(multistart.score_fraction > 0.0 && multistart.score_fraction <= 1.0))
      throw ConfigError("must lie in (0, 1]", "multistart.score_fraction");
  }
  if (tempering.enabled) {
    if (tempering.n_rungs < 1) throw ConfigError("must be at least 1", "tempering.n_rungs");
    if (!(tempering.beta_max >= 1.0)) throw ConfigError("invalid ladder: must be >= 1", "tempering.beta_max");
    if (tempering.every < 1) throw ConfigError("must be at least 1", "tempering.every");
  }
  hyper.validate();
  const arma::uword P = basis.build().size();
  if (M > K * P) throw ConfigError("M must not exceed K * P", "model.M");
}

arma::uword RunConfig::burn_in() const {
  return static_cast<arma::uword>(std::floor(burn_in_fraction * static_cast<double>(iterations)));
}

arma::uword RunConfig::expected_draws() const { return (iterations - burn_in()) / thin; }

Problem::Problem(BasisSystem b, const Dataset& data, const Hyperparameters& hyper)
    : basis(std::move(b)), designs(basis, data) {
  context.designs = &designs;
  context.hyper = hyper;
  context.penalty = basis.penalty();
  context.gram = basis.gram();
}

double trailing_mean(const std::vector<double>& trace, double fraction) {
  if (trace.empty()) throw DataError("cannot score an empty trace");
  const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(trace.size())));
  const std::size_t keep = std::clamp<std::size_t>(n, 1, trace.size());
  double s = 0.0;
  for (std::size_t i = trace.size() - keep; i < trace.size(); ++i) s += trace[i];
  return s / static_cast<double>(keep);
}

std::size_t select_best(const std::vector<double>& scores) {
  if (scores.empty()) throw DataError("no candidates to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best] || (std::isnan(scores[best]) && !std::isnan(scores[i]))) best = i;
  return best;
}

Candidate pick_candidate(arma::uword stage, arma::uword n, const CandidateRunner& runner, std::vector<double>* scores) {
  if (n < 1) throw DataError("need at least one candidate");
  std::vector<Candidate> cands;
  std::vector<double> sc;
  for (arma::uword t = 0; t < n; ++t) {
    cands.push_back(runner(stage, t));
    sc.push_back(cands.back().score);
  }
  const std::size_t best = select_best(sc);
  if (scores) *scores = sc;
  return std::move(cands[best]);
}

ModelState random_start(const Problem& problem, const RunConfig& config, Rng& rng) {
  const DesignSet& data = problem.designs;
  if (data.size() == 0) throw DataError("dataset is empty");
  const ModelDims dims{config.K, problem.basis.size(), config.M, data.size()};
  ModelState s = sample_prior(problem.context.hyper, dims, problem.context.penalty, rng);
  const arma::uword P = dims.P;
  for (arma::uword k = 0; k < dims.K; ++k) {
    const arma::uword i = std::min<arma::uword>(static_cast<arma::uword>(rng.uniform() * data.size()), data.size() - 1);
    const auto& d = data[i];
    const double scale = std::max(arma::trace(d.gram) / static_cast<double>(P), 1e-8);
    const arma::mat A = d.gram + 1e-2 * scale * (problem.context.penalty + arma::eye(P, P));
    s.nu.row(k) = arma::solve(A, d.proj, arma::solve_opts::likely_sympd).t();
  }
  for (arma::uword i = 0; i < dims.N; ++i)
    s.Z.row(i) = dims.K > 1 ? rng.dirichlet(arma::vec(dims.K, arma::fill::ones)).t() : arma::rowvec{1.0};
  s.phi.zeros();
  s.chi.zeros();
  s.normalize_simplex();
  double rss = 0.0;
  for (arma::uword i = 0; i < dims.N; ++i) rss += residual_sum_squares(data[i], s.fitted_coefficients(i));
  s.sigma2 = std::max(rss / static_cast<double>(data.total_points()), 1e-8);
  return s;
}

ModelState multiple_start(const Problem& problem, const RunConfig& config, std::uint64_t chain,
                          MultiStartReport* report) {
  if (problem.designs.size() == 0) throw DataError("dataset is empty");
  const auto& ms = config.multistart;
  std::vector<double> s1, s2;

  const Candidate first = pick_candidate(1, ms.n_try1, [&](arma::uword, arma::uword t) {
    Rng rng = Rng::stream(config.seed, chain, kStage1 + t);
    Candidate c{random_start(problem, config, rng), 0.0};
    c.score = run_candidate(c.state, problem, config, stage1_mask(), ms.n_mcmc1, rng);
    return c;
  }, &s1);

  const Candidate second = pick_candidate(2, ms.n_try2, [&](arma::uword, arma::uword t) {
    Rng rng = Rng::stream(config.seed, chain, kStage2 + t);
    Candidate c{first.state, 0.0};
    c.state.chi.imbue([&] { return rng.normal(); });
    c.state.phi.zeros();
    c.score = run_candidate(c.state, problem, config, stage2_mask(), ms.n_mcmc2, rng);
    return c;
  }, &s2);

  if (report) {
    report->stage1_scores = s1;
    report->stage2_scores = s2;
    report->stage1_best = select_best(s1);
    report->stage2_best = select_best(s2);
    report->stage1_state = first.state;
  }
  return second.state;
}

ChainArchive run_chain(const Problem& problem, const RunConfig& config, const ModelState& init, Rng& rng,
                       const std::optional<std::filesystem::path>& archive_path, const ProgressFn& progress) {
  init.validate();
  if (init.Z.n_rows != problem.designs.size()) throw DataError("initial state does not match the dataset");
  ChainArchive archive;
  archive.dims = init.dims();
  archive.meta = chain_meta(problem, config, 0);
  std::optional<ArchiveWriter> writer;
  if (archive_path) writer.emplace(*archive_path, archive.dims, archive.meta);

  SweepOptions opt;
  opt.orthogonal_phi = config.orthogonal_phi;
  std::optional<TemperatureLadder> ladder;
  if (config.tempering.enabled) ladder = build_ladder(config.tempering.n_rungs, config.tempering.beta_max);

  ModelState s = init;
  const arma::uword burn = config.burn_in();
  try {
    for (arma::uword it = 1; it <= config.iterations; ++it) {
      double ll;
      if (ladder && it % config.tempering.every == 0) {
        const auto t = tempered_transition(s, problem.context, *ladder, rng, opt);
        archive.acceptance.record("tempered", t.accepted);
        ll = log_likelihood_conditional(s, problem.designs);
      } else {
        const SweepReport r = sweep(s, problem.context, rng, opt);
        for (std::size_t k = 0; k < r.a1.size(); ++k) archive.acceptance.record("a1[" + std::to_string(k) + "]", r.a1[k]);
        for (std::size_t k = 0; k < r.a2.size(); ++k) archive.acceptance.record("a2[" + std::to_string(k) + "]", r.a2[k]);
        for (std::size_t i = 0; i < r.z.size(); ++i) archive.acceptance.record("z[" + std::to_string(i) + "]", r.z[i]);
        archive.acceptance.record("pi", r.pi);
        archive.acceptance.record("alpha3", r.alpha3);
        ll = r.log_likelihood;
      }
      if (!std::isfinite(ll)) throw NumericalError("non-finite log-likelihood at iteration " + std::to_string(it));
      if (it > burn && (it - burn) % config.thin == 0) {
        archive.draws.push_back(s);
        archive.loglik.push_back(ll);
        archive.iterations.push_back(it);
        if (writer) writer->append(it, ll, s);
      }
      if (progress) progress(it, config.iterations);
    }
  } catch (...) {
    if (writer) writer->flush();
    throw;
  }
  if (writer) writer->flush();
  return archive;
}

ChainArchive fit_chain(const Problem& problem, const RunConfig& config, std::uint64_t chain,
                       const std::optional<std::filesystem::path>& archive_path) {
  ModelState init;
  if (config.multistart.enabled) {
    init = multiple_start(problem, config, chain);
  } else {
    Rng rng = Rng::stream(config.seed, chain, kStage1);
    init = random_start(problem, config, rng);
  }
  Rng rng = Rng::stream(config.seed, chain, kMainStage);
  // Written after the run so the header carries the chain id.
  ChainArchive a = run_chain(problem, config, init, rng);
  a.meta["chain"] = chain;
  if (archive_path) write_archive(a, *archive_path);
  return a;
}

std::vector<ChainOutcome> run_parallel_chains(
    const Problem& problem, const RunConfig& config, arma::uword n_chains,
    const std::function<std::optional<std::filesystem::path>(arma::uword)>& archive_path_for) {
  if (n_chains < 1) throw DataError("need at least one chain");
  std::vector<ChainOutcome> out(n_chains);
  std::atomic<arma::uword> next{0};
  auto worker = [&] {
    for (arma::uword c = next++; c < n_chains; c = next++) {
      const auto start = std::chrono::steady_clock::now();
      try {
        out[c].archive = fit_chain(problem, config, c, archive_path_for ? archive_path_for(c) : std::nullopt);
      } catch (const std::exception& e) {
        out[c].error = e.what();
      }
      out[c].wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto n_threads = static_cast<unsigned>(std::min<arma::uword>(n_chains, hw));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace funmix
