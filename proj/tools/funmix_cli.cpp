// funmix: simulate, fit, summarize, select, rescale, eval.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "funmix/archive.hpp"
#include "funmix/config.hpp"
#include "funmix/data.hpp"
#include "funmix/errors.hpp"
#include "funmix/orchestration.hpp"
#include "funmix/postprocess.hpp"
#include "funmix/selection.hpp"
#include "funmix/simgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace funmix;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

RunConfig archive_config(const ChainArchive& a) {
  if (!a.meta.contains("config")) throw DataError("archive header has no config echo");
  return run_config_from_json(a.meta["config"]);
}

std::string target_file(std::string t) {
  for (auto& c : t)
    if (c == ':') c = '_';
  return t + ".csv";
}

// ---- simulate ----
struct SimulateArgs {
  std::string spec, out, format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<arma::uword> N;
};

int run_simulate(const SimulateArgs& a) {
  SimSpec spec = load_sim_spec(a.spec);
  if (a.seed) spec.seed = *a.seed;
  if (a.N) spec.N = *a.N;
  spec.validate();
  const BasisSystem basis = spec.basis.build();
  Rng truth_rng = Rng::stream(spec.seed, 0, 1);
  Rng noise_rng = Rng::stream(spec.seed, 0, 2);
  const ModelState truth = draw_truth(spec, basis, truth_rng);
  const Dataset data = synthesize(truth, spec, basis, noise_rng);
  const fs::path out(a.out);
  ensure_dir(out);
  write_dataset(data, out / ("data." + a.format));
  write_json({{"spec", sim_spec_to_json(spec)}, {"state", state_to_json(truth)}}, out / "truth.json");
  std::cout << "wrote " << data.size() << " observations to " << (out / ("data." + a.format)).string() << '\n';
  return kOk;
}

// ---- fit ----
struct FitArgs {
  std::string data, config, out;
  std::optional<arma::uword> chains, iterations;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int run_fit(const FitArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (a.chains) cfg.chains = *a.chains;
  if (a.iterations) cfg.iterations = *a.iterations;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  const Dataset data = read_dataset(a.data);
  const BasisSystem basis = cfg.basis.build();
  data.validate(basis);
  const Problem problem(basis, data, cfg.hyper);
  const fs::path out(a.out);
  ensure_dir(out);
  auto archive_path = [&](arma::uword c) { return out / ("chain" + std::to_string(c) + ".fma"); };

  std::vector<ChainOutcome> outcomes;
  if (cfg.chains == 1) {
    ChainOutcome o;
    const auto start = std::chrono::steady_clock::now();
    o.archive = fit_chain(problem, cfg, 0, archive_path(0));
    o.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    outcomes.push_back(std::move(o));
  } else {
    outcomes = run_parallel_chains(problem, cfg, cfg.chains,
                                   [&](arma::uword c) -> std::optional<fs::path> { return archive_path(c); });
  }

  int status = kOk;
  for (std::size_t c = 0; c < outcomes.size(); ++c) {
    const auto& o = outcomes[c];
    const std::string stem = "chain" + std::to_string(c);
    if (!o.archive) {
      std::cerr << "chain " << c << " failed: " << o.error << '\n';
      status = kNumerical;
      continue;
    }
    write_loglik_csv(*o.archive, out / (stem + "_loglik.csv"));
    json summary;
    summary["chain"] = c;
    summary["draws"] = o.archive->size();
    summary["config_hash"] = o.archive->meta.value("config_hash", "");
    summary["acceptance"] = o.archive->acceptance.to_json();
    summary["pooled_acceptance"] = {{"a1", o.archive->acceptance.pooled_rate("a1[")},
                                    {"a2", o.archive->acceptance.pooled_rate("a2[")},
                                    {"z", o.archive->acceptance.pooled_rate("z[")},
                                    {"pi", o.archive->acceptance.pooled_rate("pi")},
                                    {"alpha3", o.archive->acceptance.pooled_rate("alpha3")}};
    // The only non-deterministic field in any output.
    summary["timing"] = {{"wall_seconds", o.wall_seconds}};
    write_json(summary, out / (stem + "_summary.json"));
    if (!a.quiet)
      std::cout << "chain " << c << ": " << o.archive->size() << " draws, " << o.wall_seconds << " s\n";
  }
  return status;
}

// ---- summarize ----
struct SummarizeArgs {
  std::string archive, out;
  std::vector<std::string> targets;
  double alpha = 0.05;
  bool no_rescale = false;
  arma::uword mean_points = 101, cov_points = 25;
};

int run_summarize(const SummarizeArgs& a) {
  const ChainArchive archive = read_archive(a.archive);
  if (archive.draws.empty()) throw DataError("archive has no draws");
  const RunConfig cfg = archive_config(archive);
  const BasisSystem basis = cfg.basis.build();
  SummaryOptions opt;
  opt.alpha = a.alpha;
  opt.rescale = !a.no_rescale;
  opt.mean_points = a.mean_points;
  opt.cov_points = a.cov_points;
  const auto targets = a.targets.empty() ? default_targets(archive.dims.K) : a.targets;
  const fs::path out(a.out);
  ensure_dir(out);
  const auto tables = summarize_functions(archive.draws, basis, targets, opt);
  for (const auto& t : tables) write_summary_csv(t, out / target_file(t.target));

  std::vector<EigenSystem> eig;
  std::size_t flagged = 0;
  for (const auto& d : archive.draws) {
    const RescaleResult r = opt.rescale && archive.dims.K == 2 ? membership_rescale(d) : RescaleResult{d, false, {}};
    if (opt.rescale && archive.dims.K == 2 && !r.rescaled) ++flagged;
    eig.push_back(eigen_decompose(r.state, basis));
  }
  write_eigenvalue_csv(eig, opt.alpha, out / "eigenvalues.csv");
  if (opt.rescale && archive.dims.K > 2)
    std::cerr << "warning: rescaling is only implemented for K = 2; draws summarized as sampled\n";
  if (flagged) std::cerr << "warning: " << flagged << " draws could not be rescaled\n";
  std::cout << "wrote " << tables.size() << " tables to " << out.string() << '\n';
  return kOk;
}

// ---- select ----
struct SelectArgs {
  std::string data, out;
  std::vector<std::string> archives;
};

int run_select(const SelectArgs& a) {
  const Dataset data = read_dataset(a.data);
  std::vector<CriteriaReport> rows;
  for (const auto& path : a.archives) {
    const ChainArchive archive = read_archive(path);
    const RunConfig cfg = archive_config(archive);
    const BasisSystem basis = cfg.basis.build();
    data.validate(basis);
    const DesignSet designs(basis, data);
    rows.push_back(criteria_report(archive.draws, archive.loglik, designs));
  }
  std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.K < y.K; });
  const fs::path out(a.out);
  ensure_dir(out);
  write_criteria_csv(rows, out / "criteria.csv");
  json elbow;
  if (rows.size() >= 3) {
    std::vector<arma::uword> Ks;
    std::vector<double> ll;
    for (const auto& r : rows) {
      Ks.push_back(r.K);
      ll.push_back(r.mean_loglik);
    }
    const ElbowResult e = elbow_scan(Ks, ll);
    elbow["suggested_K"] = e.K ? json(*e.K) : json(nullptr);
    elbow["no_elbow"] = !e.K.has_value();
    elbow["curvature"] = std::vector<double>(e.curvature.begin(), e.curvature.end());
  } else {
    elbow["suggested_K"] = nullptr;
    elbow["no_elbow"] = true;
    elbow["note"] = "elbow scan needs at least three K values";
  }
  write_json(elbow, out / "elbow.json");
  std::cout << "suggested K: " << (elbow["suggested_K"].is_null() ? std::string("none") : elbow["suggested_K"].dump())
            << '\n';
  return kOk;
}

// ---- rescale ----
struct RescaleArgs {
  std::string archive, out;
};

int run_rescale(const RescaleArgs& a) {
  ChainArchive archive = read_archive(a.archive);
  if (archive.dims.K != 2) throw DataError("rescale is only defined for K = 2");
  std::size_t flagged = 0;
  for (auto& d : archive.draws) {
    RescaleResult r = membership_rescale(d);
    if (!r.rescaled) ++flagged;
    d = std::move(r.state);
  }
  archive.meta["rescaled"] = true;
  archive.meta["rescale_flagged"] = flagged;
  write_archive(archive, a.out);
  std::cout << "rescaled " << archive.size() - flagged << " of " << archive.size() << " draws\n";
  return kOk;
}

// ---- eval ----
struct EvalArgs {
  std::string truth, archive, out;
  bool no_rescale = false;
};

int run_eval(const EvalArgs& a) {
  const json t = read_json(a.truth);
  if (!t.contains("state")) throw DataError("truth file has no state");
  const ModelState truth = state_from_json(t["state"]);
  const ChainArchive archive = read_archive(a.archive);
  const RunConfig cfg = archive_config(archive);
  const BasisSystem basis = cfg.basis.build();
  SummaryOptions opt;
  opt.rescale = !a.no_rescale;
  const EvalReport rep = evaluate(truth, archive.draws, basis, opt);
  const fs::path out(a.out);
  ensure_dir(out);
  {
    std::ofstream f(out / "metrics.csv");
    f << "target,r_mise_pct\n";
    for (const auto& r : rep.rows) f << r.target << ',' << format_double(r.r_mise_pct) << '\n';
  }
  {
    std::ofstream f(out / "z_rmse.csv");
    f << "z_rmse\n" << format_double(rep.z_rmse) << '\n';
  }
  for (const auto& r : rep.rows) std::cout << r.target << ": " << r.r_mise_pct << "%\n";
  std::cout << "Z RMSE: " << rep.z_rmse << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian functional mixed membership models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "funmix 0.1.0");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Draw a synthetic dataset and its true parameters");
  sim->add_option("--spec", sa.spec, "Simulation spec (TOML or JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sa.out, "Output directory")->required();
  sim->add_option("--format", sa.format, "Dataset format")->check(CLI::IsMember({"csv", "jsonl"}));
  sim->add_option("--seed", sa.seed, "Override the spec seed");
  sim->add_option("--N", sa.N, "Override the number of observations")->check(CLI::PositiveNumber);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Run MCMC chains");
  fit->add_option("--data", fa.data, "Dataset (CSV or JSON lines)")->required()->check(CLI::ExistingFile);
  fit->add_option("--config", fa.config, "Run configuration (TOML or JSON)")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", fa.out, "Output directory")->required();
  fit->add_option("--chains", fa.chains, "Number of independent chains")->check(CLI::PositiveNumber);
  fit->add_option("--iterations", fa.iterations, "Override run.iterations")->check(CLI::PositiveNumber);
  fit->add_option("--seed", fa.seed, "Override run.seed");
  fit->add_flag("--quiet", fa.quiet);

  SummarizeArgs ma;
  auto* sum = app.add_subcommand("summarize", "Posterior medians and credible bands");
  sum->add_option("--archive", ma.archive, "Chain archive")->required()->check(CLI::ExistingFile);
  sum->add_option("--out", ma.out, "Output directory")->required();
  sum->add_option("--targets", ma.targets, "mean:k and cov:k:l targets (default: all)")->delimiter(',');
  sum->add_option("--alpha", ma.alpha, "Band level")->check(CLI::Range(1e-6, 0.999999));
  sum->add_flag("--no-rescale", ma.no_rescale, "Skip membership rescaling");
  sum->add_option("--mean-points", ma.mean_points)->check(CLI::Range(2, 100000));
  sum->add_option("--cov-points", ma.cov_points)->check(CLI::Range(2, 1000));

  SelectArgs la;
  auto* sel = app.add_subcommand("select", "Information criteria and elbow over K");
  sel->add_option("--data", la.data, "Dataset the archives were fitted to")->required()->check(CLI::ExistingFile);
  sel->add_option("--archives", la.archives, "One archive per K")->required()->check(CLI::ExistingFile);
  sel->add_option("--out", la.out, "Output directory")->required();

  RescaleArgs ra;
  auto* res = app.add_subcommand("rescale", "Apply membership rescaling to every draw (K = 2)");
  res->add_option("--archive", ra.archive)->required()->check(CLI::ExistingFile);
  res->add_option("--out", ra.out, "Rescaled archive path")->required();

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Recovery metrics against a simulation truth");
  ev->add_option("--truth", ea.truth, "truth.json from simulate")->required()->check(CLI::ExistingFile);
  ev->add_option("--archive", ea.archive)->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ea.out, "Output directory")->required();
  ev->add_flag("--no-rescale", ea.no_rescale);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*sim) return run_simulate(sa);
    if (*fit) return run_fit(fa);
    if (*sum) return run_summarize(ma);
    if (*sel) return run_select(la);
    if (*res) return run_rescale(ra);
    if (*ev) return run_eval(ea);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
