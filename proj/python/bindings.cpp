// Thin Python surface: dict configs travel as JSON text, arrays as numpy.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "funmix/archive.hpp"
#include "funmix/config.hpp"
#include "funmix/errors.hpp"
#include "funmix/orchestration.hpp"
#include "funmix/postprocess.hpp"
#include "funmix/selection.hpp"
#include "funmix/simgen.hpp"

namespace py = pybind11;
using namespace funmix;

namespace {

py::array_t<double> to_numpy(const arma::vec& v) {
  py::array_t<double> out(v.n_elem);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// Row-major copy of a column-major matrix.
py::array_t<double> to_numpy(const arma::mat& m) {
  py::array_t<double> out({m.n_rows, m.n_cols});
  auto r = out.mutable_unchecked<2>();
  for (arma::uword i = 0; i < m.n_rows; ++i)
    for (arma::uword j = 0; j < m.n_cols; ++j) r(i, j) = m(i, j);
  return out;
}

arma::mat from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DataError("expected a 2-d array");
  const auto r = a.unchecked<2>();
  arma::mat m(r.shape(0), r.shape(1));
  for (py::ssize_t i = 0; i < r.shape(0); ++i)
    for (py::ssize_t j = 0; j < r.shape(1); ++j) m(i, j) = r(i, j);
  return m;
}

Dataset to_dataset(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& curves) {
  Dataset d;
  for (const auto& [t, y] : curves) {
    if (t.size() != y.size()) throw DataError("grid and values differ in length");
    Observation o;
    o.grid = arma::rowvec(t);
    o.values = arma::vec(y);
    d.observations.push_back(std::move(o));
  }
  d.validate();
  return d;
}

py::list from_dataset(const Dataset& d) {
  py::list out;
  for (const auto& o : d.observations) out.append(py::make_tuple(to_numpy(arma::vec(o.grid.row(0).t())), to_numpy(o.values)));
  return out;
}

py::tuple simulate(const std::string& spec_json) {
  SimSpec spec = parse_sim_spec(parse_json_document(spec_json));
  spec.validate();
  const BasisSystem basis = spec.basis.build();
  // Same streams as the command-line simulate.
  Rng truth_rng = Rng::stream(spec.seed, 0, 1);
  Rng noise_rng = Rng::stream(spec.seed, 0, 2);
  const ModelState truth = draw_truth(spec, basis, truth_rng);
  const Dataset data = synthesize(truth, spec, basis, noise_rng);
  const nlohmann::json t = {{"spec", sim_spec_to_json(spec)}, {"state", state_to_json(truth)}};
  return py::make_tuple(from_dataset(data), t.dump());
}

py::dict fit(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& curves,
             const std::string& config_json, std::uint64_t chain, std::optional<std::string> archive) {
  const RunConfig cfg = parse_run_config(parse_json_document(config_json));
  cfg.validate();
  const Dataset data = to_dataset(curves);
  std::optional<std::filesystem::path> path;
  if (archive) path = *archive;
  ChainArchive a;
  {
    py::gil_scoped_release release;
    const Problem problem(cfg.basis.build(), data, cfg.hyper);
    a = fit_chain(problem, cfg, chain, path);
  }
  py::dict out;
  out["loglik"] = to_numpy(arma::vec(a.loglik));
  std::vector<std::uint64_t> it(a.iterations.begin(), a.iterations.end());
  out["iterations"] = it;
  py::list states;
  for (const auto& s : a.draws) states.append(state_to_json(s).dump());
  out["draws"] = states;
  return out;
}

py::list summarize(const std::string& archive, std::vector<std::string> targets, double alpha,
                   arma::uword mean_points, arma::uword cov_points) {
  const ChainArchive a = read_archive(archive);
  const RunConfig cfg = run_config_from_json(a.meta.at("config"));
  if (targets.empty()) targets = default_targets(a.dims.K);
  SummaryOptions opt;
  opt.alpha = alpha;
  opt.mean_points = mean_points;
  opt.cov_points = cov_points;
  py::list out;
  for (const auto& s : summarize_functions(a.draws, cfg.basis.build(), targets, opt)) {
    py::dict d;
    d["target"] = s.target;
    d["points"] = to_numpy(s.points);
    d["median"] = to_numpy(s.median);
    d["lo_pt"] = to_numpy(s.lo_pt);
    d["hi_pt"] = to_numpy(s.hi_pt);
    d["lo_sim"] = to_numpy(s.lo_sim);
    d["hi_sim"] = to_numpy(s.hi_sim);
    out.append(d);
  }
  return out;
}

py::dict band(const py::array_t<double, py::array::c_style | py::array::forcecast>& draws, double alpha) {
  const CredibleBand b = simultaneous_band(from_numpy(draws), alpha);
  py::dict d;
  d["center"] = to_numpy(b.center);
  d["sd"] = to_numpy(b.sd);
  d["m_alpha"] = b.m_alpha;
  d["lower"] = to_numpy(b.lower);
  d["upper"] = to_numpy(b.upper);
  return d;
}

py::tuple elbow(const std::vector<arma::uword>& Ks, const std::vector<double>& ll) {
  const ElbowResult e = elbow_scan(Ks, ll);
  py::object k = py::none();
  if (e.K) k = py::int_(*e.K);
  return py::make_tuple(k, to_numpy(e.curvature));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian functional mixed membership models";

  auto base = py::register_exception<Error>(m, "FunmixError");
  // Translators run newest first, so the subclass goes last.
  auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", data.ptr());

  m.def("simulate", &simulate, py::arg("spec_json"));
  m.def("fit", &fit, py::arg("curves"), py::arg("config_json"), py::arg("chain") = 0,
        py::arg("archive") = py::none());
  m.def("summarize", &summarize, py::arg("archive"), py::arg("targets") = std::vector<std::string>{},
        py::arg("alpha") = 0.05, py::arg("mean_points") = 101, py::arg("cov_points") = 25);
  m.def("simultaneous_band", &band, py::arg("draws"), py::arg("alpha") = 0.05);
  m.def("elbow_scan", &elbow, py::arg("Ks"), py::arg("mean_loglik"));
  m.def("parameter_count", &parameter_count, py::arg("N"), py::arg("P"), py::arg("K"), py::arg("M"));
}
