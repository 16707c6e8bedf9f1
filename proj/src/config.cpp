#include "funmix/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <toml.hpp>

#include "funmix/errors.hpp"

namespace funmix {

using nlohmann::json;

int ConfigDocument::line_of(const std::string& path) const {
  std::string p = path;
  while (!p.empty()) {
    if (auto it = lines.find(p); it != lines.end()) return it->second;
    const auto cut = p.find_last_of(".[");
    if (cut == std::string::npos) break;
    p.resize(cut);
  }
  return 0;
}

namespace {

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

std::string index_path(const std::string& prefix, std::size_t i) {
  return prefix + "[" + std::to_string(i) + "]";
}

void toml_to_json(const toml::node& node, const std::string& path, json& out, std::map<std::string, int>& lines) {
  if (!path.empty()) lines.emplace(path, static_cast<int>(node.source().begin.line));
  if (const auto* t = node.as_table()) {
    out = json::object();
    for (auto&& [key, value] : *t) {
      const std::string k(key.str());
      const std::string p = join_path(path, k);
      lines[p] = static_cast<int>(key.source().begin.line ? key.source().begin.line : value.source().begin.line);
      toml_to_json(value, p, out[k], lines);
    }
  } else if (const auto* a = node.as_array()) {
    out = json::array();
    for (std::size_t i = 0; i < a->size(); ++i) {
      json e;
      toml_to_json(*a->get(i), index_path(path, i), e, lines);
      out.push_back(std::move(e));
    }
  } else if (const auto* v = node.as_integer()) {
    out = v->get();
  } else if (const auto* v = node.as_floating_point()) {
    out = v->get();
  } else if (const auto* v = node.as_boolean()) {
    out = v->get();
  } else if (const auto* v = node.as_string()) {
    out = v->get();
  } else {
    throw ConfigError("unsupported value type (dates and times are not accepted)", path,
                      static_cast<int>(node.source().begin.line));
  }
}

// Records the line of every object key and array element of an already
// validated JSON text.
void scan_json_lines(const std::string& text, std::map<std::string, int>& lines) {
  struct Frame {
    bool object = false;
    std::string path;
    std::size_t index = 0;
    std::string pending;
    bool expect_key = true;
    bool element_seen = false;
  };
  std::vector<Frame> stack;
  int line = 1;
  auto value_start = [&]() -> std::string {
    if (stack.empty()) return {};
    Frame& f = stack.back();
    if (f.object) return f.pending;
    if (!f.element_seen) {
      f.element_seen = true;
      const std::string p = index_path(f.path, f.index);
      lines.emplace(p, line);
      return p;
    }
    return index_path(f.path, f.index);
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == '\n') {
      ++line;
    } else if (ch == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        s += text[i];
      }
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        Frame& f = stack.back();
        f.pending = join_path(f.path, s);
        f.expect_key = false;
        lines.emplace(f.pending, line);
      } else {
        value_start();
      }
    } else if (ch == '{' || ch == '[') {
      const std::string p = value_start();
      Frame f;
      f.object = ch == '{';
      f.path = p;
      stack.push_back(std::move(f));
    } else if (ch == '}' || ch == ']') {
      if (!stack.empty()) stack.pop_back();
    } else if (ch == ',') {
      if (!stack.empty()) {
        Frame& f = stack.back();
        if (f.object) {
          f.expect_key = true;
        } else {
          ++f.index;
          f.element_seen = false;
        }
      }
    } else if (ch != ':' && ch != ' ' && ch != '\t' && ch != '\r') {
      value_start();
    }
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Typed access to one table with unknown-key detection.
class Section {
 public:
  Section(const ConfigDocument& doc, const json& obj, std::string prefix)
      : doc_(doc), obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) fail("expected a table", prefix_);
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  [[noreturn]] void fail(const std::string& what, const std::string& path) const {
    throw ConfigError(what, path, doc_.line_of(path));
  }

  const json* get(const std::string& key) {
    used_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return join_path(prefix_, key); }

  void read(const std::string& key, arma::uword& out) {
    if (const json* v = get(key)) out = to_uword(*v, path(key));
  }
  void read(const std::string& key, std::uint64_t& out, bool) {
    if (const json* v = get(key)) out = to_uword(*v, path(key));
  }
  void read(const std::string& key, double& out) {
    if (const json* v = get(key)) out = to_double(*v, path(key));
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) fail("expected a boolean", path(key));
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) fail("expected a string", path(key));
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, arma::vec& out) {
    if (const json* v = get(key)) out = to_vec(*v, path(key));
  }
  void read(const std::string& key, arma::mat& out) {
    if (const json* v = get(key)) {
      const std::string p = path(key);
      if (!v->is_array() || v->empty()) fail("expected a non-empty array of arrays", p);
      for (std::size_t r = 0; r < v->size(); ++r) {
        const arma::vec row = to_vec((*v)[r], index_path(p, r));
        if (r == 0) out.set_size(v->size(), row.n_elem);
        if (row.n_elem != out.n_cols) fail("rows must have equal length", index_path(p, r));
        out.row(r) = row.t();
      }
    }
  }

  Section child(const std::string& key) {
    const json* v = get(key);
    return Section(doc_, *v, path(key));
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.count(it.key())) fail("unknown key", path(it.key()));
  }

  double to_double(const json& v, const std::string& p) const {
    if (!v.is_number()) fail("expected a number", p);
    return v.get<double>();
  }
  std::uint64_t to_uword(const json& v, const std::string& p) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      if (v.get<std::int64_t>() < 0) fail("expected a non-negative integer", p);
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    fail("expected a non-negative integer", p);
  }
  arma::vec to_vec(const json& v, const std::string& p) const {
    if (!v.is_array()) fail("expected an array of numbers", p);
    arma::vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out(i) = to_double(v[i], index_path(p, i));
    return out;
  }

  const std::string& prefix() const { return prefix_; }

 private:
  const ConfigDocument& doc_;
  const json& obj_;
  std::string prefix_;
  std::set<std::string> used_;
};

// Accepts a scalar or a per-dimension list.
std::vector<int> int_list(Section& sec, const std::string& key, const json& v) {
  std::vector<int> out;
  const std::string p = sec.path(key);
  auto one = [&](const json& e, const std::string& q) {
    if (!e.is_number_integer()) sec.fail("expected an integer", q);
    out.push_back(e.get<int>());
  };
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) one(v[i], index_path(p, i));
  } else {
    one(v, p);
  }
  return out;
}

BasisSpec parse_basis(Section sec) {
  BasisSpec spec;
  if (const json* v = sec.get("degree")) spec.degree = int_list(sec, "degree", *v);
  if (const json* v = sec.get("n_knots")) spec.n_knots = int_list(sec, "n_knots", *v);
  if (const json* v = sec.get("knots")) {
    const std::string p = sec.path("knots");
    if (!v->is_array()) sec.fail("expected an array", p);
    spec.knots.clear();
    const bool nested = !v->empty() && (*v)[0].is_array();
    if (nested) {
      for (std::size_t i = 0; i < v->size(); ++i) {
        const arma::vec k = sec.to_vec((*v)[i], index_path(p, i));
        spec.knots.emplace_back(k.begin(), k.end());
      }
    } else {
      const arma::vec k = sec.to_vec(*v, p);
      spec.knots.emplace_back(k.begin(), k.end());
    }
  }
  if (const json* v = sec.get("domain")) {
    const std::string p = sec.path("domain");
    if (!v->is_array() || v->empty()) sec.fail("expected [lo, hi] or a list of them", p);
    spec.domain.clear();
    auto one = [&](const json& e, const std::string& q) {
      const arma::vec d = sec.to_vec(e, q);
      if (d.n_elem != 2) sec.fail("expected [lo, hi]", q);
      spec.domain.push_back(Interval{d(0), d(1)});
    };
    if ((*v)[0].is_array()) {
      for (std::size_t i = 0; i < v->size(); ++i) one((*v)[i], index_path(p, i));
    } else {
      one(*v, p);
    }
  }
  sec.finish();
  try {
    (void)spec.build();
  } catch (const ConfigError&) {
    throw;
  } catch (const DataError& e) {
    sec.fail(e.what(), sec.prefix());
  }
  return spec;
}

Hyperparameters parse_hyper(Section sec) {
  Hyperparameters h;
  sec.read("nu_gamma", h.nu_gamma);
  sec.read("alpha1", h.alpha1);
  sec.read("beta1", h.beta1);
  sec.read("alpha2", h.alpha2);
  sec.read("beta2", h.beta2);
  sec.read("alpha_tau", h.alpha_tau);
  sec.read("beta_tau", h.beta_tau);
  sec.read("alpha0", h.alpha0);
  sec.read("beta0", h.beta0);
  sec.read("c", h.c);
  sec.read("b", h.b);
  sec.read("a_z", h.a_z);
  sec.read("a_pi", h.a_pi);
  sec.read("sigma_alpha3", h.sigma_alpha3);
  sec.read("eps1", h.eps1);
  sec.read("eps2", h.eps2);
  sec.finish();
  return h;
}

}  // namespace

ConfigDocument parse_toml_document(const std::string& text) {
  ConfigDocument doc;
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string(e.description()), {}, static_cast<int>(e.source().begin.line));
  }
  toml_to_json(table, "", doc.root, doc.lines);
  return doc;
}

ConfigDocument parse_json_document(const std::string& text) {
  ConfigDocument doc;
  try {
    doc.root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t end = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end ? end - 1 : 0), '\n'));
    throw ConfigError("malformed JSON", {}, line);
  }
  scan_json_lines(text, doc.lines);
  return doc;
}

ConfigDocument load_document(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  if (path.extension() == ".toml") return parse_toml_document(text);
  return parse_json_document(text);
}

RunConfig parse_run_config(const ConfigDocument& doc) {
  RunConfig c;
  try {
    Section root(doc, doc.root, "");
    if (root.has("model")) {
      Section s = root.child("model");
      s.read("K", c.K);
      s.read("M", c.M);
      s.read("orthogonal_phi", c.orthogonal_phi);
      s.finish();
    }
    if (root.has("basis")) c.basis = parse_basis(root.child("basis"));
    if (root.has("hyper")) c.hyper = parse_hyper(root.child("hyper"));
    if (root.has("run")) {
      Section s = root.child("run");
      s.read("iterations", c.iterations);
      s.read("burn_in_fraction", c.burn_in_fraction);
      s.read("thin", c.thin);
      s.read("seed", c.seed, true);
      s.read("chains", c.chains);
      s.read("output_dir", c.output_dir);
      s.finish();
    }
    if (root.has("multistart")) {
      Section s = root.child("multistart");
      s.read("enabled", c.multistart.enabled);
      s.read("n_try1", c.multistart.n_try1);
      s.read("n_try2", c.multistart.n_try2);
      s.read("n_mcmc1", c.multistart.n_mcmc1);
      s.read("n_mcmc2", c.multistart.n_mcmc2);
      s.read("score_fraction", c.multistart.score_fraction);
      s.finish();
    }
    if (root.has("tempering")) {
      Section s = root.child("tempering");
      s.read("enabled", c.tempering.enabled);
      s.read("n_rungs", c.tempering.n_rungs);
      s.read("beta_max", c.tempering.beta_max);
      s.read("every", c.tempering.every);
      s.finish();
    }
    root.finish();
    c.validate();
  } catch (const ConfigError& e) {
    if (e.line() == 0 && !e.path().empty()) throw e.at_line(doc.line_of(e.path()));
    throw;
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(load_document(path)); }

json basis_spec_to_json(const BasisSpec& spec) {
  json j;
  j["degree"] = spec.degree;
  if (spec.knots.empty())
    j["n_knots"] = spec.n_knots;
  else
    j["knots"] = spec.knots;
  json d = json::array();
  for (const auto& iv : spec.domain) d.push_back({iv.lo, iv.hi});
  j["domain"] = d;
  return j;
}

json hyperparameters_to_json(const Hyperparameters& h) {
  json j;
  j["nu_gamma"] = h.nu_gamma;
  j["alpha1"] = h.alpha1;
  j["beta1"] = h.beta1;
  j["alpha2"] = h.alpha2;
  j["beta2"] = h.beta2;
  j["alpha_tau"] = h.alpha_tau;
  j["beta_tau"] = h.beta_tau;
  j["alpha0"] = h.alpha0;
  j["beta0"] = h.beta0;
  if (!h.c.empty()) j["c"] = std::vector<double>(h.c.begin(), h.c.end());
  j["b"] = h.b;
  j["a_z"] = h.a_z;
  j["a_pi"] = h.a_pi;
  j["sigma_alpha3"] = h.sigma_alpha3;
  j["eps1"] = h.eps1;
  j["eps2"] = h.eps2;
  return j;
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["model"] = {{"K", c.K}, {"M", c.M}, {"orthogonal_phi", c.orthogonal_phi}};
  j["basis"] = basis_spec_to_json(c.basis);
  j["hyper"] = hyperparameters_to_json(c.hyper);
  j["run"] = {{"iterations", c.iterations}, {"burn_in_fraction", c.burn_in_fraction}, {"thin", c.thin},
              {"seed", c.seed},             {"chains", c.chains},                     {"output_dir", c.output_dir}};
  j["multistart"] = {{"enabled", c.multistart.enabled},   {"n_try1", c.multistart.n_try1},
                     {"n_try2", c.multistart.n_try2},     {"n_mcmc1", c.multistart.n_mcmc1},
                     {"n_mcmc2", c.multistart.n_mcmc2},   {"score_fraction", c.multistart.score_fraction}};
  j["tempering"] = {{"enabled", c.tempering.enabled},
                    {"n_rungs", c.tempering.n_rungs},
                    {"beta_max", c.tempering.beta_max},
                    {"every", c.tempering.every}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  ConfigDocument doc;
  doc.root = j;
  return parse_run_config(doc);
}

SimSpec parse_sim_spec(const ConfigDocument& doc) {
  try {
    Section root(doc, doc.root, "");
    std::string study = "study1";
    root.read("study", study);
    arma::uword N = 0;
    root.read("N", N);
    SimSpec s;
    if (study == "study1") {
      s = study1_spec(N ? N : 40);
    } else if (study == "study2") {
      s = study2_spec(N ? N : 100);
    } else if (study == "custom") {
      s = study1_spec(N ? N : 40);
      s.study = Study::Custom;
    } else {
      root.fail("expected study1, study2 or custom", "study");
    }
    root.read("n_points", s.n_points);
    root.read("seed", s.seed, true);
    root.read("sigma2", s.sigma2);
    root.read("stochastic_assignment", s.stochastic_assignment);
    {
      root.read("K", s.K);
      root.read("M", s.M);
      root.read("nu_mean", s.nu_mean);
      root.read("nu_scale", s.nu_scale);
      root.read("phi_variance", s.phi_variance);
      root.read("orthogonal_phi", s.orthogonal_phi);
      if (root.has("basis")) s.basis = parse_basis(root.child("basis"));
      if (const json* v = root.get("mixture")) {
        if (!v->is_array() || v->empty()) root.fail("expected a list of components", "mixture");
        s.mixture.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
          Section c(doc, (*v)[i], index_path("mixture", i));
          MixtureComponent mc;
          c.read("weight", mc.weight);
          c.read("concentration", mc.concentration);
          c.finish();
          s.mixture.push_back(mc);
        }
      }
    }
    root.finish();
    try {
      s.validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    return s;
  } catch (const ConfigError& e) {
    if (e.line() == 0 && !e.path().empty()) throw e.at_line(doc.line_of(e.path()));
    throw;
  }
}

SimSpec load_sim_spec(const std::filesystem::path& path) { return parse_sim_spec(load_document(path)); }

json sim_spec_to_json(const SimSpec& s) {
  json j;
  j["study"] = s.study == Study::Study1 ? "study1" : s.study == Study::Study2 ? "study2" : "custom";
  j["N"] = s.N;
  j["n_points"] = s.n_points;
  j["seed"] = s.seed;
  j["sigma2"] = s.sigma2;
  j["stochastic_assignment"] = s.stochastic_assignment;
  j["K"] = s.K;
  j["M"] = s.M;
  j["basis"] = basis_spec_to_json(s.basis);
  json mean = json::array();
  for (arma::uword k = 0; k < s.nu_mean.n_rows; ++k) {
    const arma::rowvec r = s.nu_mean.row(k);
    mean.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["nu_mean"] = mean;
  j["nu_scale"] = s.nu_scale;
  j["phi_variance"] = std::vector<double>(s.phi_variance.begin(), s.phi_variance.end());
  j["orthogonal_phi"] = s.orthogonal_phi;
  json mix = json::array();
  for (const auto& c : s.mixture)
    mix.push_back({{"weight", c.weight},
                   {"concentration", std::vector<double>(c.concentration.begin(), c.concentration.end())}});
  j["mixture"] = mix;
  return j;
}

}  // namespace funmix
