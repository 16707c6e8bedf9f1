#include "funmix/archive.hpp"

#include <bit>
#include <cstring>

#include "funmix/errors.hpp"

namespace funmix {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'U', 'N', 'M', 'I', 'X', 'A', '1'};

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

nlohmann::json dims_json(const ModelDims& d) { return {{"K", d.K}, {"P", d.P}, {"M", d.M}, {"N", d.N}}; }

ModelDims dims_from(const nlohmann::json& j) {
  return {j.at("K").get<arma::uword>(), j.at("P").get<arma::uword>(), j.at("M").get<arma::uword>(),
          j.at("N").get<arma::uword>()};
}

nlohmann::json matrix_rows(const arma::mat& m) {
  nlohmann::json out = nlohmann::json::array();
  for (arma::uword r = 0; r < m.n_rows; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (arma::uword c = 0; c < m.n_cols; ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

arma::mat rows_matrix(const nlohmann::json& j, arma::uword rows, arma::uword cols, const char* key) {
  if (!j.is_array() || j.size() != rows) throw DataError(std::string("state field '") + key + "' has the wrong shape");
  arma::mat m(rows, cols);
  for (arma::uword r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw DataError(std::string("state field '") + key + "' has the wrong shape");
    for (arma::uword c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

// cube slices are K features of P x M; stored as [k][m] -> P-vector
nlohmann::json cube_json(const arma::cube& c) {
  nlohmann::json out = nlohmann::json::array();
  for (arma::uword k = 0; k < c.n_slices; ++k) out.push_back(matrix_rows(c.slice(k).t()));
  return out;
}

arma::cube json_cube(const nlohmann::json& j, arma::uword P, arma::uword M, arma::uword K, const char* key) {
  if (!j.is_array() || j.size() != K) throw DataError(std::string("state field '") + key + "' has the wrong shape");
  arma::cube c(P, M, K);
  for (arma::uword k = 0; k < K; ++k) c.slice(k) = rows_matrix(j[k], M, P, key).t();
  return c;
}

arma::vec json_vec(const nlohmann::json& j, arma::uword n, const char* key) {
  if (!j.is_array() || j.size() != n) throw DataError(std::string("state field '") + key + "' has the wrong length");
  arma::vec v(n);
  for (arma::uword i = 0; i < n; ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace

void AcceptanceCounts::record(const std::string& block, bool accepted) {
  auto& c = counts[block];
  c.first += accepted ? 1 : 0;
  c.second += 1;
}

double AcceptanceCounts::rate(const std::string& block) const {
  auto it = counts.find(block);
  if (it == counts.end() || it->second.second == 0) return 0.0;
  return static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
}

double AcceptanceCounts::pooled_rate(const std::string& prefix) const {
  std::uint64_t acc = 0, tot = 0;
  for (const auto& [name, c] : counts)
    if (name.rfind(prefix, 0) == 0) {
      acc += c.first;
      tot += c.second;
    }
  return tot ? static_cast<double>(acc) / static_cast<double>(tot) : 0.0;
}

nlohmann::json AcceptanceCounts::to_json() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, c] : counts)
    out[name] = {{"accepted", c.first}, {"attempted", c.second}, {"rate", rate(name)}};
  return out;
}

std::size_t state_length(const ModelDims& d) {
  return d.K * d.P + d.P * d.M * d.K + d.N * d.M + d.N * d.K + d.K + 2 + d.M * d.K + d.P * d.M * d.K + 3 * d.K;
}

arma::vec flatten_state(const ModelState& s) {
  return arma::join_cols(
      arma::join_cols(arma::vectorise(s.nu), arma::vectorise(s.phi), arma::vectorise(s.chi), arma::vectorise(s.Z)),
      arma::join_cols(s.pi, arma::vec{s.alpha3, s.sigma2}, arma::vectorise(s.delta), arma::vectorise(s.gamma)),
      arma::join_cols(s.a1, s.a2, s.tau));
}

ModelState unflatten_state(const arma::vec& v, const ModelDims& d) {
  if (v.n_elem != state_length(d)) throw DataError("flattened state has the wrong length");
  ModelState s;
  arma::uword pos = 0;
  auto take = [&](arma::uword n) {
    arma::vec out = v.subvec(pos, pos + n - 1);
    pos += n;
    return out;
  };
  s.nu = arma::reshape(take(d.K * d.P), d.K, d.P);
  s.phi = arma::cube(take(d.P * d.M * d.K).memptr(), d.P, d.M, d.K);
  s.chi = d.N ? arma::mat(arma::reshape(take(d.N * d.M), d.N, d.M)) : arma::mat(0, d.M);
  s.Z = d.N ? arma::mat(arma::reshape(take(d.N * d.K), d.N, d.K)) : arma::mat(0, d.K);
  s.pi = take(d.K);
  s.alpha3 = v(pos++);
  s.sigma2 = v(pos++);
  s.delta = arma::reshape(take(d.M * d.K), d.M, d.K);
  s.gamma = arma::cube(take(d.P * d.M * d.K).memptr(), d.P, d.M, d.K);
  s.a1 = take(d.K);
  s.a2 = take(d.K);
  s.tau = take(d.K);
  return s;
}

ArchiveWriter::ArchiveWriter(const std::filesystem::path& path, const ModelDims& dims, const nlohmann::json& meta)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), dims_(dims) {
  if (!out_) throw DataError("cannot write archive " + path.string());
  nlohmann::json header = meta;
  header["dims"] = dims_json(dims);
  header["record_length"] = state_length(dims) + 2;
  const std::string text = header.dump();
  out_.write(kMagic, sizeof kMagic);
  put_u64(out_, text.size());
  out_.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out_) throw DataError("failed writing archive header to " + path.string());
}

void ArchiveWriter::append(std::uint64_t iteration, double loglik, const ModelState& state) {
  const arma::vec flat = flatten_state(state);
  const double head[2] = {static_cast<double>(iteration), loglik};
  out_.write(reinterpret_cast<const char*>(head), sizeof head);
  out_.write(reinterpret_cast<const char*>(flat.memptr()), static_cast<std::streamsize>(flat.n_elem * sizeof(double)));
  if (!out_) throw DataError("failed writing archive record to " + path_.string());
}

void ArchiveWriter::flush() {
  out_.flush();
  if (!out_) throw DataError("failed flushing archive " + path_.string());
}

void write_archive(const ChainArchive& archive, const std::filesystem::path& path) {
  ArchiveWriter w(path, archive.dims, archive.meta);
  for (std::size_t d = 0; d < archive.draws.size(); ++d)
    w.append(archive.iterations.empty() ? d : archive.iterations[d], archive.loglik[d], archive.draws[d]);
  w.flush();
}

ChainArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open archive " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw DataError(path.string() + ": not a funmix archive");
  const std::uint64_t len = get_u64(in);
  if (!in || len > (1u << 30)) throw DataError(path.string() + ": corrupt archive header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(path.string() + ": truncated archive header");
  ChainArchive a;
  try {
    a.meta = nlohmann::json::parse(text);
    a.dims = dims_from(a.meta.at("dims"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad archive header: " + e.what());
  }
  const std::size_t rec = state_length(a.dims) + 2;
  std::vector<double> buf(rec);
  while (true) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(rec * sizeof(double)));
    if (in.gcount() == 0) break;
    if (static_cast<std::size_t>(in.gcount()) != rec * sizeof(double))
      throw DataError(path.string() + ": truncated archive record");
    a.iterations.push_back(static_cast<std::uint64_t>(buf[0]));
    a.loglik.push_back(buf[1]);
    a.draws.push_back(unflatten_state(arma::vec(buf.data() + 2, rec - 2), a.dims));
  }
  return a;
}

void write_loglik_csv(const ChainArchive& archive, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "iter,loglik\n";
  for (std::size_t d = 0; d < archive.loglik.size(); ++d)
    out << (archive.iterations.empty() ? d : archive.iterations[d]) << ',' << format_double(archive.loglik[d])
        << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

std::string config_hash(const nlohmann::json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json state_to_json(const ModelState& s) {
  const ModelDims d = s.dims();
  nlohmann::json j;
  j["dims"] = dims_json(d);
  j["nu"] = matrix_rows(s.nu);
  j["phi"] = cube_json(s.phi);
  j["chi"] = matrix_rows(s.chi);
  j["Z"] = matrix_rows(s.Z);
  j["pi"] = std::vector<double>(s.pi.begin(), s.pi.end());
  j["alpha3"] = s.alpha3;
  j["sigma2"] = s.sigma2;
  j["delta"] = matrix_rows(s.delta);
  j["gamma"] = cube_json(s.gamma);
  j["a1"] = std::vector<double>(s.a1.begin(), s.a1.end());
  j["a2"] = std::vector<double>(s.a2.begin(), s.a2.end());
  j["tau"] = std::vector<double>(s.tau.begin(), s.tau.end());
  return j;
}

ModelState state_from_json(const nlohmann::json& j) {
  try {
    const ModelDims d = dims_from(j.at("dims"));
    ModelState s;
    s.nu = rows_matrix(j.at("nu"), d.K, d.P, "nu");
    s.phi = json_cube(j.at("phi"), d.P, d.M, d.K, "phi");
    s.chi = rows_matrix(j.at("chi"), d.N, d.M, "chi");
    s.Z = rows_matrix(j.at("Z"), d.N, d.K, "Z");
    s.pi = json_vec(j.at("pi"), d.K, "pi");
    s.alpha3 = j.at("alpha3").get<double>();
    s.sigma2 = j.at("sigma2").get<double>();
    s.delta = rows_matrix(j.at("delta"), d.M, d.K, "delta");
    s.gamma = json_cube(j.at("gamma"), d.P, d.M, d.K, "gamma");
    s.a1 = json_vec(j.at("a1"), d.K, "a1");
    s.a2 = json_vec(j.at("a2"), d.K, "a2");
    s.tau = json_vec(j.at("tau"), d.K, "tau");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad state document: ") + e.what());
  }
}

}  // namespace funmix
