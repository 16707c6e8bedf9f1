#pragma once

#include <armadillo>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "funmix/model.hpp"

namespace funmix {

// Accepted / attempted counts per Metropolis block ("a1[0]", "z[3]", ...).
struct AcceptanceCounts {
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> counts;

  void record(const std::string& block, bool accepted);
  double rate(const std::string& block) const;
  // Pooled rate over every block whose name starts with `prefix`.
  double pooled_rate(const std::string& prefix) const;
  nlohmann::json to_json() const;
};

// Thinned chain output. Wall-clock time is kept outside the archive so that
// archives are byte-reproducible under a fixed seed.
struct ChainArchive {
  ModelDims dims;
  nlohmann::json meta;  // config echo, basis, chain id, config hash
  std::vector<ModelState> draws;
  std::vector<double> loglik;
  std::vector<std::uint64_t> iterations;
  AcceptanceCounts acceptance;

  std::size_t size() const noexcept { return draws.size(); }
};

// Number of doubles in one flattened state.
std::size_t state_length(const ModelDims& dims);
arma::vec flatten_state(const ModelState& s);
ModelState unflatten_state(const arma::vec& v, const ModelDims& dims);

// Binary layout: 8-byte magic "FUNMIXA1", u64 header length, JSON header,
// then one record per draw of little-endian f64: iteration, loglik, state.
class ArchiveWriter {
 public:
  ArchiveWriter(const std::filesystem::path& path, const ModelDims& dims, const nlohmann::json& meta);
  void append(std::uint64_t iteration, double loglik, const ModelState& state);
  void flush();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  ModelDims dims_;
};

void write_archive(const ChainArchive& archive, const std::filesystem::path& path);
// Header and draws; the acceptance summary lives in the JSON sidecar.
ChainArchive read_archive(const std::filesystem::path& path);

// "iter,loglik" trace.
void write_loglik_csv(const ChainArchive& archive, const std::filesystem::path& path);

// Deterministic 64-bit FNV-1a hash of a JSON document's compact dump.
std::string config_hash(const nlohmann::json& j);

nlohmann::json state_to_json(const ModelState& s);
ModelState state_from_json(const nlohmann::json& j);

}  // namespace funmix
