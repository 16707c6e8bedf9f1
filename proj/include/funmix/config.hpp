#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>

#include "funmix/orchestration.hpp"
#include "funmix/simgen.hpp"

namespace funmix {

// A parsed TOML or JSON document plus the source line of every key path
// ("run.iterations", "basis.domain[0]") where the format allows it.
struct ConfigDocument {
  nlohmann::json root;
  std::map<std::string, int> lines;

  // Line of `path`, falling back to the nearest enclosing key; 0 if unknown.
  int line_of(const std::string& path) const;
};

ConfigDocument parse_toml_document(const std::string& text);
ConfigDocument parse_json_document(const std::string& text);
// Dispatch on extension: .toml, otherwise JSON.
ConfigDocument load_document(const std::filesystem::path& path);

// Unknown keys and wrong types raise ConfigError with the key path and line.
RunConfig parse_run_config(const ConfigDocument& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json basis_spec_to_json(const BasisSpec& spec);
nlohmann::json hyperparameters_to_json(const Hyperparameters& h);

// `study` picks the preset (study1, study2, custom); other keys override it.
SimSpec parse_sim_spec(const ConfigDocument& doc);
SimSpec load_sim_spec(const std::filesystem::path& path);
nlohmann::json sim_spec_to_json(const SimSpec& spec);

}  // namespace funmix
