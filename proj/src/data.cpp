#include "funmix/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "funmix/errors.hpp"

namespace funmix {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

std::string extension_of(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

arma::uword Dataset::total_points() const {
  arma::uword n = 0;
  for (const auto& o : observations) n += o.size();
  return n;
}

int Dataset::dimension() const {
  return observations.empty() ? 0 : static_cast<int>(observations.front().grid.n_rows);
}

void Dataset::validate() const {
  if (observations.empty()) throw DataError("dataset is empty");
  const arma::uword dim = observations.front().grid.n_rows;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    if (o.values.n_elem == 0) throw DataError("observation " + std::to_string(i) + " has no points");
    if (o.grid.n_cols != o.values.n_elem)
      throw DataError("observation " + std::to_string(i) + ": grid and values differ in length");
    if (o.grid.n_rows != dim) throw DataError("observation " + std::to_string(i) + ": inconsistent grid dimension");
    if (!o.values.is_finite() || !o.grid.is_finite())
      throw DataError("observation " + std::to_string(i) + " contains non-finite values");
  }
}

void Dataset::validate(const BasisSystem& basis) const {
  validate();
  if (dimension() != basis.dimension())
    throw DataError("dataset dimension " + std::to_string(dimension()) + " does not match basis dimension " +
                    std::to_string(basis.dimension()));
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& g = observations[i].grid;
    for (arma::uword j = 0; j < g.n_cols; ++j)
      if (!basis.contains(g.col(j)))
        throw DataError("domain error: observation " + std::to_string(i) + " point " + std::to_string(j) +
                        " lies outside the basis domain");
  }
}

DesignSet::DesignSet(const BasisSystem& basis, const Dataset& data) : basis_size_(basis.size()) {
  data.validate(basis);
  obs_.reserve(data.size());
  for (const auto& o : data.observations) {
    ObservationDesign d;
    d.S = basis.design(o.grid);
    d.gram = d.S * d.S.t();
    d.proj = d.S * o.values;
    d.y = o.values;
    d.sq = arma::dot(o.values, o.values);
    total_points_ += o.size();
    obs_.push_back(std::move(d));
  }
}

void DesignSet::set_values(arma::uword i, const arma::vec& y) {
  auto& d = obs_.at(i);
  if (y.n_elem != d.y.n_elem) throw DataError("replacement values have the wrong length");
  d.y = y;
  d.proj = d.S * y;
  d.sq = arma::dot(y, y);
}

Dataset read_csv_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  ++line_no;
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header.front() != "obs_id" || header.back() != "value")
    throw DataError(path.string() + ":1: header must be 'obs_id,t1[,t2..],value'");
  const std::size_t dim = header.size() - 2;

  std::map<std::string, std::size_t> index;
  std::vector<std::vector<double>> grids, values;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " columns, found " + std::to_string(cells.size()));
    auto [it, inserted] = index.try_emplace(cells[0], grids.size());
    if (inserted) {
      grids.emplace_back();
      values.emplace_back();
    }
    for (std::size_t d = 0; d < dim; ++d) grids[it->second].push_back(parse_number(cells[1 + d], path, line_no));
    values[it->second].push_back(parse_number(cells.back(), path, line_no));
  }

  Dataset data;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    Observation o;
    const arma::uword n = values[i].size();
    o.grid = arma::mat(grids[i].data(), dim, n);
    o.values = arma::vec(values[i]);
    data.observations.push_back(std::move(o));
  }
  data.validate();
  return data;
}

void write_csv_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file " + path.string());
  const int dim = data.dimension();
  out << "obs_id";
  for (int d = 1; d <= dim; ++d) out << ",t" << d;
  out << ",value\n";
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    const auto& o = data.observations[i];
    for (arma::uword j = 0; j < o.size(); ++j) {
      out << i;
      for (arma::uword d = 0; d < o.grid.n_rows; ++d) out << ',' << format_double(o.grid(d, j));
      out << ',' << format_double(o.values(j)) << '\n';
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

Dataset read_jsonl_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + e.what());
    }
    if (!j.is_object() || !j.contains("grid") || !j.contains("values"))
      throw DataError(where + "expected an object with 'grid' and 'values'");
    const auto& grid = j["grid"];
    const auto& vals = j["values"];
    if (!grid.is_array() || !vals.is_array() || grid.size() != vals.size())
      throw DataError(where + "'grid' and 'values' must be arrays of equal length");
    Observation o;
    const arma::uword n = vals.size();
    const arma::uword dim = (n > 0 && grid[0].is_array()) ? grid[0].size() : 1;
    o.grid.set_size(dim, n);
    o.values.set_size(n);
    try {
      for (arma::uword k = 0; k < n; ++k) {
        o.values(k) = vals[k].get<double>();
        if (grid[k].is_array()) {
          if (grid[k].size() != dim) throw DataError(where + "ragged grid point");
          for (arma::uword d = 0; d < dim; ++d) o.grid(d, k) = grid[k][d].get<double>();
        } else {
          if (dim != 1) throw DataError(where + "ragged grid point");
          o.grid(0, k) = grid[k].get<double>();
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + e.what());
    }
    data.observations.push_back(std::move(o));
  }
  data.validate();
  return data;
}

void write_jsonl_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file " + path.string());
  for (const auto& o : data.observations) {
    out << "{\"grid\":[";
    for (arma::uword j = 0; j < o.size(); ++j) {
      if (j) out << ',';
      if (o.grid.n_rows == 1) {
        out << format_double(o.grid(0, j));
      } else {
        out << '[';
        for (arma::uword d = 0; d < o.grid.n_rows; ++d) out << (d ? "," : "") << format_double(o.grid(d, j));
        out << ']';
      }
    }
    out << "],\"values\":[";
    for (arma::uword j = 0; j < o.size(); ++j) out << (j ? "," : "") << format_double(o.values(j));
    out << "]}\n";
  }
  if (!out) throw DataError("failed writing " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  const auto ext = extension_of(path);
  if (ext == ".csv") return read_csv_dataset(path);
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return read_jsonl_dataset(path);
  throw DataError("unknown dataset format '" + ext + "' (expected .csv or .jsonl)");
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  const auto ext = extension_of(path);
  if (ext == ".csv") return write_csv_dataset(data, path);
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return write_jsonl_dataset(data, path);
  throw DataError("unknown dataset format '" + ext + "' (expected .csv or .jsonl)");
}

}  // namespace funmix
