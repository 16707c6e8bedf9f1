#pragma once

#include <armadillo>
#include <filesystem>
#include <string>
#include <vector>

#include "funmix/basis.hpp"

namespace funmix {

// One functional observation: n_i evaluation points (columns of grid, one
// row per domain dimension) and the observed values there.
struct Observation {
  arma::mat grid;
  arma::vec values;

  arma::uword size() const noexcept { return values.n_elem; }
};

struct Dataset {
  std::vector<Observation> observations;

  arma::uword size() const noexcept { return observations.size(); }
  bool empty() const noexcept { return observations.empty(); }
  arma::uword total_points() const;
  int dimension() const;

  // Checks n_i >= 1, finite values, consistent dimension and (when a basis
  // is given) that every grid point lies in the basis domain.
  void validate() const;
  void validate(const BasisSystem& basis) const;
};

// Per-observation design quantities. Everything the sampler needs from the
// data reduces to these sufficient statistics in the P-dimensional
// coefficient space: S_i S_i', S_i y_i and y_i'y_i.
struct ObservationDesign {
  arma::mat S;        // P x n_i
  arma::mat gram;     // S S'
  arma::vec proj;     // S y
  arma::vec y;
  double sq = 0.0;    // y'y
};

class DesignSet {
 public:
  DesignSet() = default;
  // No observations: every conditional collapses to its prior.
  explicit DesignSet(arma::uword basis_size) : basis_size_(basis_size) {}
  DesignSet(const BasisSystem& basis, const Dataset& data);

  // Replace the values of observation i on its existing grid.
  void set_values(arma::uword i, const arma::vec& y);

  arma::uword size() const noexcept { return obs_.size(); }
  const ObservationDesign& operator[](arma::uword i) const { return obs_[i]; }
  arma::uword total_points() const noexcept { return total_points_; }
  arma::uword basis_size() const noexcept { return basis_size_; }

 private:
  std::vector<ObservationDesign> obs_;
  arma::uword total_points_ = 0;
  arma::uword basis_size_ = 0;
};

// Long-format CSV with header "obs_id,t1[,t2..],value". Observations are
// ordered by first appearance of their obs_id.
Dataset read_csv_dataset(const std::filesystem::path& path);
void write_csv_dataset(const Dataset& data, const std::filesystem::path& path);

// JSON lines: one {"grid": [...], "values": [...]} object per observation.
// 1-D grids are flat arrays; d-D grids are arrays of d-element arrays.
Dataset read_jsonl_dataset(const std::filesystem::path& path);
void write_jsonl_dataset(const Dataset& data, const std::filesystem::path& path);

// Dispatch on extension (.csv, .jsonl / .json).
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const Dataset& data, const std::filesystem::path& path);

// Shortest round-trip decimal representation (17 significant digits).
std::string format_double(double v);

}  // namespace funmix
