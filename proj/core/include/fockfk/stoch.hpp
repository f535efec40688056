#ifndef FOCKFK_STOCH_HPP
#define FOCKFK_STOCH_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fockfk/common.hpp"
#include "fockfk/model.hpp"
#include "fockfk/rng.hpp"

namespace fockfk {

struct TimeGrid {
  double t0 = 1.0;
  int steps = 1;

  double dt() const { return t0 / steps; }
  double node(int k) const { return t0 * k / steps; }
  int nodes() const { return steps + 1; }
};

// A batch of discretized paths. values[p] is a (steps+1) x nu matrix of node
// positions; row 0 is the start. Bridge paths hit the end point exactly at the
// last node.
struct PathBundle {
  enum class Kind { brownian, bridge };
  Kind kind = Kind::brownian;
  bool reversed = false;
  TimeGrid grid;
  int nu = 1;
  RVec start;
  RVec end;  // bridge only
  std::vector<RMat> values;
  std::vector<std::uint64_t> seeds;
  std::vector<int> flagged;  // path indices excluded by potential integration

  int count() const { return static_cast<int>(values.size()); }
};

PathBundle sample_paths(PathBundle::Kind kind, const RVec& x,
                        const std::optional<RVec>& y, const TimeGrid& grid, int n,
                        std::uint64_t master_seed);

PathBundle reverse(const PathBundle& paths);

enum class QuadratureRule { midpoint, trapezoid };

// integral of V along one path; nullopt if V is non-finite at a quadrature node
std::optional<double> integrate_potential(const PotentialSpec& V, const RMat& path,
                                          const TimeGrid& grid,
                                          QuadratureRule rule = QuadratureRule::midpoint);

// Per-path potential integrals for a whole bundle. A non-finite hit is retried
// with a perturbed seed (the path is resampled in place and logged); paths
// still non-finite after the retries are flagged and excluded.
struct PotentialIntegrals {
  std::vector<double> values;
  int resampled = 0;
  int excluded = 0;
};
PotentialIntegrals potential_integrals(const PotentialSpec& V, PathBundle& paths,
                                       QuadratureRule rule = QuadratureRule::midpoint,
                                       int max_resample = 8);

double heat_kernel(double t, const RVec& x, const RVec& y);
double heat_kernel1(double t, double x, double y);

// debugging export: path_index, node_index, coordinates
std::string path_bundle_to_csv(const PathBundle& paths);

}  // namespace fockfk

#endif
