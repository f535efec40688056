#ifndef FOCKFK_RUNNER_HPP
#define FOCKFK_RUNNER_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fockfk/fock.hpp"
#include "fockfk/model.hpp"
#include "fockfk/report.hpp"

namespace fockfk {

// Flat "key = value" text with [section] headers; arrays as comma lists.
struct ConfigError : std::runtime_error {
  int line = 0;
  explicit ConfigError(const std::string& msg, int line_no)
      : std::runtime_error(msg), line(line_no) {}
};

class Config {
 public:
  static Config parse(const std::string& text);
  static Config from_file(const std::string& path);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  int get(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key,
                               const std::vector<double>& fallback) const;
  void set(const std::string& key, const std::string& value);

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }
  std::string canonical_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;  // section.key
  std::map<std::string, std::size_t> index_;
};

// Desk model assembled from a config: context, coupling preset, potential,
// lattice, and run parameters.
struct DeskModel {
  FockContext ctx;
  CoefficientVector coupling;
  PotentialSpec potential;
  Lattice lattice;
  double t = 0.5;
  int paths = 10000;
  int steps = 200;
  std::uint64_t master_seed = 1;
  double c_tol = 8.0;  // frozen scheme-tolerance constant
  std::vector<RVec> sup_grid;
};

DeskModel build_model(const Config& cfg);

std::uint64_t suite_seed(std::uint64_t master, const std::string& suite);
std::string run_id(const Config& cfg, std::uint64_t seed);

struct RunOptions {
  std::string out_dir;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  std::vector<std::string> suites;  // empty = subcommand default
  int paths_override = 0;
  int steps_override = 0;
  int jobs = 0;
};

// Subcommands: validate, semigroup, bounds, positivity, commutators, kato,
// groundstate, converge. Returns the process exit code (0 pass, 1 fail,
// 2 config error) and writes report.json plus per-suite CSVs.
int run(const Config& cfg, const std::string& subcommand, const RunOptions& opts,
        Report* report_out = nullptr);

}  // namespace fockfk

#endif
