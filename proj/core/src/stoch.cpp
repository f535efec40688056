#include "fockfk/stoch.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "fockfk/parallel.hpp"

namespace fockfk {

namespace {

// Brownian increments with variance dt per coordinate; bridges are built from
// an auxiliary Brownian path W via b_s = x + (s/t)(y - x) + W_s - (s/t) W_t,
// which avoids the (t-s)^{-1} drift blow-up of the SDE construction near the
// terminal time.
RMat sample_one(PathBundle::Kind kind, const RVec& x, const RVec& y,
                const TimeGrid& grid, std::uint64_t seed) {
  const int nu = static_cast<int>(x.size());
  const int nodes = grid.nodes();
  const double sdt = std::sqrt(grid.dt());
  Rng rng(seed);
  RMat w(nodes, nu);
  w.row(0).setZero();
  for (int k = 1; k < nodes; ++k)
    for (int l = 0; l < nu; ++l)
      w(k, l) = w(k - 1, l) + sdt * rng.gaussian();

  RMat out(nodes, nu);
  if (kind == PathBundle::Kind::brownian) {
    for (int k = 0; k < nodes; ++k) out.row(k) = x.transpose() + w.row(k);
  } else {
    const double t = grid.t0;
    for (int k = 0; k < nodes; ++k) {
      const double s = grid.node(k);
      out.row(k) = x.transpose() + (s / t) * (y - x).transpose() + w.row(k) -
                   (s / t) * w.row(nodes - 1);
    }
    out.row(nodes - 1) = y.transpose();  // exact endpoint
  }
  return out;
}

}  // namespace

PathBundle sample_paths(PathBundle::Kind kind, const RVec& x,
                        const std::optional<RVec>& y, const TimeGrid& grid, int n,
                        std::uint64_t master_seed) {
  require(n >= 1, "sample_paths: need at least one path");
  require(grid.steps >= 1, "sample_paths: need at least one step");
  if (kind == PathBundle::Kind::bridge)
    require(y.has_value() && y->size() == x.size(),
            "sample_paths: bridge requires an end point");

  PathBundle b;
  b.kind = kind;
  b.grid = grid;
  b.nu = static_cast<int>(x.size());
  b.start = x;
  b.end = y ? *y : x;
  b.values.resize(static_cast<std::size_t>(n));
  b.seeds.resize(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p)
    b.seeds[static_cast<std::size_t>(p)] =
        path_seed(master_seed, static_cast<std::uint64_t>(p));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t p) {
    b.values[p] = sample_one(kind, b.start, b.end, grid, b.seeds[p]);
  });
  return b;
}

PathBundle reverse(const PathBundle& paths) {
  PathBundle out = paths;
  out.reversed = !paths.reversed;
  out.start = paths.end;
  out.end = paths.start;
  for (auto& v : out.values) v = v.colwise().reverse().eval();
  return out;
}

std::optional<double> integrate_potential(const PotentialSpec& V, const RMat& path,
                                          const TimeGrid& grid, QuadratureRule rule) {
  if (V.is_zero()) return 0.0;
  const double dt = grid.dt();
  double acc = 0.0;
  const int steps = grid.steps;
  if (rule == QuadratureRule::midpoint) {
    for (int k = 0; k < steps; ++k) {
      const RVec mid = 0.5 * (path.row(k) + path.row(k + 1)).transpose();
      const double v = V(mid);
      if (!std::isfinite(v)) return std::nullopt;
      acc += v * dt;
    }
  } else {
    for (int k = 0; k <= steps; ++k) {
      const double v = V(path.row(k).transpose());
      if (!std::isfinite(v)) return std::nullopt;
      acc += (k == 0 || k == steps ? 0.5 : 1.0) * v * dt;
    }
  }
  return acc;
}

PotentialIntegrals potential_integrals(const PotentialSpec& V, PathBundle& paths,
                                       QuadratureRule rule, int max_resample) {
  PotentialIntegrals out;
  out.values.assign(static_cast<std::size_t>(paths.count()), 0.0);
  if (V.is_zero()) return out;

  std::vector<int> resampled(static_cast<std::size_t>(paths.count()), 0);
  std::vector<int> excluded(static_cast<std::size_t>(paths.count()), 0);
  const std::optional<RVec> end =
      paths.kind == PathBundle::Kind::bridge ? std::optional<RVec>(paths.end)
                                             : std::nullopt;
  parallel_for(static_cast<std::size_t>(paths.count()), [&](std::size_t p) {
    for (int attempt = 0;; ++attempt) {
      const auto v = integrate_potential(V, paths.values[p], paths.grid, rule);
      if (v) {
        out.values[p] = *v;
        return;
      }
      if (attempt >= max_resample) {
        excluded[p] = 1;
        return;
      }
      resampled[p] += 1;
      paths.seeds[p] = mix64(paths.seeds[p]);
      paths.values[p] = sample_one(paths.kind, paths.start,
                                   end ? *end : paths.start, paths.grid,
                                   paths.seeds[p]);
    }
  });
  for (std::size_t p = 0; p < excluded.size(); ++p) {
    out.resampled += resampled[p];
    if (excluded[p]) {
      out.excluded += 1;
      paths.flagged.push_back(static_cast<int>(p));
    }
  }
  return out;
}

double heat_kernel(double t, const RVec& x, const RVec& y) {
  require(t > 0.0, "heat_kernel: t must be positive");
  const double nu = static_cast<double>(x.size());
  const double d2 = (x - y).squaredNorm();
  return std::pow(2.0 * M_PI * t, -0.5 * nu) * std::exp(-d2 / (2.0 * t));
}

std::string path_bundle_to_csv(const PathBundle& paths) {
  std::ostringstream os;
  os << "path_index,node_index";
  for (int l = 0; l < paths.nu; ++l) os << ",x" << l;
  os << "\n";
  char buf[32];
  for (int p = 0; p < paths.count(); ++p)
    for (int k = 0; k < paths.grid.nodes(); ++k) {
      os << p << "," << k;
      for (int l = 0; l < paths.nu; ++l) {
        std::snprintf(buf, sizeof(buf), "%.17g",
                      paths.values[static_cast<std::size_t>(p)](k, l));
        os << "," << buf;
      }
      os << "\n";
    }
  return os.str();
}

double heat_kernel1(double t, double x, double y) {
  RVec a(1), b(1);
  a[0] = x;
  b[0] = y;
  return heat_kernel(t, a, b);
}

}  // namespace fockfk
