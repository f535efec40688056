#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "fockfk/parallel.hpp"
#include "fockfk/stoch.hpp"

using namespace fockfk;

TEST_CASE("bridge paths hit the end point exactly") {
  RVec x(2), y(2);
  x << 0.5, -1.0;
  y << -0.3, 0.8;
  TimeGrid grid{1.0, 32};
  const PathBundle b =
      sample_paths(PathBundle::Kind::bridge, x, y, grid, 200, 99);
  for (const auto& path : b.values) {
    CHECK((path.row(0).transpose() - x).norm() == 0.0);
    CHECK((path.row(grid.steps).transpose() - y).norm() == 0.0);
  }
}

TEST_CASE("bridge marginals match the Gaussian bridge moments") {
  RVec x(1), y(1);
  x << 0.0;
  y << 1.0;
  const double t = 1.0;
  TimeGrid grid{t, 20};
  const int n = 10000;
  const PathBundle b = sample_paths(PathBundle::Kind::bridge, x, y, grid, n, 2024);
  const int k = 7;  // interior node
  const double s = grid.node(k);
  double mean = 0.0;
  for (const auto& p : b.values) mean += p(k, 0);
  mean /= n;
  double var = 0.0;
  for (const auto& p : b.values) var += sqr(p(k, 0) - mean);
  var /= n - 1;
  const double mean_expect = x[0] + (s / t) * (y[0] - x[0]);
  const double var_expect = s * (t - s) / t;
  const double se_mean = std::sqrt(var / n);
  CHECK(std::abs(mean - mean_expect) < 3.0 * se_mean);
  const double se_var = var_expect * std::sqrt(2.0 / (n - 1));
  CHECK(std::abs(var - var_expect) < 3.0 * se_var);
}

TEST_CASE("Brownian marginal is N(x, t id) within 3 SE") {
  RVec x(1);
  x << 0.7;
  const double t = 0.8;
  TimeGrid grid{t, 16};
  const int n = 10000;
  const PathBundle b =
      sample_paths(PathBundle::Kind::brownian, x, std::nullopt, grid, n, 5);
  double mean = 0.0, m2 = 0.0, m4 = 0.0;
  for (const auto& p : b.values) {
    const double z = p(grid.steps, 0) - x[0];
    mean += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  mean /= n;
  m2 /= n;
  m4 /= n;
  CHECK(std::abs(mean) < 3.0 * std::sqrt(t / n));
  CHECK(std::abs(m2 - t) < 3.0 * std::sqrt((m4 - m2 * m2) / n));
  // fourth moment of a centered Gaussian
  CHECK(std::abs(m4 - 3.0 * t * t) < 4.0 * 3.0 * t * t * std::sqrt(24.0 / n));
}

TEST_CASE("reversal is an involution and keeps the quadratic variation") {
  RVec x(1);
  x << 0.0;
  TimeGrid grid{0.5, 24};
  const PathBundle b =
      sample_paths(PathBundle::Kind::brownian, x, std::nullopt, grid, 50, 7);
  const PathBundle r = reverse(b);
  const PathBundle rr = reverse(r);
  CHECK(r.reversed);
  CHECK_FALSE(rr.reversed);
  for (int p = 0; p < b.count(); ++p) {
    CHECK((b.values[static_cast<std::size_t>(p)] -
           rr.values[static_cast<std::size_t>(p)])
              .norm() == 0.0);
    // reversed Brownian pinned at time t ends at the start point
    CHECK(r.values[static_cast<std::size_t>(p)](grid.steps, 0) == x[0]);
    double qv = 0.0, qr = 0.0;
    for (int k = 0; k < grid.steps; ++k) {
      qv += sqr(b.values[static_cast<std::size_t>(p)](k + 1, 0) -
                b.values[static_cast<std::size_t>(p)](k, 0));
      qr += sqr(r.values[static_cast<std::size_t>(p)](k + 1, 0) -
                r.values[static_cast<std::size_t>(p)](k, 0));
    }
    CHECK(qv == doctest::Approx(qr).epsilon(1e-14));
  }
}

TEST_CASE("potential integration rules") {
  TimeGrid grid{2.0, 40};
  PotentialSpec one;
  one.V = [](const RVec&) { return 1.0; };
  RMat path = RMat::Zero(grid.nodes(), 1);
  CHECK(*integrate_potential(one, path, grid, QuadratureRule::midpoint) ==
        doctest::Approx(2.0).epsilon(1e-14));
  CHECK(*integrate_potential(one, path, grid, QuadratureRule::trapezoid) ==
        doctest::Approx(2.0).epsilon(1e-14));

  // V(x) = x along the deterministic path x_s = s gives t^2/2
  PotentialSpec linear;
  linear.V = [](const RVec& x) { return x[0]; };
  for (int k = 0; k < grid.nodes(); ++k) path(k, 0) = grid.node(k);
  CHECK(*integrate_potential(linear, path, grid, QuadratureRule::midpoint) ==
        doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("Coulomb potential integrals are finite along 3-d bridges") {
  PotentialSpec coulomb;
  coulomb.tag = PotentialSpec::Tag::kato_coulomb;
  coulomb.V = [](const RVec& x) { return 1.0 / x.norm(); };
  coulomb.singular_sites.push_back(RVec::Zero(3));
  RVec e1 = RVec::Zero(3);
  e1[0] = 1.0;
  TimeGrid grid{1.0, 64};
  PathBundle b = sample_paths(PathBundle::Kind::bridge, e1, e1, grid, 2000, 12);
  const PotentialIntegrals ints = potential_integrals(coulomb, b);
  CHECK(ints.excluded == 0);
  for (double v : ints.values) CHECK(std::isfinite(v));
}

TEST_CASE("paths never hit a declared null set") {
  RVec x(1);
  x << 0.0;
  TimeGrid grid{1.0, 50};
  const PathBundle b =
      sample_paths(PathBundle::Kind::brownian, x, std::nullopt, grid, 2000, 31);
  const double points[] = {0.123456, -0.654321, 0.999999};
  int hits = 0;
  for (const auto& p : b.values)
    for (int k = 1; k <= grid.steps; ++k)
      for (double q : points)
        if (p(k, 0) == q) ++hits;
  CHECK(hits == 0);
}

TEST_CASE("heat kernel values, normalization, and semigroup property") {
  RVec x(1), y(1);
  x << 0.0;
  y << 0.0;
  CHECK(heat_kernel(1.0, x, y) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-12));
  CHECK_THROWS_AS(heat_kernel(0.0, x, y), InvalidInput);

  // int p_t(x, y) dy = 1 on a wide grid
  const double t = 0.7;
  const int n = 4001;
  const double width = 12.0;
  const double h = 2.0 * width / (n - 1);
  double mass = 0.0, conv = 0.0;
  const double s = 0.3;
  RVec target(1);
  target << 0.4;
  for (int i = 0; i < n; ++i) {
    RVec z(1);
    z << -width + i * h;
    mass += h * heat_kernel(t, x, z);
    conv += h * heat_kernel(s, x, z) * heat_kernel(t - s, z, target);
  }
  CHECK(std::abs(mass - 1.0) < 1e-6);
  CHECK(std::abs(conv - heat_kernel(t, x, target)) < 1e-6);
}

TEST_CASE("path bundles export to CSV") {
  RVec x(2);
  x << 0.5, -0.25;
  TimeGrid grid{0.5, 2};
  const PathBundle b =
      sample_paths(PathBundle::Kind::brownian, x, std::nullopt, grid, 2, 9);
  const std::string csv = path_bundle_to_csv(b);
  CHECK(csv.rfind("path_index,node_index,x0,x1", 0) == 0);
  CHECK(csv.find("0,0,0.5,-0.25") != std::string::npos);
  // 2 paths x 3 nodes + header
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("sampling is bit-identical for any worker count") {
  RVec x(2), y(2);
  x << 0.0, 1.0;
  y << 0.5, -0.5;
  TimeGrid grid{1.0, 16};
  set_worker_count(1);
  const PathBundle a = sample_paths(PathBundle::Kind::bridge, x, y, grid, 257, 77);
  set_worker_count(5);
  const PathBundle b = sample_paths(PathBundle::Kind::bridge, x, y, grid, 257, 77);
  set_worker_count(0);
  const PathBundle c = sample_paths(PathBundle::Kind::bridge, x, y, grid, 257, 77);
  for (int p = 0; p < a.count(); ++p) {
    CHECK((a.values[static_cast<std::size_t>(p)] -
           b.values[static_cast<std::size_t>(p)])
              .norm() == 0.0);
    CHECK((a.values[static_cast<std::size_t>(p)] -
           c.values[static_cast<std::size_t>(p)])
              .norm() == 0.0);
  }
}
