#include <doctest.h>

#include <cmath>

#include "fockfk/kato.hpp"
#include "fockfk/rng.hpp"
#include "fockfk/stoch.hpp"

using namespace fockfk;

namespace {

std::vector<RVec> probe_grid3() {
  std::vector<RVec> grid;
  for (double x : {0.0, 0.4, 1.1}) {
    RVec v = RVec::Zero(3);
    v[0] = x;
    grid.push_back(v);
  }
  return grid;
}

}  // namespace

TEST_CASE("constant potential: closed-form radial integral 2 pi r^2") {
  auto one = [](const RVec&) { return 1.0; };
  for (double r : {0.3, 0.8, 1.5}) {
    const double got = kato_seminorm(one, r, 3, probe_grid3());
    CHECK(got == doctest::Approx(2.0 * M_PI * r * r).epsilon(1e-6));
  }
  auto zero = [](const RVec&) { return 0.0; };
  CHECK(kato_seminorm(zero, 0.5, 3, probe_grid3()) == 0.0);
}

TEST_CASE("Coulomb seminorm is finite and decreasing as r drops") {
  auto coulomb = [](const RVec& y) { return 1.0 / y.norm(); };
  const KatoTrend trend =
      kato_trend(coulomb, {1.0, 0.7, 0.5, 0.3, 0.15}, 3, probe_grid3());
  CHECK(trend.finite);
  CHECK(trend.decreasing);
  for (double v : trend.value) CHECK(v > 0.0);
}

TEST_CASE("Kato seminorm is translation invariant") {
  auto coulomb = [](const RVec& y) { return 1.0 / y.norm(); };
  RVec shift = RVec::Zero(3);
  shift[1] = 0.7;
  auto shifted = [shift](const RVec& y) { return 1.0 / (y - shift).norm(); };
  std::vector<RVec> grid = probe_grid3();
  std::vector<RVec> grid_shifted;
  for (const auto& x : grid) grid_shifted.push_back(RVec(x + shift));
  const double a = kato_seminorm(coulomb, 0.6, 3, grid);
  const double b = kato_seminorm(shifted, 0.6, 3, grid_shifted);
  CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("log branch in two dimensions") {
  auto one = [](const RVec&) { return 1.0; };
  std::vector<RVec> grid = {RVec::Zero(2)};
  // int_{|z|<r} -ln|z| dz = 2 pi r^2 (1/4 - ln(r)/2)
  const double r = 0.5;
  const double expect = 2.0 * M_PI * r * r * (0.25 - 0.5 * std::log(r));
  CHECK(kato_seminorm(one, r, 2, grid) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("Khasminskii moments: trivial and bounded potentials") {
  KhasminskiiOptions opts;
  opts.paths = 1500;
  opts.steps = 32;
  opts.seed = 5;
  opts.z_grid = {RVec::Zero(1)};
  opts.t_grid = {0.1, 0.3, 0.6, 1.0};

  const KhasminskiiRecord zero = khasminskii_check(zero_potential(), 1, opts);
  for (double m : zero.moment_sup) CHECK(m == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(zero.finite);

  PotentialSpec bounded;
  bounded.V = [](const RVec& x) { return 0.5 * std::cos(x[0]); };
  const KhasminskiiRecord rec = khasminskii_check(bounded, 1, opts);
  CHECK(rec.finite);
  CHECK(rec.envelope_ok);
  // pathwise bound: moment <= e^{p ||V||_inf t} for every t
  for (std::size_t i = 0; i < rec.t_grid.size(); ++i)
    CHECK(rec.moment_sup[i] <= std::exp(0.5 * rec.t_grid[i]) + 1e-12);
}

TEST_CASE("Khasminskii envelope for the Coulomb negative part") {
  PotentialSpec coulomb;
  coulomb.tag = PotentialSpec::Tag::kato_coulomb;
  coulomb.V = [](const RVec& y) { return -1.0 / y.norm(); };
  coulomb.singular_sites.push_back(RVec::Zero(3));
  KhasminskiiOptions opts;
  opts.paths = 3000;
  opts.steps = 48;
  opts.seed = 11;
  for (double z : {0.0, 0.5}) {
    RVec v = RVec::Zero(3);
    v[0] = z;
    opts.z_grid.push_back(v);
  }
  const KhasminskiiRecord rec = khasminskii_check(coulomb, 3, opts);
  CHECK(rec.finite);
  CHECK(rec.envelope_ok);
  CHECK(rec.r_squared >= 0.9);
  CHECK(rec.smalltime.front() < rec.smalltime.back());
  CHECK(rec.bridge_lhs <= rec.bridge_rhs * 1.5);
}

TEST_CASE("Jensen chain e^{int E|V|} <= E e^{int |V|}") {
  PotentialSpec v;
  v.V = [](const RVec& x) { return 0.8 * std::exp(-sqr(x[0])); };
  RVec x0(1);
  x0[0] = 0.2;
  TimeGrid grid{0.7, 32};
  PathBundle paths =
      sample_paths(PathBundle::Kind::brownian, x0, std::nullopt, grid, 4000, 21);
  auto ints = potential_integrals(v, paths);
  double mean_int = 0.0, mean_exp = 0.0;
  for (double val : ints.values) {
    mean_int += val;
    mean_exp += std::exp(val);
  }
  mean_int /= ints.values.size();
  mean_exp /= ints.values.size();
  CHECK(std::exp(mean_int) <= mean_exp + 1e-12);
}

TEST_CASE("Coulomb shift inequality via Young on random samples") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    RVec y(3), r(3);
    for (int i = 0; i < 3; ++i) {
      y[i] = 2.0 * rng.gaussian();
      r[i] = 0.5 * rng.gaussian();
    }
    if (y.norm() < 1e-6 || (y - r).norm() < 1e-6) continue;
    const double lhs = std::abs(1.0 / (y - r).norm() - 1.0 / y.norm());
    const double rhs = std::sqrt(r.norm()) * (std::pow((y - r).norm(), -1.5) +
                                              std::pow(y.norm(), -1.5));
    CHECK(lhs <= rhs + 1e-12);
  }
}

TEST_CASE("form bound: trivial, bounded, and clamped Coulomb potentials") {
  // V = 0 passes trivially
  const FormBoundRecord r0 = form_bound_check(zero_potential(), 1.0, 1, 17, 2.0, 0.1);
  CHECK(r0.pass);

  // bounded V with large gamma: c_gamma <= ||V||_inf / gamma makes it strict
  PotentialSpec bounded;
  bounded.V = [](const RVec& x) { return 0.6 / (1.0 + x.squaredNorm()); };
  const double gamma = 8.0;
  std::vector<RVec> grid = {RVec::Zero(1)};
  const double cg = c_gamma_estimate(bounded, 1, gamma, grid, 400, 24, 2.0, 3);
  CHECK(cg <= 0.6 / gamma * 1.3);
  const FormBoundRecord rb = form_bound_check(bounded, gamma, 1, 21, 3.0, cg);
  CHECK(rb.pass);

  // clamped Coulomb on a nu = 3 lattice
  PotentialSpec coulomb;
  coulomb.tag = PotentialSpec::Tag::kato_coulomb;
  coulomb.V = [](const RVec& y) { return -1.0 / std::max(y.norm(), 0.15); };
  coulomb.singular_sites.push_back(RVec::Zero(3));
  std::vector<RVec> grid3 = probe_grid3();
  const double cg3 = c_gamma_estimate(coulomb, 3, 6.0, grid3, 400, 24, 2.0, 7);
  const FormBoundRecord rc = form_bound_check(coulomb, 6.0, 3, 7, 1.5, cg3);
  MESSAGE("clamped Coulomb: c_gamma ", cg3, " min eig ", rc.min_eigenvalue);
  CHECK(rc.pass);
}

TEST_CASE("bd-cgammaV upper bound holds for the estimated c_gamma") {
  PotentialSpec bounded;
  bounded.V = [](const RVec& x) { return 0.4 * std::exp(-sqr(x[0])); };
  std::vector<RVec> grid = {RVec::Zero(1)};
  const double gamma = 2.0;
  const double tau = 1.0;
  const double cg = c_gamma_estimate(bounded, 1, gamma, grid, 800, 32, 6.0, 13);

  // sup_x int_0^tau E|V| dt + A e^{-tau gamma / 2} ln sup_x E e^{int_0^1 |V|}
  TimeGrid tgrid{tau, 32};
  PathBundle paths = sample_paths(PathBundle::Kind::brownian, grid[0], std::nullopt,
                                  tgrid, 800, 13);
  double first = 0.0;
  for (const auto& p : paths.values) {
    for (int k = 0; k < tgrid.steps; ++k) {
      const RVec mid = 0.5 * (p.row(k) + p.row(k + 1)).transpose();
      first += tgrid.dt() * std::abs(bounded(mid));
    }
  }
  first /= paths.count();
  PotentialSpec abs_v;
  abs_v.V = [&bounded](const RVec& x) { return -std::abs(bounded(x)); };
  KhasminskiiOptions ko;
  ko.paths = 800;
  ko.steps = 32;
  ko.seed = 13;
  ko.z_grid = grid;
  ko.t_grid = {1.0};
  const KhasminskiiRecord mom = khasminskii_check(abs_v, 1, ko);
  double a_const = 0.0;
  for (int l = 1; l < 60; ++l) a_const += l * std::exp(-0.5 * (l - 1));
  const double rhs = first + a_const * std::exp(-0.5 * tau * gamma) *
                                 std::log(mom.moment_sup[0]);
  CHECK(cg <= rhs * 1.1 + 1e-9);
}
