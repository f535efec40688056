#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "fockfk/flow.hpp"
#include "fockfk/oracle.hpp"
#include "fockfk/rng.hpp"

using namespace fockfk;

namespace {

FockContext two_modes(int cap = 3) {
  RVec om(2);
  om << 1.0, 2.0;
  return build_context(2, om, cap, 1);
}

CoefficientVector smooth_coupling(double amp = 0.3) {
  CoefficientVector c;
  c.mode_count = 2;
  c.nu = 1;
  c.spin = scalar_spin();
  c.G = [amp](const RVec& x) {
    Mat g(2, 1);
    g(0, 0) = amp * std::exp(-0.5 * sqr(x[0]));
    g(1, 0) = 0.7 * amp * std::exp(-0.25 * sqr(x[0]));
    return g;
  };
  c.q = [amp](const RVec& x) {
    Vec q(2);
    q[0] = -amp * x[0] * std::exp(-0.5 * sqr(x[0]));
    q[1] = -0.35 * amp * x[0] * std::exp(-0.25 * sqr(x[0]));
    return q;
  };
  return c;
}

CoefficientVector constant_coupling(double a0 = 0.35, double a1 = 0.2) {
  CoefficientVector c;
  c.mode_count = 2;
  c.nu = 1;
  c.spin = scalar_spin();
  c.G = [a0, a1](const RVec&) {
    Mat g(2, 1);
    g(0, 0) = a0;
    g(1, 0) = a1;
    return g;
  };
  return c;
}

PotentialSpec cosine_potential(double amp = 0.3) {
  PotentialSpec v;
  v.V = [amp](const RVec& x) { return amp * std::cos(x[0]); };
  return v;
}

}  // namespace

TEST_CASE("zero coupling: W_t = e^{-t dGamma} exactly on every path") {
  const FockContext ctx = two_modes();
  const CoefficientVector c = zero_coupling(2, 1, scalar_spin());
  RVec x0(1);
  x0[0] = 0.3;
  TimeGrid grid{0.5, 40};
  PathBundle paths =
      sample_paths(PathBundle::Kind::brownian, x0, std::nullopt, grid, 20, 3);
  FlowOptions opts;
  opts.checkpoints = {0, grid.steps / 2, grid.steps};
  const FlowSolution sol = evolve(ctx, c, zero_potential(), paths, opts);
  const Mat half = expm_hermitian(second_quantize(ctx, ctx.omega).matrix, 0.25);
  const Mat full = expm_hermitian(second_quantize(ctx, ctx.omega).matrix, 0.5);
  for (const auto& p : sol.paths) {
    CHECK(p.checkpoints[0].isIdentity(1e-13));  // W_0 = id
    CHECK((p.checkpoints[1] - half).norm() < 1e-11);
    CHECK((p.checkpoints[2] - full).norm() < 1e-11);
  }
}

TEST_CASE("pathwise log-norm bound holds for every sampled path") {
  const FockContext ctx = two_modes();
  const CoefficientVector c = smooth_coupling();
  const PotentialSpec v = cosine_potential();
  RVec x0(1);
  x0[0] = 0.0;
  TimeGrid grid{0.5, 100};
  PathBundle paths =
      sample_paths(PathBundle::Kind::brownian, x0, std::nullopt, grid, 500, 11);
  const PathBoundRecord rec = pathwise_norm_bound(ctx, c, v, paths, 8.0);
  CHECK(rec.paths == 500);
  CHECK(rec.violations == 0);
  MESSAGE("worst margin ", rec.worst_margin, " tolerance ", rec.tolerance);
}

TEST_CASE("Monte Carlo expectation agrees with the matrix-exponential oracle") {
  const FockContext ctx = two_modes();
  const CoefficientVector c = smooth_coupling();
  const PotentialSpec v = cosine_potential();
  const Lattice lat = make_lattice(-3.0, 3.0, 41, false);
  const Mat h = lattice_hamiltonian(ctx, c, v, lat);
  const double t = 0.4;
  const Mat e = expm(h, t).matrix;

  // Psi(x) = exp(-x^2) eta with a fixed Fock vector
  Vec eta = Vec::Zero(ctx.dim());
  eta[0] = 1.0;
  eta[1] = 0.5;
  eta[3] = 0.25;
  eta /= eta.norm();
  const int d = ctx.dim();
  Vec psi_flat(lat.size() * d);
  for (int i = 0; i < lat.size(); ++i)
    psi_flat.segment(i * d, d) = std::exp(-sqr(lat.nodes[i])) * eta;
  const Vec evolved = e * psi_flat;

  const int node = lat.size() / 2 + 3;
  RVec x0(1);
  x0[0] = lat.nodes[node];
  TimeGrid grid{t, 160};
  const int n = 4000;
  PathBundle paths =
      sample_paths(PathBundle::Kind::brownian, x0, std::nullopt, grid, n, 2027);
  auto ends = evolve_adjoint_apply(ctx, c, v, paths, [&](int, const RVec& xe) {
    // linear interpolation of the lattice function
    const double x = xe[0];
    if (x <= lat.nodes[0] || x >= lat.nodes[lat.size() - 1])
      return Vec(Vec::Zero(d));
    const double s = (x - lat.nodes[0]) / lat.spacing;
    const int i = std::min(static_cast<int>(s), lat.size() - 2);
    const double w = s - i;
    return Vec((1.0 - w) * psi_flat.segment(i * d, d) +
               w * psi_flat.segment((i + 1) * d, d));
  });
  Vec mean = Vec::Zero(d);
  for (const auto& vv : ends) mean += vv;
  mean /= static_cast<double>(n);
  RVec se = RVec::Zero(d);
  for (const auto& vv : ends)
    for (int k = 0; k < d; ++k) se[k] += std::norm(vv[k] - mean[k]);
  for (int k = 0; k < d; ++k) se[k] = std::sqrt(se[k] / (n - 1) / n);

  const Vec ref = evolved.segment(node * d, d);
  for (int k = 0; k < d; ++k) {
    const double diff = std::abs(mean[k] - ref[k]);
    CHECK(diff <= 3.0 * se[k] + 2e-3);  // MC error plus scheme and lattice bias
  }
}

TEST_CASE("both potential routes agree to scheme tolerance") {
  const FockContext ctx = two_modes(2);
  const CoefficientVector c = smooth_coupling();
  const PotentialSpec v = cosine_potential();
  RVec x0(1);
  x0[0] = 0.2;
  TimeGrid grid{0.5, 100};
  PathBundle paths =
      sample_paths(PathBundle::Kind::brownian, x0, std::nullopt, grid, 40, 17);
  FlowOptions opts;
  opts.checkpoints = {grid.steps};
  const FlowSolution folded = evolve(ctx, c, v, paths, opts);

  // route 2: potential inside the drift factor
  Vec eta = Vec::Zero(ctx.dim());
  eta[0] = 1.0;
  auto states = evolve_states(ctx, c, v, paths, eta, {grid.steps});
  for (int p = 0; p < paths.count(); ++p) {
    const Vec a = folded.paths[static_cast<std::size_t>(p)].checkpoints[0] * eta;
    const Vec b = states[static_cast<std::size_t>(p)][0];
    CHECK((a - b).norm() < 8.0 * grid.dt());
  }
}

TEST_CASE("flow composition identity is exact for the one-step scheme") {
  const FockContext ctx = two_modes(2);
  const CoefficientVector c = smooth_coupling();
  RVec x0(1);
  x0[0] = 0.0;
  SUBCASE("tau = 0 and c = 0 are trivially exact") {
    const CompositionRecord r0 = flow_composition_residual(
        ctx, zero_coupling(2, 1, scalar_spin()), zero_potential(), x0, 0.5, 0.0,
        50, 20, 5, 8.0);
    CHECK(r0.composition_residual < 1e-12);
  }
  SUBCASE("generic coupling composes exactly and refines at first order") {
    const CompositionRecord r = flow_composition_residual(
        ctx, c, cosine_potential(), x0, 0.5, 0.25, 50, 600, 7, 8.0);
    CHECK(r.composition_residual < 1e-12);
    const CompositionRecord r2 = flow_composition_residual(
        ctx, c, cosine_potential(), x0, 0.5, 0.25, 100, 600, 7, 8.0);
    CHECK(r2.composition_residual < 1e-12);
    // weak order 1: the self-refinement residual halves with the step
    const double ratio = r.refinement_residual / r2.refinement_residual;
    MESSAGE("refinement ratio under step halving = ", ratio);
    CHECK(ratio > 1.4);
    CHECK(ratio < 3.0);
  }
}

TEST_CASE("reversal-adjoint identity") {
  const FockContext ctx = two_modes(2);
  RVec x0(1);
  x0[0] = 0.1;
  SUBCASE("zero coupling is exact") {
    const ReversalRecord r = reversal_adjoint_residual(
        ctx, zero_coupling(2, 1, scalar_spin()), zero_potential(), x0, 0.5, 40,
        20, 3, 8.0);
    CHECK(r.max_residual < 1e-12);
  }
  SUBCASE("constant coupling (q = 0) is first order in the step") {
    const CoefficientVector c = constant_coupling();
    const ReversalRecord r1 =
        reversal_adjoint_residual(ctx, c, zero_potential(), x0, 0.5, 50, 60, 9, 8.0);
    const ReversalRecord r2 = reversal_adjoint_residual(ctx, c, zero_potential(),
                                                        x0, 0.5, 100, 60, 9, 8.0);
    CHECK(r1.max_residual <= r1.tolerance);
    const double ratio = r1.max_residual / r2.max_residual;
    MESSAGE("reversal residual ratio under halving (constant G) = ", ratio);
    CHECK(ratio > 1.5);
  }
  SUBCASE("x-dependent coupling with q: residual measured and bounded") {
    const CoefficientVector c = smooth_coupling();
    const ReversalRecord r1 = reversal_adjoint_residual(
        ctx, c, cosine_potential(), x0, 0.5, 50, 60, 13, 8.0);
    const ReversalRecord r2 = reversal_adjoint_residual(
        ctx, c, cosine_potential(), x0, 0.5, 200, 60, 13, 8.0);
    MESSAGE("reversal residual ", r1.max_residual, " -> ", r2.max_residual,
            " under step quartering");
    CHECK(r2.max_residual < r1.max_residual);
    CHECK(r1.max_residual <= r1.tolerance);
  }
  SUBCASE("potential factor is reversal invariant with the midpoint rule") {
    PotentialSpec v = cosine_potential();
    TimeGrid grid{0.5, 32};
    PathBundle fwd =
        sample_paths(PathBundle::Kind::brownian, x0, std::nullopt, grid, 30, 5);
    PathBundle bwd = reverse(fwd);
    for (int p = 0; p < fwd.count(); ++p) {
      const auto a = integrate_potential(v, fwd.values[static_cast<std::size_t>(p)], grid);
      const auto b = integrate_potential(v, bwd.values[static_cast<std::size_t>(p)], grid);
      CHECK(*a == doctest::Approx(*b).epsilon(1e-13));
    }
  }
}

TEST_CASE("weighted moment bounds: direct, exponential, inverse") {
  const FockContext ctx = two_modes();
  const CoefficientVector c = smooth_coupling();
  RVec x0(1);
  x0[0] = 0.0;
  TimeGrid grid{0.5, 50};
  WeightSpec weight;
  weight.kind = WeightSpec::Kind::polynomial;
  weight.exponent = 1.0;
  weight.varpi = RVec::Zero(2);
  weight.kappa = ctx.omega;
  weight.t0 = 0.5;
  MomentOptions opts;
  opts.p = 2;
  opts.paths = 800;
  opts.seed = 41;
  for (double xg : {-1.0, 0.0, 1.0}) {
    RVec z(1);
    z[0] = xg;
    opts.sup_grid.push_back(z);
  }

  SUBCASE("c = 0 with the vacuum is trivial") {
    Vec vac = Vec::Zero(ctx.dim());
    vac[0] = 1.0;
    const MomentRecord r = weighted_moment_check(
        ctx, zero_coupling(2, 1, scalar_spin()), zero_potential(), x0, grid,
        weight, vac, MomentVariant::polynomial, opts);
    CHECK(r.pass);
    CHECK(r.lhs == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("polynomial weight alpha = 1, p = 2 passes") {
    Vec eta = Vec::Zero(ctx.dim());
    eta[0] = 1.0;
    eta[2] = 0.6;
    eta[4] = 0.3;
    eta /= eta.norm();
    const MomentRecord r = weighted_moment_check(ctx, c, zero_potential(), x0,
                                                 grid, weight, eta,
                                                 MomentVariant::polynomial, opts);
    CHECK(r.pass);
    CHECK(r.lhs - 3.0 * r.se <= r.rhs);
  }
  SUBCASE("inverse weight variant passes with the weight on the right") {
    Vec zeta = Vec::Zero(ctx.dim());
    zeta[1] = 1.0;
    zeta[5] = 0.4;
    zeta /= zeta.norm();
    const MomentRecord r =
        weighted_moment_check(ctx, c, zero_potential(), x0, grid, weight, zeta,
                              MomentVariant::polynomial_inverse, opts);
    CHECK(r.pass);
  }
  SUBCASE("exponential weight checks its smallness hypothesis") {
    WeightSpec xi = weight;
    xi.kind = WeightSpec::Kind::exponential;
    xi.exponent = 0.5;
    Vec eta = Vec::Zero(ctx.dim());
    eta[0] = 1.0;
    const MomentRecord strong = weighted_moment_check(
        ctx, smooth_coupling(3.0), zero_potential(), x0, grid, xi, eta,
        MomentVariant::exponential, opts);
    CHECK(strong.skipped);  // p ||G||^2 > 1/32 for this amplitude
    const MomentRecord weak = weighted_moment_check(
        ctx, smooth_coupling(0.05), zero_potential(), x0, grid, xi, eta,
        MomentVariant::exponential, opts);
    CHECK_FALSE(weak.skipped);
    CHECK(weak.pass);
  }
  SUBCASE("measured-ratio variants are finite") {
    Vec eta = Vec::Zero(ctx.dim());
    eta[0] = 1.0;
    eta[1] = 0.5;
    eta /= eta.norm();
    const MomentRecord integrated =
        weighted_moment_check(ctx, c, zero_potential(), x0, grid, weight, eta,
                              MomentVariant::dgamma_integrated, opts);
    CHECK(integrated.pass);
    CHECK(std::isfinite(integrated.ratio));

    CoefficientVector tilde = smooth_coupling(0.2);
    MomentOptions popts = opts;
    popts.c_tilde = &tilde;
    const MomentRecord maria =
        weighted_moment_check(ctx, c, cosine_potential(), x0, grid, weight, eta,
                              MomentVariant::perturbation, popts);
    CHECK(maria.pass);

    const MomentRecord antonio =
        weighted_moment_check(ctx, c, zero_potential(), x0, grid, weight, eta,
                              MomentVariant::strong_continuity, opts);
    CHECK(antonio.pass);
    MESSAGE("antonio ratio = ", antonio.ratio);
  }
}

TEST_CASE("flow scalars export per-path log norms and potential integrals") {
  const FockContext ctx = two_modes(2);
  RVec x0(1);
  x0[0] = 0.0;
  TimeGrid grid{0.2, 4};
  PathBundle paths =
      sample_paths(PathBundle::Kind::brownian, x0, std::nullopt, grid, 3, 1);
  FlowOptions opts;
  opts.checkpoints = {2, 4};
  opts.track_log_norm = true;
  const FlowSolution sol = evolve(ctx, smooth_coupling(), cosine_potential(),
                                  paths, opts);
  const std::string csv = flow_scalars_to_csv(sol);
  CHECK(csv.rfind("path,node,log_norm,pot_integral", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 2);
}

TEST_CASE("inhomogeneous equation reproduces the constant solution") {
  // with c = 0, V = 0 and rho = dGamma(omega) phi the constant path phi solves
  // the driven equation; the integrator must hold it to scheme accuracy
  const FockContext ctx = two_modes(2);
  const CoefficientVector c0 = zero_coupling(2, 1, scalar_spin());
  RVec x0(1);
  x0[0] = 0.0;
  TimeGrid grid{0.5, 100};
  PathBundle paths =
      sample_paths(PathBundle::Kind::brownian, x0, std::nullopt, grid, 20, 3);
  Vec phi = Vec::Zero(ctx.dim());
  phi[0] = 0.6;
  phi[2] = 0.8;
  const RVec dg = second_quantize_diag(ctx, ctx.omega);
  Inhomogeneity inhom;
  inhom.rho = [&, phi](double, const RVec&) {
    Vec out(phi.size());
    for (int b = 0; b < ctx.fock_dim(); ++b) out[b] = dg[b] * phi[b];
    return out;
  };
  auto states = evolve_states_inhomogeneous(ctx, c0, zero_potential(), paths,
                                            phi, inhom, {grid.steps});
  for (int p = 0; p < paths.count(); ++p)
    CHECK((states[static_cast<std::size_t>(p)][0] - phi).norm() <
          8.0 * grid.dt());
}

TEST_CASE("checkpoint determinism: W depends only on consumed increments") {
  const FockContext ctx = two_modes(2);
  const CoefficientVector c = smooth_coupling();
  RVec x0(1);
  x0[0] = 0.0;
  TimeGrid grid{0.5, 20};
  PathBundle paths =
      sample_paths(PathBundle::Kind::brownian, x0, std::nullopt, grid, 10, 23);
  FlowOptions opts;
  opts.checkpoints = {10, 20};
  const FlowSolution a = evolve(ctx, c, zero_potential(), paths, opts);
  // truncating the path after node 10 must reproduce the first checkpoint
  PathBundle clipped = paths;
  clipped.grid = TimeGrid{0.25, 10};
  for (auto& v : clipped.values) v = v.topRows(11).eval();
  FlowOptions opts2;
  opts2.checkpoints = {10};
  const FlowSolution b = evolve(ctx, c, zero_potential(), clipped, opts2);
  for (int p = 0; p < paths.count(); ++p)
    CHECK((a.paths[static_cast<std::size_t>(p)].checkpoints[0] -
           b.paths[static_cast<std::size_t>(p)].checkpoints[0])
              .norm() < 1e-13);
}

TEST_CASE("Euler-Maruyama cross-validates the splitting integrator") {
  const FockContext ctx = two_modes(2);
  const CoefficientVector c = smooth_coupling();
  RVec x0(1);
  x0[0] = 0.0;
  const double t = 0.3;
  TimeGrid grid{t, 300};
  PathBundle paths =
      sample_paths(PathBundle::Kind::brownian, x0, std::nullopt, grid, 800, 77);
  Vec eta = Vec::Zero(ctx.dim());
  eta[0] = 1.0;
  auto split = evolve_states(ctx, c, zero_potential(), paths, eta, {grid.steps},
                             Integrator::splitting);
  auto euler = evolve_states(ctx, c, zero_potential(), paths, eta, {grid.steps},
                             Integrator::euler);
  Vec mean_s = Vec::Zero(ctx.dim()), mean_e = Vec::Zero(ctx.dim());
  for (int p = 0; p < paths.count(); ++p) {
    mean_s += split[static_cast<std::size_t>(p)][0];
    mean_e += euler[static_cast<std::size_t>(p)][0];
  }
  mean_s /= paths.count();
  mean_e /= paths.count();
  MESSAGE("splitting vs Euler first-moment gap = ", (mean_s - mean_e).norm());
  CHECK((mean_s - mean_e).norm() < 0.02);
}
