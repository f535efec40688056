#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

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

PotentialSpec harmonic() {
  PotentialSpec v;
  v.tag = PotentialSpec::Tag::confining;
  v.V = [](const RVec& x) { return 0.5 * x.squaredNorm(); };
  return v;
}

}  // namespace

TEST_CASE("expm basics: identity at t = 0, diagonal case, semigroup") {
  const FockContext ctx = two_modes(2);
  const Mat dg = second_quantize(ctx, ctx.omega).matrix;
  CHECK(expm(dg, 0.0).matrix.isIdentity(1e-13));

  const Mat e = expm(dg, 0.7).matrix;
  for (int b = 0; b < ctx.fock_dim(); ++b)
    CHECK(std::abs(e(b, b) - std::exp(-0.7 * dg(b, b).real())) < 1e-13);

  Rng rng(9);
  Mat h(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) h(i, j) = Cplx(rng.gaussian(), rng.gaussian());
  h = 0.5 * (h + Mat(h.adjoint())).eval();
  const Mat a = expm(h, 0.3).matrix;
  const Mat b = expm(h, 0.45).matrix;
  const Mat c = expm(h, 0.75).matrix;
  CHECK((a * b - c).norm() < 1e-10);
  CHECK(expm(h, 0.5).inverse_residual < 1e-10);
}

TEST_CASE("expm requires Hermitian input") {
  Mat h(2, 2);
  h << 0.0, 1.0, 0.0, 0.0;
  CHECK_THROWS_AS(expm(h, 1.0), InvalidInput);
}

TEST_CASE("ground state of the free field on one spatial point is the vacuum") {
  const FockContext ctx = two_modes(2);
  const Lattice lat = make_lattice(0.0, 0.0, 1, false);
  const Mat h = lattice_hamiltonian(ctx, zero_coupling(2, 1, scalar_spin()),
                                    zero_potential(), lat);
  const GroundState gs = ground_state(h);
  CHECK(gs.energy == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(gs.state[0] - Cplx(1.0)) < 1e-12);
  CHECK(gs.gap == doctest::Approx(1.0).epsilon(1e-10));  // omega_1
  CHECK_FALSE(gs.degenerate);
}

TEST_CASE("coupling lowers the ground energy (variational principle)") {
  const FockContext ctx = two_modes(3);
  const Lattice lat = make_lattice(-3.0, 3.0, 25, false);
  const Mat h0 = lattice_hamiltonian(ctx, zero_coupling(2, 1, scalar_spin()),
                                     harmonic(), lat);
  const Mat h1 = lattice_hamiltonian(ctx, smooth_coupling(0.4), harmonic(), lat);
  const GroundState g0 = ground_state(h0);
  const GroundState g1 = ground_state(h1);
  // Rayleigh quotient of the free ground state is an upper bound for h1
  const double rayleigh = (g0.state.adjoint() * (h1 * g0.state)).real()(0, 0);
  CHECK(g1.energy <= rayleigh + 1e-12);
  MESSAGE("free ", g0.energy, " coupled ", g1.energy, " rayleigh ", rayleigh);
}

TEST_CASE("decay check: confining ground state has interior-dominated decay") {
  const FockContext ctx = two_modes(2);
  const Lattice lat = make_lattice(-4.0, 4.0, 33, false);
  const Mat h = lattice_hamiltonian(ctx, smooth_coupling(0.25), harmonic(), lat);
  const GroundState gs = ground_state(h);
  const DecayRecord rec = decay_check(ctx, lat, gs.state, 0.5, 1.0);
  CHECK_FALSE(rec.edge_dominated);
  CHECK(std::isfinite(rec.plain_sup));
  CHECK(std::isfinite(rec.weighted_sup));

  // log ||Psi(x)|| is concave in |x| for the quadratic well
  const int d = ctx.dim();
  const int mid = lat.size() / 2;
  std::vector<double> logs;
  for (int i = mid; i < lat.size() - 4; ++i)
    logs.push_back(std::log(gs.state.segment(i * d, d).norm()));
  for (std::size_t i = 1; i + 1 < logs.size(); ++i)
    CHECK(logs[i] >= 0.5 * (logs[i - 1] + logs[i + 1]) - 1e-9);

  // a uniform profile raises the edge-dominance flag
  Vec uniform = Vec::Ones(lat.size() * d).normalized();
  CHECK(decay_check(ctx, lat, uniform, 0.5, 1.0).edge_dominated);
}

TEST_CASE("infrared commutator identity holds to 1e-9 on the safe subspace") {
  const FockContext ctx = two_modes(3);
  const Lattice lat = make_lattice(-3.0, 3.0, 17, false);
  const CoefficientVector c = smooth_coupling(0.35);
  const PotentialSpec v = harmonic();
  const Mat h = lattice_hamiltonian(ctx, c, v, lat);
  const GroundState gs = ground_state(h);

  const int d = ctx.dim();
  Mat rest = Mat::Zero(h.rows(), h.cols());
  const Mat dg = lift_fock(ctx, Mat(second_quantize_diag(ctx, ctx.omega).asDiagonal()));
  for (int i = 0; i < lat.size(); ++i) {
    RVec x(1);
    x[0] = lat.nodes[i];
    rest.block(i * d, i * d, d, d) = dg + v(x) * Mat::Identity(d, d);
  }
  for (int j = 0; j < ctx.mode_count; ++j) {
    const IrResidual ir = ir_identity_residual(ctx, lat, h, rest, gs.energy,
                                               gs.state, j);
    CHECK(ir.residual <= 1e-9);
    CHECK(ir.number_identity <= 1e-10);
    MESSAGE("mode ", j, " residual ", ir.residual, " edge ", ir.edge_residual);
  }
}

TEST_CASE("zero coupling annihilates the ground state exactly") {
  const FockContext ctx = two_modes(2);
  const Lattice lat = make_lattice(-3.0, 3.0, 15, false);
  const CoefficientVector c0 = zero_coupling(2, 1, scalar_spin());
  const Mat h = lattice_hamiltonian(ctx, c0, harmonic(), lat);
  const GroundState gs = ground_state(h);
  const int d = ctx.dim();
  for (int j = 0; j < ctx.mode_count; ++j) {
    const Mat aj = lift_fock(ctx, ctx.lowering[static_cast<std::size_t>(j)]);
    double total = 0.0;
    for (int i = 0; i < lat.size(); ++i)
      total += (aj * gs.state.segment(i * d, d)).squaredNorm();
    CHECK(total < 1e-20);
  }
}

TEST_CASE("ionization surrogate is reported and finite") {
  const FockContext ctx = two_modes(2);
  const Lattice lat = make_lattice(-4.0, 4.0, 21, false);
  const Mat h = lattice_hamiltonian(ctx, zero_coupling(2, 1, scalar_spin()),
                                    harmonic(), lat);
  const double sr = sigma_surrogate(ctx, lat, h, 2.0);
  const GroundState gs = ground_state(h);
  CHECK(std::isfinite(sr));
  CHECK(sr > gs.energy);  // binding: energy outside the well exceeds E_0
}
