#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "fockfk/oracle.hpp"
#include "fockfk/positivity.hpp"
#include "fockfk/rng.hpp"

using namespace fockfk;

namespace {

FockContext two_modes(int cap = 3) {
  RVec om(2);
  om << 1.0, 2.0;
  return build_context(2, om, cap, 1);
}

Vec fock_unit(const FockContext& ctx, int idx) {
  Vec v = Vec::Zero(ctx.fock_dim());
  v[idx] = 1.0;
  return v;
}

}  // namespace

TEST_CASE("Q transform is an isometry and diagonalizes the conjugate fields") {
  const FockContext ctx = two_modes();
  const QTransform qt = q_transform(ctx, QTransform::Variant::conjugate_field);
  CHECK(qt.isometry_defect() < 1e-10);
  CHECK(qt.diag_residual(ctx) < 1e-9);
  MESSAGE("full-space residual (top sector) = ", qt.diag_residual_full(ctx));

  // vacuum maps to a strictly positive grid function
  const Vec omega_q = qt.transform * fock_unit(ctx, ctx.vacuum_index());
  for (int g = 0; g < qt.grid_size(); ++g) CHECK(omega_q[g].real() > 0.0);

  // One-boson state of mode 0: node-coordinate times Gaussian. In the
  // conjugate-field picture it carries the basis phase (-i), so the real
  // representative i |1,0> shows the H_1 sign pattern.
  Vec one = Vec::Zero(ctx.fock_dim());
  one[ctx.index_of({1, 0})] = kI;
  const Vec one_q = qt.transform * one;
  for (int g = 0; g < qt.grid_size(); ++g) {
    const double coord = qt.coordinate(g, 0);
    CHECK(one_q[g].real() * coord > 0.0);
    CHECK(std::abs(one_q[g].imag()) < 1e-14);
  }
}

TEST_CASE("order too small is rejected") {
  const FockContext ctx = two_modes(3);
  CHECK_THROWS_AS(q_transform(ctx, QTransform::Variant::conjugate_field, 2),
                  InvalidInput);
}

TEST_CASE("cone membership certificates") {
  const FockContext ctx = two_modes();
  const QTransform qt = q_transform(ctx, QTransform::Variant::conjugate_field);
  const Vec vac = fock_unit(ctx, ctx.vacuum_index());
  const ConeResult in = cone_check(vac, qt);
  CHECK(in.real_subspace);
  CHECK(in.in_cone);
  CHECK(in.strictly_positive);

  const ConeResult out = cone_check(Vec(-vac), qt);
  CHECK(out.real_subspace);
  CHECK_FALSE(out.in_cone);

  // a state outside the completely real subspace returns a decomposition hint
  Vec mixed = fock_unit(ctx, ctx.index_of({1, 0}));
  const ConeResult rejected = cone_check(mixed, qt);
  CHECK_FALSE(rejected.real_subspace);
  CHECK(rejected.positive_part.size() == ctx.fock_dim());
  // the clipped parts reassemble the grid values
  const Vec back = qt.transform * (rejected.positive_part - rejected.negative_part);
  const Vec orig = qt.transform * mixed;
  for (int g = 0; g < qt.grid_size(); ++g)
    CHECK(std::abs(back[g].real() - orig[g].real()) < 1e-10);
}

TEST_CASE("e^{-s dGamma} preserves and improves audited cone samples") {
  const FockContext ctx = two_modes();
  const QTransform qt = q_transform(ctx, QTransform::Variant::conjugate_field);
  const auto samples = cone_samples(ctx, qt, 6, 99);
  CHECK(samples.size() == 6);
  const Mat e = expm_hermitian(second_quantize(ctx, ctx.omega).matrix, 0.6);
  for (const auto& u : samples) {
    CHECK(q_min_value(qt, u) >= 0.0);
    const Vec v = e * u;
    CHECK(q_min_value(qt, v) > 0.0);  // improving
    const ConeResult r = cone_check(v, qt);
    CHECK(r.in_cone);
  }
}

TEST_CASE("factor A_s[f] and the Weyl-vector closed form") {
  RVec om1(1);
  om1 << 1.0;
  const FockContext ctx = build_context(1, om1, 8, 1);

  // f = 0 reduces to the free semigroup
  const Mat a0 = factor_A(ctx, 0.7, Vec::Zero(1)).matrix;
  const Mat e = expm_hermitian(second_quantize(ctx, om1).matrix, 0.7);
  CHECK((a0 - e).norm() < 1e-12);

  Vec f(1), g(1);
  f[0] = 0.4;
  g[0] = 0.5;
  const WeylFactorResidual r = factor_weyl_residual(ctx, 0.7, f, g);
  MESSAGE("closed-form residual ", r.residual, " projection defect ", r.projection_defect);
  CHECK(r.residual < 1e-6);

  // A_s[f]^* maps audited cone samples into the cone
  const FockContext ctx2 = two_modes();
  const QTransform qt = q_transform(ctx2, QTransform::Variant::conjugate_field);
  const auto samples = cone_samples(ctx2, qt, 5, 7);
  Vec f2(2);
  f2 << 0.3, -0.2;  // in h_C (real amplitudes)
  const Mat a = factor_A(ctx2, 0.5, f2).matrix;
  for (const auto& u : samples) {
    const Vec v = a.adjoint() * u;
    CHECK(q_min_value(qt, v) >= -1e-9 * v.norm());
  }
}

TEST_CASE("composition law: preserving after improving stays improving") {
  const FockContext ctx = two_modes();
  const QTransform qt = q_transform(ctx, QTransform::Variant::conjugate_field);
  const auto samples = cone_samples(ctx, qt, 4, 31);
  Rng rng(55);
  for (int trial = 0; trial < 3; ++trial) {
    Vec f(2);
    f << rng.gaussian() * 0.3, rng.gaussian() * 0.3;  // real, in h_C
    const Mat pre = factor_A(ctx, 0.3 + 0.3 * rng.uniform(), f).matrix.adjoint();
    const Mat imp = expm_hermitian(second_quantize(ctx, ctx.omega).matrix,
                                   0.4 + 0.4 * rng.uniform());
    Vec g(2);
    g << rng.gaussian() * 0.25, rng.gaussian() * 0.25;
    const Mat post = factor_A(ctx, 0.2 + 0.3 * rng.uniform(), g).matrix.adjoint();
    const Mat chain = post * imp * pre;
    for (const auto& u : samples) {
      const Vec v = chain * u;
      CHECK(q_min_value(qt, v) > -1e-9 * v.norm());
    }
  }
}

TEST_CASE("Gamma(i) conjugation swaps the field and conjugate-field pictures") {
  const FockContext ctx = two_modes();
  const QTransform qc = q_transform(ctx, QTransform::Variant::conjugate_field);
  const QTransform qf = q_transform(ctx, QTransform::Variant::field);
  // Gamma(i) is diagonal with i^{total bosons}
  Vec gamma_i(ctx.fock_dim());
  for (int b = 0; b < ctx.fock_dim(); ++b)
    gamma_i[b] = std::pow(kI, ctx.total_bosons[static_cast<std::size_t>(b)]);
  const Mat gi = Mat(gamma_i.asDiagonal());
  // V_field = V_conj Gamma(i), so conjugating any operator matches pictures
  const Mat diff = qf.transform - qc.transform * gi;
  CHECK(diff.norm() < 1e-10);

  const Mat e = expm_hermitian(second_quantize(ctx, ctx.omega).matrix, 0.5);
  const Mat lhs = q_matrix(qf, e);
  const Mat rhs = q_matrix(qc, Mat(gi * e * gi.adjoint()));
  CHECK((lhs - rhs).norm() < 1e-10);
}

TEST_CASE("kernel positivity suite: scalar, Nelson, and refused mixed cases") {
  const FockContext ctx = two_modes();
  const Lattice lat = make_lattice(-2.5, 2.5, 15, false);
  PotentialSpec v;
  v.V = [](const RVec& x) { return 0.3 * std::cos(x[0]); };
  PositivityOptions opts;
  opts.paths = 2000;
  opts.steps = 60;
  opts.seed = 3;

  // minimal-coupling scalar case (F = 0)
  CoefficientVector cg;
  cg.mode_count = 2;
  cg.nu = 1;
  cg.spin = scalar_spin();
  cg.G = [](const RVec& x) {
    Mat g(2, 1);
    g(0, 0) = 0.25 * std::exp(-0.5 * sqr(x[0]));
    g(1, 0) = 0.175 * std::exp(-0.25 * sqr(x[0]));
    return g;
  };
  cg.q = [](const RVec& x) {
    Vec q(2);
    q[0] = -0.25 * x[0] * std::exp(-0.5 * sqr(x[0]));
    q[1] = -0.0875 * x[0] * std::exp(-0.25 * sqr(x[0]));
    return q;
  };
  const PositivityRecord rg =
      kernel_positivity_suite(ctx, cg, v, lat, 0.5, 0.0, 0.3, opts);
  CHECK(rg.pass);
  CHECK(rg.mc_margin > 0.0);

  // Nelson variant (G = 0, linear coupling through the single spin slot)
  CoefficientVector cf;
  cf.mode_count = 2;
  cf.nu = 1;
  SpinAlgebra unit;
  unit.spin_dim = 1;
  unit.sigma = {Mat::Identity(1, 1)};
  cf.spin = unit;
  cf.F = [](const RVec& x) {
    Mat f(2, 1);
    f(0, 0) = 0.3 * std::exp(-0.5 * sqr(x[0]));
    f(1, 0) = 0.2;
    return f;
  };
  const PositivityRecord rf =
      kernel_positivity_suite(ctx, cf, v, lat, 0.5, 0.0, 0.3, opts);
  CHECK(rf.pass);

  // mixed case is refused
  CoefficientVector mixed = cg;
  mixed.spin = unit;
  mixed.F = cf.F;
  CHECK_THROWS_WITH_AS(
      kernel_positivity_suite(ctx, mixed, v, lat, 0.5, 0.0, 0.3, opts),
      doctest::Contains("mixed"), InvalidInput);
}

TEST_CASE("Q matrices export as heat tables") {
  const FockContext ctx = two_modes(1);
  const QTransform qt = q_transform(ctx, QTransform::Variant::conjugate_field);
  const Mat q = q_matrix(qt, Mat::Identity(ctx.fock_dim(), ctx.fock_dim()));
  const std::string csv = q_matrix_to_csv(qt, q);
  CHECK(csv.rfind("row,col,q_row_0,q_col_0,q_row_1,q_col_1,value", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') ==
        1 + static_cast<long>(q.rows()) * q.cols());
}

TEST_CASE("oracle ground state is strictly positive in the Q picture") {
  const FockContext ctx = two_modes();
  CoefficientVector c;
  c.mode_count = 2;
  c.nu = 1;
  c.spin = scalar_spin();
  c.G = [](const RVec& x) {
    Mat g(2, 1);
    g(0, 0) = 0.3 * std::exp(-0.5 * sqr(x[0]));
    g(1, 0) = 0.2 * std::exp(-0.25 * sqr(x[0]));
    return g;
  };
  c.q = [](const RVec& x) {
    Vec q(2);
    q[0] = -0.3 * x[0] * std::exp(-0.5 * sqr(x[0]));
    q[1] = -0.1 * x[0] * std::exp(-0.25 * sqr(x[0]));
    return q;
  };
  PotentialSpec v;
  v.tag = PotentialSpec::Tag::confining;
  v.V = [](const RVec& x) { return 0.5 * x.squaredNorm(); };
  const Lattice lat = make_lattice(-3.0, 3.0, 17, false);
  const Mat h = lattice_hamiltonian(ctx, c, v, lat);
  const GroundState gs = ground_state(h);
  CHECK(gs.gap > 1e-6);

  const QTransform qt = q_transform(ctx, QTransform::Variant::conjugate_field);
  const int d = ctx.dim();
  // global phase is fixed by ground_state; every spatial block must be a
  // strictly positive Q function
  double worst = 1e30;
  for (int i = 0; i < lat.size(); ++i) {
    const Vec block = gs.state.segment(i * d, d);
    worst = std::min(worst, q_min_value(qt, block));
  }
  MESSAGE("ground-state min Q value over the lattice = ", worst);
  CHECK(worst > 0.0);
}
