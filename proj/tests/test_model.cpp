#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "fockfk/model.hpp"
#include "fockfk/oracle.hpp"
#include "fockfk/rng.hpp"

using namespace fockfk;

namespace {

FockContext two_modes(int cap = 3, int spin = 1) {
  RVec om(2);
  om << 1.0, 2.0;
  return build_context(2, om, cap, spin);
}

CoefficientVector smooth_coupling(const SpinAlgebra& spin, double amp = 0.3,
                                  bool with_f = false) {
  CoefficientVector c;
  c.mode_count = 2;
  c.nu = 1;
  c.spin = spin;
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
  if (with_f && spin.couplings() > 0) {
    c.F = [amp, S = spin.couplings()](const RVec& x) {
      Mat f(2, S);
      for (int s = 0; s < S; ++s) {
        f(0, s) = 0.5 * amp / (1 + s) * std::exp(-0.5 * sqr(x[0]));
        f(1, s) = 0.25 * amp / (1 + s);
      }
      return f;
    };
  }
  return c;
}

}  // namespace

TEST_CASE("fiber Hamiltonian reduces to dGamma(omega) at zero coupling") {
  const FockContext ctx = two_modes();
  const CoefficientVector c = zero_coupling(2, 1, scalar_spin());
  RVec x(1);
  x[0] = 0.4;
  const FockOperator h = fiber_hamiltonian(ctx, c, x);
  CHECK(h.hermitian);
  CHECK((h.matrix - second_quantize(ctx, ctx.omega).matrix).norm() < 1e-14);
}

TEST_CASE("fiber Hamiltonian is Hermitian iff q vanishes") {
  const FockContext ctx = two_modes();
  CoefficientVector c = smooth_coupling(scalar_spin());
  RVec x(1);
  x[0] = 0.8;
  const FockOperator with_q = fiber_hamiltonian(ctx, c, x);
  CHECK_FALSE(with_q.hermitian);
  CHECK(herm_defect(with_q.matrix) > 1e-6);

  c.q = nullptr;
  const FockOperator no_q = fiber_hamiltonian(ctx, c, x);
  CHECK(no_q.hermitian);
  CHECK(herm_defect(no_q.matrix) < 1e-13);

  // relative bound rb-H(x): ||H(x)(1+dGamma)^{-1}|| finite, ratio logged
  const RVec dg = second_quantize_diag(ctx, ctx.omega);
  Vec inv(ctx.fock_dim());
  for (int b = 0; b < ctx.fock_dim(); ++b) inv[b] = 1.0 / (1.0 + dg[b]);
  const double ratio = op_norm(Mat(no_q.matrix * Mat(inv.asDiagonal())));
  NormSpec frak;
  frak.kind = NormKind::frak_k;
  const double cnorm = coupling_norm(ctx, c, x, frak);
  CHECK(ratio < 50.0 * (1.0 + sqr(cnorm)));
  MESSAGE("rb-H(x) ratio = ", ratio, ", bound scale = ", 1.0 + sqr(cnorm));
}

TEST_CASE("x-continuity of field(G_x)^2 on the safe subspace") {
  const FockContext ctx = two_modes(4);
  const CoefficientVector c = smooth_coupling(scalar_spin());
  const RVec mask = ctx.safe_mask(2);
  Rng rng(3);
  Vec psi = Vec::Zero(ctx.fock_dim());
  for (int b = 0; b < ctx.fock_dim(); ++b)
    if (mask[b] > 0.5) psi[b] = Cplx(rng.gaussian(), rng.gaussian());
  psi /= psi.norm();
  RVec x(1);
  x[0] = 0.3;
  auto phi2 = [&](const RVec& at) {
    const Mat p = field_fock(ctx, c.G_at(at).col(0));
    return Vec(p * (p * psi));
  };
  const Vec base = phi2(x);
  double prev = 1e9;
  for (double h : {0.4, 0.2, 0.1, 0.05}) {
    RVec y = x;
    y[0] += h;
    const double diff = (phi2(y) - base).norm();
    CHECK(diff < prev + 1e-12);
    prev = diff;
  }
}

TEST_CASE("mho evaluates the coupling-strength matrix norm") {
  RVec om(1);
  om << 2.0;
  const FockContext ctx1 = build_context(1, om, 2, 1);
  CoefficientVector c;
  c.mode_count = 1;
  c.nu = 1;
  SpinAlgebra spin;
  spin.spin_dim = 1;
  spin.sigma = {Mat::Identity(1, 1)};
  c.spin = spin;
  const double a = 0.8;
  c.F = [a](const RVec&) {
    Mat f(1, 1);
    f(0, 0) = a;
    return f;
  };
  RVec x(1);
  x[0] = 0.0;
  CHECK(mho(ctx1, c, x) == doctest::Approx(sqr(a) / om[0]).epsilon(1e-12));

  // F = 0 gives 0
  const CoefficientVector c0 = zero_coupling(1, 1, scalar_spin());
  CHECK(mho(ctx1, c0, x) == 0.0);

  // quadratic scaling in F
  CoefficientVector c2 = c;
  c2.F = [a](const RVec&) {
    Mat f(1, 1);
    f(0, 0) = 3.0 * a;
    return f;
  };
  CHECK(mho(ctx1, c2, x) == doctest::Approx(9.0 * mho(ctx1, c, x)).epsilon(1e-12));
}

TEST_CASE("mho for the Pauli case cross-checked against power iteration") {
  const FockContext ctx = two_modes(2, 2);
  CoefficientVector c = smooth_coupling(pauli_spin(), 0.4, true);
  RVec x(1);
  x[0] = 0.2;
  const double direct = mho(ctx, c, x);

  // power iteration on M^T M
  const Mat fx = c.F_at(x);
  RMat m(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Vec v = Vec::Zero(2);
      for (int s = 0; s < 3; ++s) v += c.spin.sigma[static_cast<std::size_t>(s)](i, j) * fx.col(s);
      double n2 = 0.0;
      for (int k = 0; k < 2; ++k) n2 += std::norm(v[k]) / ctx.omega[k];
      m(i, j) = std::sqrt(n2);
    }
  RVec u = RVec::Ones(2).normalized();
  double lam = 0.0;
  for (int it = 0; it < 200; ++it) {
    const RVec w = m.transpose() * (m * u);
    lam = w.norm();
    u = w / lam;
  }
  CHECK(direct == doctest::Approx(lam).epsilon(1e-8));
}

TEST_CASE("coupling norms evaluate the declared formulas") {
  RVec om(1);
  om << 2.0;
  const FockContext ctx1 = build_context(1, om, 2, 1);
  Vec v(1);
  v[0] = 1.0;
  NormSpec frak;
  frak.kind = NormKind::frak_k;
  CHECK(mode_norm(ctx1, frak, v) == doctest::Approx(std::sqrt(4.5)).epsilon(1e-12));
  CHECK(mode_norm(ctx1, frak, Vec::Zero(1)) == 0.0);

  // first weight line at alpha = 1/2 reduces to ||kappa^(1/2) v||
  NormSpec star;
  star.kind = NormKind::star1;
  star.alpha = 0.5;
  star.kappa = RVec::Constant(1, 1.7);
  CHECK(mode_norm(ctx1, star, v) == doctest::Approx(std::sqrt(1.7)).epsilon(1e-12));
}

TEST_CASE("QED preset satisfies C-reality and phase invariances") {
  QedGrid grid;
  // symmetric 6-point shell
  for (int s : {1, -1}) {
    grid.k.push_back(Eigen::Vector3d(s * 0.8, 0.0, 0.3 * s));
    grid.k.push_back(Eigen::Vector3d(0.0, s * 1.1, -0.2 * s));
    grid.k.push_back(Eigen::Vector3d(s * 0.4, s * 0.5, s * 0.9));
  }
  grid.weight.assign(grid.k.size(), 0.35);
  auto chi = [](const Eigen::Vector3d& k) { return std::exp(-0.5 * k.squaredNorm()); };
  const QedPreset preset =
      qed_coupling_preset(grid, chi, true, Eigen::Vector3d(0.0, 0.0, 1.0));
  const CoefficientVector& c = preset.coupling;
  CHECK(c.mode_count == 12);
  CHECK_FALSE(static_cast<bool>(c.q));  // Coulomb gauge

  RVec x0 = RVec::Zero(3);
  const Mat g0 = c.G_at(x0);
  for (int l = 0; l < 3; ++l) {
    const Vec cg = c.apply_C(g0.col(l));
    CHECK((cg - g0.col(l)).norm() < 1e-12);
    const Vec cf = c.apply_C(c.F_at(x0).col(l));
    CHECK((cf - c.F_at(x0).col(l)).norm() < 1e-12);
  }

  // ||G_x|| is x-independent and ||F|| <= max|k|/2 ||G||
  RVec x1(3);
  x1 << 0.3, -0.2, 0.15;
  CHECK(c.G_at(x0).norm() == doctest::Approx(c.G_at(x1).norm()).epsilon(1e-12));
  double kmax = 0.0;
  for (const auto& k : grid.k) kmax = std::max(kmax, k.norm());
  CHECK(c.F_at(x1).norm() <= 0.5 * kmax * c.G_at(x1).norm() + 1e-12);
}

TEST_CASE("QED preset rejects asymmetric momentum grids") {
  QedGrid grid;
  grid.k.push_back(Eigen::Vector3d(0.5, 0.0, 0.0));
  grid.weight.assign(1, 1.0);
  auto chi = [](const Eigen::Vector3d&) { return 1.0; };
  CHECK_THROWS_WITH_AS(
      qed_coupling_preset(grid, chi, false, Eigen::Vector3d(0.0, 0.0, 1.0)),
      doctest::Contains("symmetric"), InvalidInput);
}

TEST_CASE("lattice Hamiltonian with one point is the fiber at rest") {
  const FockContext ctx = two_modes(2);
  const CoefficientVector c = zero_coupling(2, 1, scalar_spin());
  const Lattice lat = make_lattice(0.0, 0.0, 1, false);
  const Mat h = lattice_hamiltonian(ctx, c, zero_potential(), lat);
  CHECK((h - second_quantize(ctx, ctx.omega).matrix).norm() < 1e-14);
}

TEST_CASE("free lattice Hamiltonian separates into matter and field parts") {
  const FockContext ctx = two_modes(2);
  const CoefficientVector c = zero_coupling(2, 1, scalar_spin());
  PotentialSpec v;
  v.tag = PotentialSpec::Tag::confining;
  v.V = [](const RVec& x) { return 0.5 * x.squaredNorm(); };
  const Lattice lat = make_lattice(-2.0, 2.0, 15, false);
  const Mat h = lattice_hamiltonian(ctx, c, v, lat);
  const GroundState full = ground_state(h);

  // separate diagonalization of -1/2 Lap + V
  const int g = lat.size();
  RMat hm = RMat::Zero(g, g);
  for (int i = 0; i < g; ++i) {
    hm(i, i) = 1.0 / sqr(lat.spacing) + 0.5 * sqr(lat.nodes[i]);
    if (i + 1 < g) {
      hm(i, i + 1) = -0.5 / sqr(lat.spacing);
      hm(i + 1, i) = -0.5 / sqr(lat.spacing);
    }
  }
  Eigen::SelfAdjointEigenSolver<RMat> es(hm);
  CHECK(full.energy == doctest::Approx(es.eigenvalues()[0]).epsilon(1e-10));
}

TEST_CASE("constant coupling on a periodic lattice is translation covariant") {
  const FockContext ctx = two_modes(2);
  CoefficientVector c;
  c.mode_count = 2;
  c.nu = 1;
  c.spin = scalar_spin();
  c.G = [](const RVec&) {
    Mat g(2, 1);
    g(0, 0) = 0.35;
    g(1, 0) = 0.2;
    return g;
  };
  const Lattice lat = make_lattice(-2.0, 2.0, 9, true);
  const Mat h = lattice_hamiltonian(ctx, c, zero_potential(), lat);
  const int g = lat.size();
  const int d = ctx.dim();

  // cyclic relabeling of the sites is a permutation similarity
  Mat perm = Mat::Zero(g * d, g * d);
  for (int i = 0; i < g; ++i)
    perm.block(((i + 1) % g) * d, i * d, d, d) = Mat::Identity(d, d);
  Eigen::SelfAdjointEigenSolver<Mat> e0(h), e1(Mat(perm * h * perm.adjoint()));
  CHECK((e0.eigenvalues() - e1.eigenvalues()).lpNorm<Eigen::Infinity>() < 1e-10);

  // conjugation by arbitrary scalar gauge phases leaves the spectrum unchanged
  Rng rng(21);
  Mat gauge = Mat::Zero(g * d, g * d);
  for (int i = 0; i < g; ++i)
    gauge.block(i * d, i * d, d, d) =
        std::exp(kI * (2.0 * rng.uniform() - 1.0)) * Mat::Identity(d, d);
  Eigen::SelfAdjointEigenSolver<Mat> e2(Mat(gauge * h * gauge.adjoint()));
  CHECK((e0.eigenvalues() - e2.eigenvalues()).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("coulomb clamp applies on the lattice only") {
  PotentialSpec v;
  v.tag = PotentialSpec::Tag::kato_coulomb;
  v.V = [](const RVec& x) { return -1.0 / x.norm(); };
  v.singular_sites.push_back(RVec::Zero(1));
  const Lattice lat = make_lattice(-1.0, 1.0, 21, false);
  const double clamped = potential_on_lattice(v, lat, 0.0);
  CHECK(std::isfinite(clamped));
  CHECK(clamped == doctest::Approx(-1.0 / (0.5 * lat.spacing)));
}

TEST_CASE("quadratic form bound flora holds as a matrix inequality") {
  const FockContext ctx = two_modes(3, 2);
  const CoefficientVector c = smooth_coupling(pauli_spin(), 0.5, true);
  RVec x(1);
  x[0] = 0.1;
  WeightSpec spec;
  spec.kind = WeightSpec::Kind::polynomial;
  spec.exponent = 1.0;
  spec.varpi = 0.5 * RVec(ctx.omega);
  spec.kappa = ctx.omega;
  spec.t0 = 1.0;
  spec.t = 0.4;

  const RVec dg = second_quantize_diag(ctx, ctx.omega);
  const RVec rate = weight_rate_diag(ctx, spec);
  Mat lhs = Mat::Zero(ctx.dim(), ctx.dim());
  const Mat fx_full = [&]() {
    Mat acc = Mat::Zero(ctx.dim(), ctx.dim());
    const Mat fx = c.F_at(x);
    for (int j = 0; j < c.spin.couplings(); ++j)
      acc += spin_tensor(ctx, c.spin.sigma[static_cast<std::size_t>(j)],
                         field_fock(ctx, fx.col(j)));
    return acc;
  }();
  lhs += fx_full;
  RVec rate_full(ctx.dim());
  RVec dg_full(ctx.dim());
  for (int s = 0; s < ctx.spin_dim; ++s)
    for (int b = 0; b < ctx.fock_dim(); ++b) {
      rate_full[ctx.full_index(s, b)] = rate[b];
      dg_full[ctx.full_index(s, b)] = dg[b];
    }
  lhs += Mat(rate_full.cast<Cplx>().asDiagonal());
  Mat rhs = Mat(Vec(0.75 * dg_full.cast<Cplx>()).asDiagonal());
  rhs += (4.0 * mho(ctx, c, x) + 0.5) * Mat::Identity(ctx.dim(), ctx.dim());

  const Mat gap = rhs - lhs;
  // restrict to the safe subspace where the compression of sigma.field(F) is exact
  const RVec mask = ctx.safe_mask(1);
  std::vector<int> keep;
  for (int s = 0; s < ctx.spin_dim; ++s)
    for (int b = 0; b < ctx.fock_dim(); ++b)
      if (mask[b] > 0.5) keep.push_back(ctx.full_index(s, b));
  Mat sub(keep.size(), keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i)
    for (std::size_t j = 0; j < keep.size(); ++j)
      sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          gap(keep[i], keep[j]);
  Eigen::SelfAdjointEigenSolver<Mat> es(sub);
  CHECK(es.eigenvalues()[0] >= -1e-10);
}
