#include "fockfk/positivity.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <sstream>

#include "fockfk/oracle.hpp"
#include "fockfk/rng.hpp"
#include "fockfk/semigroup.hpp"

namespace fockfk {

namespace {

// Gauss-Hermite nodes and weights (physicists', weight e^{-x^2}) through the
// Golub-Welsch tridiagonal.
void gauss_hermite(int m, RVec& nodes, RVec& weights) {
  RMat j = RMat::Zero(m, m);
  for (int k = 1; k < m; ++k) {
    const double b = std::sqrt(0.5 * k);
    j(k - 1, k) = b;
    j(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<RMat> es(j);
  nodes = es.eigenvalues();
  weights.resize(m);
  const double mu0 = std::sqrt(M_PI);
  for (int k = 0; k < m; ++k) weights[k] = mu0 * sqr(es.eigenvectors()(0, k));
}

// orthonormal Hermite functions h_n(x) = H_n(x) e^{-x^2/2} / (pi^(1/4) 2^(n/2) sqrt(n!))
RVec hermite_functions(int n_max, double x) {
  RVec h(n_max + 1);
  h[0] = std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x);
  if (n_max >= 1) h[1] = std::sqrt(2.0) * x * h[0];
  for (int n = 1; n < n_max; ++n)
    h[n + 1] = std::sqrt(2.0 / (n + 1)) * x * h[n] -
               std::sqrt(static_cast<double>(n) / (n + 1)) * h[n - 1];
  return h;
}

Cplx mode_phase(QTransform::Variant variant, int n) {
  if (variant == QTransform::Variant::field) return 1.0;
  return std::pow(Cplx(0.0, -1.0), n);
}

}  // namespace

double QTransform::coordinate(int g, int j) const {
  int idx = g;
  for (int l = mode_count - 1; l > j; --l) idx /= order;
  return std::sqrt(2.0) * nodes1d[idx % order];
}

double QTransform::isometry_defect() const {
  const Mat gram = transform.adjoint() * transform;
  return (gram - Mat::Identity(gram.rows(), gram.cols())).norm();
}

namespace {

double diag_residual_impl(const QTransform& qt, const FockContext& ctx, int margin) {
  const RVec mask = ctx.safe_mask(margin);
  double worst = 0.0;
  for (int j = 0; j < ctx.mode_count; ++j) {
    Vec ej = Vec::Zero(ctx.mode_count);
    ej[j] = 1.0;
    const Mat op = qt.variant == QTransform::Variant::conjugate_field
                       ? field_fock(ctx, Vec(kI * ej))
                       : field_fock(ctx, ej);
    Mat lhs = qt.transform * op;
    for (int g = 0; g < qt.grid_size(); ++g)
      lhs.row(g) -= qt.coordinate(g, j) * qt.transform.row(g);
    for (int b = 0; b < ctx.fock_dim(); ++b)
      if (mask[b] < 0.5) lhs.col(b).setZero();
    worst = std::max(worst, lhs.norm());
  }
  return worst;
}

}  // namespace

double QTransform::diag_residual(const FockContext& ctx) const {
  return diag_residual_impl(*this, ctx, 1);
}

double QTransform::diag_residual_full(const FockContext& ctx) const {
  return diag_residual_impl(*this, ctx, 0);
}

Cplx QTransform::evaluate(const Vec& psi, const RVec& coords) const {
  require(coords.size() == mode_count, "QTransform::evaluate: one coordinate per mode");
  require(psi.size() == transform.cols(), "QTransform::evaluate: state size mismatch");
  const int K = mode_count;
  int cap = 0;
  for (const auto& occ : basis)
    for (int n : occ) cap = std::max(cap, n);
  std::vector<RVec> h(static_cast<std::size_t>(K));
  for (int j = 0; j < K; ++j)
    h[static_cast<std::size_t>(j)] =
        hermite_functions(cap, coords[j] / std::sqrt(2.0));
  Cplx acc = 0.0;
  for (std::size_t b = 0; b < basis.size(); ++b) {
    Cplx v = psi[static_cast<Eigen::Index>(b)];
    if (v == Cplx(0.0, 0.0)) continue;
    for (int j = 0; j < K; ++j) {
      const int n = basis[b][static_cast<std::size_t>(j)];
      v *= h[static_cast<std::size_t>(j)][n] * mode_phase(variant, n);
    }
    acc += v;
  }
  return acc;
}

QTransform q_transform(const FockContext& ctx, QTransform::Variant variant,
                       int order) {
  require(ctx.spin_dim == 1, "q_transform: scalar case (L = 1) only");
  if (order <= 0) order = ctx.boson_cap + 1;
  require(order >= ctx.boson_cap + 1,
          "q_transform: Gauss-Hermite order must be at least boson_cap + 1");

  QTransform qt;
  qt.variant = variant;
  qt.order = order;
  qt.mode_count = ctx.mode_count;
  qt.basis = ctx.basis;
  gauss_hermite(order, qt.nodes1d, qt.weights1d);

  // per-mode table value(i, n) = sqrt(w_i e^{x_i^2}) h_n(x_i); Gauss-Hermite
  // exactness of degree 2 order - 1 makes the restriction to the truncation an
  // isometry, and at order = cap + 1 the leaked Hermite function vanishes at
  // the nodes
  const int cap = ctx.boson_cap;
  RMat table(order, cap + 1);
  for (int i = 0; i < order; ++i) {
    const RVec h = hermite_functions(cap, qt.nodes1d[i]);
    const double c = std::sqrt(qt.weights1d[i]) * std::exp(0.5 * sqr(qt.nodes1d[i]));
    for (int n = 0; n <= cap; ++n) table(i, n) = c * h[n];
  }

  const int K = ctx.mode_count;
  int gsize = 1;
  for (int j = 0; j < K; ++j) gsize *= order;
  qt.transform = Mat::Zero(gsize, ctx.fock_dim());
  for (int g = 0; g < gsize; ++g) {
    std::vector<int> node_idx(static_cast<std::size_t>(K));
    int rem = g;
    for (int j = K - 1; j >= 0; --j) {
      node_idx[static_cast<std::size_t>(j)] = rem % order;
      rem /= order;
    }
    for (int b = 0; b < ctx.fock_dim(); ++b) {
      Cplx v = 1.0;
      for (int j = 0; j < K; ++j) {
        const int n = ctx.basis[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)];
        v *= table(node_idx[static_cast<std::size_t>(j)], n) * mode_phase(variant, n);
      }
      qt.transform(g, b) = v;
    }
  }
  require(qt.diag_residual(ctx) < 1e-9,
          "q_transform: diagonalization residual exceeds tolerance, raise order");
  return qt;
}

ConeResult cone_check(const Vec& psi, const QTransform& qt, double slack) {
  ConeResult out;
  const Vec q = qt.transform * psi;
  double max_imag = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i)
    max_imag = std::max(max_imag, std::abs(q[i].imag()));
  out.real_subspace = max_imag <= 1e-10 * std::max(1.0, psi.norm());
  double mn = q.size() > 0 ? q[0].real() : 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) mn = std::min(mn, q[i].real());
  out.min_value = mn;
  if (!out.real_subspace) {
    // hint: clip on the grid and pull back through the isometry
    Vec plus = q, minus = q;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      const double re = q[i].real();
      plus[i] = re > 0.0 ? re : 0.0;
      minus[i] = re < 0.0 ? -re : 0.0;
    }
    out.positive_part = qt.transform.adjoint() * plus;
    out.negative_part = qt.transform.adjoint() * minus;
    return out;
  }
  out.in_cone = mn >= -slack * std::max(1.0, psi.norm());
  out.strictly_positive = out.in_cone && mn > 0.0;
  return out;
}

FockOperator factor_A(const FockContext& ctx, double s, const Vec& f) {
  require(s > 0.0, "factor_A: s must be positive");
  const RVec dg = second_quantize_diag(ctx, ctx.omega);
  Vec e(ctx.fock_dim());
  for (int i = 0; i < ctx.fock_dim(); ++i) e[i] = std::exp(-s * dg[i]);
  Mat acc = Mat(e.asDiagonal());
  const Mat ad = lowering_fock(ctx, f).adjoint();
  Mat term = acc;
  for (int n = 1; n <= ctx.boson_cap; ++n) {
    term = (kI / static_cast<double>(n)) * (ad * term);
    acc += term;
    if (term.norm() == 0.0) break;
  }
  FockOperator op;
  op.matrix = lift_fock(ctx, acc);
  return op;
}

WeylFactorResidual factor_weyl_residual(const FockContext& ctx, double s,
                                        const Vec& f, const Vec& g) {
  // lhs = A_s[f]^* W(g) Omega on the truncation
  const Mat a = factor_A(ctx, s, f).matrix;
  Vec omega_vec = Vec::Zero(ctx.dim());
  omega_vec[ctx.vacuum_index()] = 1.0;
  const Vec lhs = a.adjoint() * (weyl(ctx, g).matrix * omega_vec);

  // rhs = e^{-||g||^2/2 + ||e^{-s om} g||^2/2 - i <f,g>} W(e^{-s om} g) Omega
  Vec g_damp(ctx.mode_count);
  for (int j = 0; j < ctx.mode_count; ++j)
    g_damp[j] = std::exp(-s * ctx.omega[j]) * g[j];
  const Cplx ip = f.adjoint() * g;  // antilinear in f
  const Cplx pref =
      std::exp(Cplx(-0.5 * g.squaredNorm() + 0.5 * g_damp.squaredNorm(), 0.0) -
               kI * ip);
  const Vec rhs = pref * (weyl(ctx, g_damp).matrix * omega_vec);

  WeylFactorResidual out;
  out.residual = (lhs - rhs).norm();
  // coherent mass beyond the cap: the representable part of W(g) Omega carries
  // the partial exponential series of ||g||^2
  double mass = 0.0, term = 1.0;
  for (int n = 0; n <= ctx.boson_cap; ++n) {
    if (n > 0) term *= g.squaredNorm() / n;
    mass += term;
  }
  out.projection_defect =
      std::sqrt(std::max(0.0, 1.0 - std::exp(-g.squaredNorm()) * mass));
  return out;
}

Mat q_matrix(const QTransform& qt, const Mat& a) {
  return qt.transform * a * qt.transform.adjoint();
}

std::string q_matrix_to_csv(const QTransform& qt, const Mat& q_mat) {
  std::ostringstream os;
  os << "row,col";
  for (int j = 0; j < qt.mode_count; ++j) os << ",q_row_" << j << ",q_col_" << j;
  os << ",value\n";
  for (int r = 0; r < q_mat.rows(); ++r)
    for (int c = 0; c < q_mat.cols(); ++c) {
      os << r << "," << c;
      for (int j = 0; j < qt.mode_count; ++j)
        os << "," << qt.coordinate(r, j) << "," << qt.coordinate(static_cast<int>(c), j);
      os << "," << q_mat(r, c).real() << "\n";
    }
  return os.str();
}

double q_min_value(const QTransform& qt, const Vec& psi, int audit_points,
                   double audit_span) {
  const int K = qt.mode_count;
  const double reach = std::sqrt(2.0) * qt.nodes1d.cwiseAbs().maxCoeff() * audit_span;
  // tensor audit grid; K is small at desk scale
  long total = 1;
  for (int j = 0; j < K; ++j) total *= audit_points;
  double mn = std::numeric_limits<double>::infinity();
  RVec coords(K);
  for (long g = 0; g < total; ++g) {
    long rem = g;
    for (int j = K - 1; j >= 0; --j) {
      const int idx = static_cast<int>(rem % audit_points);
      rem /= audit_points;
      coords[j] = -reach + 2.0 * reach * idx / (audit_points - 1);
    }
    mn = std::min(mn, qt.evaluate(psi, coords).real());
  }
  return mn;
}

std::vector<Vec> cone_samples(const FockContext& ctx, const QTransform& qt, int n,
                              std::uint64_t seed, int audit_points,
                              double audit_span) {
  std::vector<Vec> out;
  Vec omega_vec = Vec::Zero(ctx.fock_dim());
  omega_vec[ctx.vacuum_index()] = 1.0;
  out.push_back(omega_vec);

  // Tilted Gaussians F(pi(g)) Omega with F a displaced Gaussian density: their
  // truncations are audited for global nonnegativity and gently shrunk toward
  // the vacuum until they pass.
  Rng rng(seed);
  while (static_cast<int>(out.size()) < n) {
    RVec shift(ctx.mode_count), width(ctx.mode_count);
    for (int j = 0; j < ctx.mode_count; ++j) {
      shift[j] = 0.8 * rng.gaussian();
      width[j] = 1.0 + 0.5 * rng.uniform();
    }
    // project exp(-sum_j (q_j - shift_j)^2 / (2 width_j^2)) onto the span by
    // Gauss-Hermite quadrature against the transform rows
    Vec h(qt.grid_size());
    for (int g = 0; g < qt.grid_size(); ++g) {
      double e = 0.0;
      for (int j = 0; j < ctx.mode_count; ++j)
        e += sqr(qt.coordinate(g, j) - shift[j]) / (2.0 * sqr(width[j]));
      h[g] = std::exp(-e);
    }
    Vec psi = qt.transform.adjoint() * h;
    psi /= psi.norm();
    for (int shrink = 0; shrink < 6; ++shrink) {
      if (q_min_value(qt, psi, audit_points, audit_span) >= 0.0) {
        out.push_back(psi);
        break;
      }
      psi = 0.6 * psi + 0.4 * omega_vec;
      psi /= psi.norm();
    }
  }
  return out;
}



PositivityRecord kernel_positivity_suite(const FockContext& ctx,
                                         const CoefficientVector& c,
                                         const PotentialSpec& V,
                                         const Lattice& lattice, double t,
                                         double x, double y,
                                         const PositivityOptions& opts) {
  require(ctx.spin_dim == 1, "kernel_positivity_suite: scalar case (L = 1) only");
  const bool has_f = static_cast<bool>(c.F) && c.spin.couplings() > 0;
  const bool has_g = static_cast<bool>(c.G);
  require(!(has_f && has_g),
          "kernel_positivity_suite: mixed case refused, positivity is proved "
          "only for F = 0 or G = 0");
  const QTransform::Variant variant = has_f ? QTransform::Variant::field
                                            : QTransform::Variant::conjugate_field;
  const QTransform qt = q_transform(ctx, variant);
  const auto samples = cone_samples(ctx, qt, opts.samples, mix64(opts.seed ^ 0x77));

  PositivityRecord rec;
  const Mat h = lattice_hamiltonian(ctx, c, V, lattice);
  const Mat e = expm(h, t).matrix;
  const int dim = ctx.dim();
  int ix = 0, iy = 0;
  for (int i = 0; i < lattice.size(); ++i) {
    if (std::abs(lattice.nodes[i] - x) < std::abs(lattice.nodes[ix] - x)) ix = i;
    if (std::abs(lattice.nodes[i] - y) < std::abs(lattice.nodes[iy] - y)) iy = i;
  }
  const Mat block = e.block(ix * dim, iy * dim, dim, dim);
  rec.oracle_entry_min = q_matrix(qt, block).real().minCoeff();
  rec.oracle_sample_min = std::numeric_limits<double>::infinity();
  rec.oracle_pair_min = std::numeric_limits<double>::infinity();
  for (const auto& u : samples) {
    const Vec v = block * u;
    rec.oracle_sample_min = std::min(rec.oracle_sample_min, q_min_value(qt, v));
    for (const auto& w : samples)
      rec.oracle_pair_min =
          std::min(rec.oracle_pair_min, (w.adjoint() * v).real()(0, 0));
  }

  const KernelEstimate k =
      kernel(ctx, c, V, t, x, y, opts.paths, opts.steps, opts.seed);
  rec.mc_margin = std::numeric_limits<double>::infinity();
  for (const auto& u : samples)
    for (const auto& w : samples) {
      const double val = (w.adjoint() * (k.mean * u)).real()(0, 0);
      double se = 0.0;
      for (int r = 0; r < dim; ++r)
        for (int c2 = 0; c2 < dim; ++c2)
          se += sqr(std::abs(w[r]) * k.se(r, c2) * std::abs(u[c2]));
      rec.mc_margin = std::min(rec.mc_margin, val - 3.0 * std::sqrt(se));
    }

  const GroundState gs = ground_state(h);
  rec.spectral_gap = gs.gap;
  rec.ground_state_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < lattice.size(); ++i) {
    const Vec block_v = gs.state.segment(i * dim, dim);
    if (block_v.norm() < 1e-9) continue;
    rec.ground_state_min = std::min(rec.ground_state_min, q_min_value(qt, block_v));
  }
  rec.improving_confirmed = rec.oracle_sample_min > 0.0 &&
                            rec.oracle_pair_min > 0.0 && rec.mc_margin > 0.0;
  rec.pass = rec.improving_confirmed && rec.ground_state_min > 0.0 &&
             rec.spectral_gap > 1e-6;
  return rec;
}

}  // namespace fockfk
