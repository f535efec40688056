#include "fockfk/model.hpp"

#include <cmath>
#include <memory>

namespace fockfk {

SpinAlgebra scalar_spin() {
  SpinAlgebra s;
  s.spin_dim = 1;
  return s;
}

SpinAlgebra pauli_spin() {
  SpinAlgebra s;
  s.spin_dim = 2;
  Mat sx(2, 2), sy(2, 2), sz(2, 2);
  sx << 0, 1, 1, 0;
  sy << 0, Cplx(0, -1), Cplx(0, 1), 0;
  sz << 1, 0, 0, -1;
  s.sigma = {sx, sy, sz};
  return s;
}

Mat CoefficientVector::G_at(const RVec& x) const {
  return G ? G(x) : Mat::Zero(mode_count, nu);
}

Vec CoefficientVector::q_at(const RVec& x) const {
  return q ? q(x) : Vec::Zero(mode_count);
}

Mat CoefficientVector::F_at(const RVec& x) const {
  return F ? F(x) : Mat::Zero(mode_count, spin.couplings() > 0 ? spin.couplings() : 1);
}

CoefficientVector zero_coupling(int mode_count, int nu, const SpinAlgebra& spin) {
  CoefficientVector c;
  c.mode_count = mode_count;
  c.nu = nu;
  c.spin = spin;
  return c;
}

PotentialSpec zero_potential() { return PotentialSpec{}; }

FockOperator fiber_hamiltonian(const FockContext& ctx, const CoefficientVector& c,
                               const RVec& x) {
  require(c.mode_count == ctx.mode_count,
          "fiber_hamiltonian: coupling mode count does not match the context");
  require(c.spin.spin_dim == ctx.spin_dim,
          "fiber_hamiltonian: spin dimension mismatch");
  require(x.size() == c.nu, "fiber_hamiltonian: position dimension mismatch");

  const int d = ctx.dim();
  Mat h = Mat::Zero(d, d);

  const Mat gx = c.G_at(x);
  for (int l = 0; l < c.nu; ++l) {
    const Mat phi = field_fock(ctx, gx.col(l));
    h += 0.5 * lift_fock(ctx, Mat(phi * phi));
  }

  bool q_zero = true;
  if (c.q) {
    const Vec qx = c.q_at(x);
    if (qx.norm() > 0.0) {
      q_zero = false;
      h += Cplx(0.0, -0.5) * lift_fock(ctx, field_fock(ctx, qx));
    }
  }

  if (c.F && c.spin.couplings() > 0) {
    const Mat fx = c.F_at(x);
    for (int j = 0; j < c.spin.couplings(); ++j)
      h -= spin_tensor(ctx, c.spin.sigma[static_cast<std::size_t>(j)],
                       field_fock(ctx, fx.col(j)));
  }

  h += lift_fock(ctx, Mat(second_quantize_diag(ctx, ctx.omega).asDiagonal()));

  FockOperator op;
  op.matrix = std::move(h);
  op.hermitian = q_zero;
  return op;
}

double mho(const FockContext& ctx, const CoefficientVector& c, const RVec& x) {
  const int L = ctx.spin_dim;
  if (!c.F || c.spin.couplings() == 0) return 0.0;
  const Mat fx = c.F_at(x);
  RMat m = RMat::Zero(L, L);
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      // (sigma . F_x)_{ij} is the mode vector sum_s (sigma_s)_{ij} F_{s,x}
      Vec v = Vec::Zero(ctx.mode_count);
      for (int s = 0; s < c.spin.couplings(); ++s)
        v += c.spin.sigma[static_cast<std::size_t>(s)](i, j) * fx.col(s);
      double n2 = 0.0;
      for (int k = 0; k < ctx.mode_count; ++k)
        n2 += std::norm(v[k]) / ctx.omega[k];
      m(i, j) = std::sqrt(n2);
    }
  }
  Eigen::JacobiSVD<RMat> svd(m);
  return sqr(svd.singularValues()[0]);
}

double mho_sup(const FockContext& ctx, const CoefficientVector& c,
               const std::vector<RVec>& x_grid) {
  double s = 0.0;
  for (const auto& x : x_grid) s = std::max(s, mho(ctx, c, x));
  return s;
}

namespace {

RVec norm_weights(const FockContext& ctx, const NormSpec& spec) {
  const int K = ctx.mode_count;
  RVec varpi = spec.varpi.size() == K ? spec.varpi : RVec::Zero(K);
  RVec kappa = spec.kappa.size() == K ? spec.kappa : RVec(ctx.omega);
  RVec w(K);
  switch (spec.kind) {
    case NormKind::frak_k:
      for (int k = 0; k < K; ++k)
        w[k] = 1.0 / ctx.omega[k] + sqr(ctx.omega[k]);
      break;
    case NormKind::circle_poly:
      for (int k = 0; k < K; ++k) {
        const double u = varpi[k] + kappa[k];
        w[k] = sqr(spec.prefactor) * u *
               std::pow(1.0 + u, 2.0 * (std::abs(spec.alpha) - 0.5));
      }
      break;
    case NormKind::circle_exp:
      for (int k = 0; k < K; ++k) {
        const double u = 0.5 * spec.t0 * varpi[k] + kappa[k];
        const double s = std::max(u, sqr(u) / ctx.omega[k]);
        w[k] = sqr(spec.prefactor) * std::abs(spec.delta) * s *
               std::exp(2.0 * std::abs(spec.delta) * u);
      }
      break;
    case NormKind::star1:
      for (int k = 0; k < K; ++k)
        w[k] = sqr(spec.prefactor) * kappa[k] *
               std::pow(1.0 + kappa[k], 2.0 * (spec.alpha - 0.5));
      break;
    case NormKind::star2:
      for (int k = 0; k < K; ++k)
        w[k] = sqr(spec.prefactor) * varpi[k] *
               std::pow(1.0 + varpi[k], 2.0 * (spec.alpha - 0.5));
      break;
    case NormKind::star3:
      for (int k = 0; k < K; ++k) {
        const double s = std::max(kappa[k], sqr(kappa[k]) / ctx.omega[k]);
        w[k] = sqr(spec.prefactor) * spec.delta * s *
               std::exp(2.0 * spec.delta * kappa[k]);
      }
      break;
    case NormKind::star4:
      for (int k = 0; k < K; ++k)
        w[k] = sqr(spec.prefactor * spec.t_star) * spec.delta * varpi[k] *
               std::exp(spec.delta * spec.t_star * varpi[k]);
      break;
  }
  return w;
}

double weighted_l2(const RVec& w, const Vec& v) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) s += w[k] * std::norm(v[k]);
  return std::sqrt(s);
}

}  // namespace

double mode_norm(const FockContext& ctx, const NormSpec& spec, const Vec& v) {
  require(v.size() == ctx.mode_count, "mode_norm: amplitude size mismatch");
  return weighted_l2(norm_weights(ctx, spec), v);
}

double coupling_norm(const FockContext& ctx, const CoefficientVector& c,
                     const RVec& x, const NormSpec& spec) {
  const RVec w = norm_weights(ctx, spec);
  double s2 = 0.0;
  const Mat gx = c.G_at(x);
  for (int l = 0; l < c.nu; ++l) s2 += sqr(weighted_l2(w, gx.col(l)));
  s2 += sqr(weighted_l2(w, c.q_at(x)));
  if (c.spin.couplings() > 0) {
    // components of sigma . F as an L^2-indexed vector
    const Mat fx = c.F_at(x);
    for (int i = 0; i < ctx.spin_dim; ++i)
      for (int j = 0; j < ctx.spin_dim; ++j) {
        Vec v = Vec::Zero(ctx.mode_count);
        for (int s = 0; s < c.spin.couplings(); ++s)
          v += c.spin.sigma[static_cast<std::size_t>(s)](i, j) * fx.col(s);
        s2 += sqr(weighted_l2(w, v));
      }
  }
  return std::sqrt(s2);
}

double coupling_norm_sup(const FockContext& ctx, const CoefficientVector& c,
                         const std::vector<RVec>& x_grid, const NormSpec& spec) {
  double s = 0.0;
  for (const auto& x : x_grid) s = std::max(s, coupling_norm(ctx, c, x, spec));
  return s;
}

double g_circle_norm(const FockContext& ctx, const CoefficientVector& c,
                     const RVec& x, const NormSpec& spec) {
  const RVec w = norm_weights(ctx, spec);
  double s2 = 0.0;
  const Mat gx = c.G_at(x);
  for (int l = 0; l < c.nu; ++l) s2 += sqr(weighted_l2(w, gx.col(l)));
  return std::sqrt(s2);
}

double qf_circle_norm(const FockContext& ctx, const CoefficientVector& c,
                      const RVec& x, const NormSpec& spec) {
  const RVec w = norm_weights(ctx, spec);
  double s2 = sqr(weighted_l2(w, c.q_at(x)));
  if (c.spin.couplings() > 0) {
    const Mat fx = c.F_at(x);
    for (int i = 0; i < ctx.spin_dim; ++i)
      for (int j = 0; j < ctx.spin_dim; ++j) {
        Vec v = Vec::Zero(ctx.mode_count);
        for (int s = 0; s < c.spin.couplings(); ++s)
          v += c.spin.sigma[static_cast<std::size_t>(s)](i, j) * fx.col(s);
        s2 += sqr(weighted_l2(w, v));
      }
  }
  return std::sqrt(s2);
}

QedPreset qed_coupling_preset(const QedGrid& grid,
                              const std::function<double(const Eigen::Vector3d&)>& chi,
                              bool with_spin, const Eigen::Vector3d& pol_axis) {
  const int points = static_cast<int>(grid.k.size());
  require(points > 0, "qed preset: empty momentum grid");
  require(grid.weight.size() == grid.k.size(),
          "qed preset: one quadrature weight per grid point required");

  // two polarizations per momentum; mode index = 2 * point + lambda
  const int K = 2 * points;

  // C-reality needs the grid to be symmetric under k -> -k
  std::vector<int> flip(static_cast<std::size_t>(points), -1);
  for (int i = 0; i < points; ++i) {
    require(grid.k[static_cast<std::size_t>(i)].norm() > 0.0,
            "qed preset: k = 0 is not allowed (omega must be positive)");
    for (int j = 0; j < points; ++j) {
      if ((grid.k[static_cast<std::size_t>(i)] + grid.k[static_cast<std::size_t>(j)])
              .norm() < 1e-12) {
        flip[static_cast<std::size_t>(i)] = j;
        break;
      }
    }
    require(flip[static_cast<std::size_t>(i)] >= 0,
            "qed preset: momentum grid is not symmetric under k -> -k");
  }

  struct ModeData {
    Eigen::Vector3d k;
    Eigen::Vector3d eps;  // polarization vector
    double w = 0.0;       // quadrature weight
    int lambda = 0;
  };
  auto modes = std::make_shared<std::vector<ModeData>>();
  RVec omega(K);
  for (int i = 0; i < points; ++i) {
    const Eigen::Vector3d& k = grid.k[static_cast<std::size_t>(i)];
    Eigen::Vector3d e0 = pol_axis.cross(k);
    require(e0.norm() > 1e-12,
            "qed preset: polarization axis parallel to a grid momentum");
    e0.normalize();
    Eigen::Vector3d e1 = k.cross(e0) / k.norm();
    for (int lambda = 0; lambda < 2; ++lambda) {
      ModeData m;
      m.k = k;
      m.eps = lambda == 0 ? e0 : e1;
      m.w = grid.weight[static_cast<std::size_t>(i)];
      m.lambda = lambda;
      modes->push_back(m);
      omega[2 * i + lambda] = k.norm();
    }
  }

  CoefficientVector c;
  c.mode_count = K;
  c.nu = 3;
  c.spin = with_spin ? pauli_spin() : scalar_spin();

  const double pref = std::pow(2.0 * M_PI, -1.5);
  c.G = [modes, chi, pref, K](const RVec& x) {
    Mat g(K, 3);
    for (int m = 0; m < K; ++m) {
      const ModeData& md = (*modes)[static_cast<std::size_t>(m)];
      const double amp = pref * std::sqrt(md.w / (2.0 * md.k.norm())) * chi(md.k);
      const Cplx phase = std::exp(-kI * (md.k.x() * x[0] + md.k.y() * x[1] +
                                         md.k.z() * x[2]));
      for (int l = 0; l < 3; ++l) g(m, l) = amp * phase * md.eps[l];
    }
    return g;
  };
  c.q = nullptr;  // Coulomb gauge
  if (with_spin) {
    c.F = [modes, chi, pref, K](const RVec& x) {
      Mat f(K, 3);
      for (int m = 0; m < K; ++m) {
        const ModeData& md = (*modes)[static_cast<std::size_t>(m)];
        const double amp = pref * std::sqrt(md.w / (2.0 * md.k.norm())) * chi(md.k);
        const Cplx phase = std::exp(-kI * (md.k.x() * x[0] + md.k.y() * x[1] +
                                           md.k.z() * x[2]));
        const Eigen::Vector3d kxe = md.k.cross(md.eps);
        for (int l = 0; l < 3; ++l)
          f(m, l) = Cplx(0.0, -0.5) * kxe[l] * amp * phase;
      }
      return f;
    };
  }

  // (C f)(k, lambda) = (-1)^(1+lambda) conj(f(-k, lambda))
  std::vector<int> mode_flip(static_cast<std::size_t>(K));
  for (int i = 0; i < points; ++i)
    for (int lambda = 0; lambda < 2; ++lambda)
      mode_flip[static_cast<std::size_t>(2 * i + lambda)] =
          2 * flip[static_cast<std::size_t>(i)] + lambda;
  c.conj_C = [modes, mode_flip, K](const Vec& v) {
    Vec out(K);
    for (int m = 0; m < K; ++m) {
      const int lam = (*modes)[static_cast<std::size_t>(m)].lambda;
      const double sign = lam == 0 ? -1.0 : 1.0;  // (-1)^(1+lambda)
      out[m] = sign * std::conj(v[mode_flip[static_cast<std::size_t>(m)]]);
    }
    return out;
  };

  return QedPreset{std::move(c), std::move(omega)};
}

Lattice make_lattice(double lo, double hi, int points, bool periodic) {
  require(points >= 1, "make_lattice: need at least one point");
  Lattice lat;
  lat.nodes = RVec::LinSpaced(points, lo, hi);
  lat.spacing = points > 1 ? (hi - lo) / (points - 1) : 1.0;
  lat.periodic = periodic;
  return lat;
}

double potential_on_lattice(const PotentialSpec& V, const Lattice& lat, double x) {
  if (V.is_zero()) return 0.0;
  RVec p(1);
  p[0] = x;
  if (V.tag == PotentialSpec::Tag::kato_coulomb) {
    // clamp inside |x - R| < h/2; the Kato diagnostics use the unclamped V
    for (const auto& site : V.singular_sites) {
      if (std::abs(x - site[0]) < 0.5 * lat.spacing) {
        RVec edge(1);
        edge[0] = site[0] + 0.5 * lat.spacing;
        return V.V(edge);
      }
    }
  }
  return V.V(p);
}

Mat lattice_hamiltonian(const FockContext& ctx, const CoefficientVector& c,
                        const PotentialSpec& V, const Lattice& lat) {
  require(c.nu == 1, "lattice_hamiltonian: only nu = 1 lattices are supported");
  const int G = lat.size();
  const int d = ctx.dim();
  const int n = G * d;
  const double h = lat.spacing;
  Mat H = Mat::Zero(n, n);

  const Mat dgamma =
      lift_fock(ctx, Mat(second_quantize_diag(ctx, ctx.omega).asDiagonal()));

  for (int i = 0; i < G; ++i) {
    RVec x(1);
    x[0] = lat.nodes[i];
    Mat diag = dgamma;
    if (G > 1) diag += (1.0 / sqr(h)) * Mat::Identity(d, d);
    diag += potential_on_lattice(V, lat, lat.nodes[i]) * Mat::Identity(d, d);
    if (c.F && c.spin.couplings() > 0) {
      const Mat fx = c.F_at(x);
      for (int j = 0; j < c.spin.couplings(); ++j)
        diag -= spin_tensor(ctx, c.spin.sigma[static_cast<std::size_t>(j)],
                            field_fock(ctx, fx.col(j)));
    }
    H.block(i * d, i * d, d, d) = diag;
  }

  // Peierls phase on the edge (i, i+1): the forward hop carries
  // exp(-i h field(G_mid)) so that the small-h expansion reproduces
  // 1/2 (-i d/dx - field(G))^2
  auto edge_phase = [&](double xm) {
    RVec x(1);
    x[0] = xm;
    if (!c.G) return Mat(Mat::Identity(d, d));
    const Mat gx = c.G_at(x);
    return Mat(lift_fock(ctx, expm_i_hermitian(field_fock(ctx, gx.col(0)), -h)));
  };

  for (int i = 0; i + 1 < G; ++i) {
    const Mat u = edge_phase(0.5 * (lat.nodes[i] + lat.nodes[i + 1]));
    H.block(i * d, (i + 1) * d, d, d) = -(0.5 / sqr(h)) * u;
    H.block((i + 1) * d, i * d, d, d) = -(0.5 / sqr(h)) * u.adjoint();
  }
  if (lat.periodic && G > 2) {
    const Mat u = edge_phase(lat.nodes[G - 1] + 0.5 * h);
    H.block((G - 1) * d, 0, d, d) = -(0.5 / sqr(h)) * u;
    H.block(0, (G - 1) * d, d, d) = -(0.5 / sqr(h)) * u.adjoint();
  }

  require(herm_defect(H) < 1e-12,
          "lattice_hamiltonian: assembled matrix is not Hermitian, coupling or "
          "grid bug");
  return H;
}

}  // namespace fockfk
