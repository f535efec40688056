#include "fockfk/commlab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fockfk {

namespace {

double f_eps(double t, double eps) { return t / (1.0 + eps * t); }

}  // namespace

double ScalarFunction::operator()(double t) const {
  switch (kind) {
    case Kind::power:
      return std::pow(t, n);
    case Kind::f_eps_pow:
      return std::pow(f_eps(t, eps), alpha);
    case Kind::f_eps_e:
      return f_eps(E + t, eps);
    case Kind::exp_f_eps:
      return std::exp(a * f_eps(t, eps));
  }
  return 0.0;
}

double difference_op(const DifferenceSpec& spec, double t) {
  const int L = static_cast<int>(spec.shifts.size());
  for (double s : spec.shifts) require(s > 0.0, "difference_op: shifts must be positive");
  double acc = 0.0;
  for (unsigned mask = 0; mask < (1u << L); ++mask) {
    double arg = t;
    int bits = 0;
    for (int l = 0; l < L; ++l)
      if (mask & (1u << l)) {
        arg += spec.shifts[static_cast<std::size_t>(l)];
        ++bits;
      }
    const double sign = ((L - bits) % 2 == 0) ? 1.0 : -1.0;
    acc += sign * spec.f(arg);
  }
  return acc;
}

namespace {

double leibniz_bound_shape(LeibnizBound bound, const ScanOptions& o, double t,
                           const std::vector<double>& shifts) {
  double s_pow = 1.0;
  double dsum = 0.0;
  for (std::size_t l = 0; l < shifts.size(); ++l) {
    s_pow *= std::pow(shifts[l], o.deltas[l]);
    dsum += o.deltas[l];
  }
  switch (bound) {
    case LeibnizBound::inverse_power:
      return std::pow(f_eps(t, o.eps), -o.alpha) * std::pow(t, -dsum) * s_pow;
    case LeibnizBound::power: {
      double acc = std::pow(f_eps(t, o.eps), o.alpha) * std::pow(t, -dsum);
      for (double s : shifts)
        acc += std::pow(f_eps(t + s, o.eps), o.alpha) * std::pow(t + s, -dsum);
      return acc * s_pow;
    }
    case LeibnizBound::exponential: {
      double stot = 0.0;
      for (double s : shifts) stot += s;
      return std::pow(o.a, dsum) * std::exp(o.a * f_eps(t, o.eps)) *
             std::exp(o.a * stot) * s_pow;
    }
  }
  return 1.0;
}

double scan_sup(LeibnizBound bound, const ScanOptions& o, int t_points, int s_points) {
  ScalarFunction f;
  switch (bound) {
    case LeibnizBound::inverse_power:
      f.kind = ScalarFunction::Kind::f_eps_pow;
      f.alpha = -o.alpha;
      f.eps = o.eps;
      break;
    case LeibnizBound::power:
      f.kind = ScalarFunction::Kind::f_eps_pow;
      f.alpha = o.alpha;
      f.eps = o.eps;
      break;
    case LeibnizBound::exponential:
      f.kind = ScalarFunction::Kind::exp_f_eps;
      f.a = o.a;
      f.eps = o.eps;
      break;
  }
  const int L = static_cast<int>(o.deltas.size());
  double sup = 0.0;
  for (int it = 0; it < t_points; ++it) {
    const double t = o.t_lo + (o.t_hi - o.t_lo) * it / (t_points - 1);
    // scan shift tuples along a diagonal family plus staggered variants
    for (int is = 0; is < s_points; ++is) {
      const double base = o.s_lo * std::pow(o.s_hi / o.s_lo,
                                            static_cast<double>(is) / (s_points - 1));
      for (int variant = 0; variant < 3; ++variant) {
        std::vector<double> shifts(static_cast<std::size_t>(L));
        for (int l = 0; l < L; ++l)
          shifts[static_cast<std::size_t>(l)] =
              base * (variant == 0 ? 1.0 : variant == 1 ? (1.0 + l) : 1.0 / (1.0 + l));
        DifferenceSpec spec{f, shifts, o.deltas};
        const double lhs = std::abs(difference_op(spec, t));
        const double shape = leibniz_bound_shape(bound, o, t, shifts);
        if (shape > 0.0) sup = std::max(sup, lhs / shape);
      }
    }
  }
  return sup;
}

}  // namespace

ScanRecord difference_bound_scan(LeibnizBound bound, const ScanOptions& opts) {
  ScanRecord rec;
  rec.label = bound == LeibnizBound::inverse_power ? "inverse-power"
              : bound == LeibnizBound::power ? "power"
                                             : "exponential";
  require(!opts.deltas.empty(), "difference_bound_scan: need at least one shift");
  for (double d : opts.deltas)
    require(d >= 0.0 && d <= 1.0, "difference_bound_scan: deltas must be in [0,1]");
  require(opts.eps >= 0.0 && opts.eps <= 1.0,
          "difference_bound_scan: eps must be in [0,1]");
  if (bound == LeibnizBound::exponential && opts.eps > opts.a) {
    rec.refused = true;  // the lemma requires eps <= a
    return rec;
  }
  if (bound != LeibnizBound::exponential)
    require(opts.alpha > 0.0, "difference_bound_scan: alpha must be positive");

  rec.ratio_sup = scan_sup(bound, opts, opts.t_points, opts.s_points);
  rec.refined_ratio = scan_sup(bound, opts, 2 * opts.t_points, 2 * opts.s_points);
  const double scale = std::max(rec.ratio_sup, rec.refined_ratio);
  rec.refinement_change =
      scale == 0.0 ? 0.0 : std::abs(rec.refined_ratio - rec.ratio_sup) / scale;
  rec.pass = std::isfinite(rec.ratio_sup) && rec.refinement_change < 0.10;
  return rec;
}

double pull_through_residual(const FockContext& ctx,
                             const std::function<double(double)>& F, const RVec& v,
                             const std::vector<int>& modes, const Vec& psi) {
  require(v.size() == ctx.mode_count, "pull_through_residual: weight size mismatch");
  require(psi.size() == ctx.fock_dim(), "pull_through_residual: fock-part vector expected");
  const RVec dg = second_quantize_diag(ctx, v);
  double shift = 0.0;
  Mat a_prod = Mat::Identity(ctx.fock_dim(), ctx.fock_dim());
  for (int p : modes) {
    require(p >= 0 && p < ctx.mode_count, "pull_through_residual: bad mode index");
    a_prod = ctx.lowering[static_cast<std::size_t>(p)] * a_prod;
    shift += v[p];
  }
  Vec lhs(ctx.fock_dim()), rhs(ctx.fock_dim());
  Vec fpsi(ctx.fock_dim());
  for (int b = 0; b < ctx.fock_dim(); ++b) fpsi[b] = F(dg[b]) * psi[b];
  lhs = a_prod * fpsi;
  const Vec apsi = a_prod * psi;
  for (int b = 0; b < ctx.fock_dim(); ++b) rhs[b] = F(dg[b] + shift) * apsi[b];
  return (lhs - rhs).norm();
}

namespace {

Mat diag_fn(const FockContext& ctx, const std::function<double(double)>& F,
            const RVec& v, double shift) {
  const RVec dg = second_quantize_diag(ctx, v);
  Vec d(ctx.fock_dim());
  for (int b = 0; b < ctx.fock_dim(); ++b) d[b] = F(dg[b] + shift);
  return Mat(d.asDiagonal());
}

// iterate over all subsets of {0..n-1}
void subsets(int n, std::vector<std::vector<int>>& out) {
  out.clear();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) s.push_back(i);
    out.push_back(s);
  }
}

}  // namespace

double multi_commutator_residual(const FockContext& ctx,
                                 const MultiCommutatorData& data) {
  const int N = static_cast<int>(data.creation_g.size());
  const int M = static_cast<int>(data.annihilation_g.size());
  const int K = ctx.mode_count;
  const int d = ctx.fock_dim();
  require(data.phi.size() == d && data.psi.size() == d,
          "multi_commutator_residual: fock-part vectors expected");
  // the identity is exact only when every intermediate stays below the cap
  const RVec support = ctx.safe_mask(M + N);
  for (int b = 0; b < d; ++b)
    require(support[b] > 0.5 || (data.phi[b] == Cplx(0.0, 0.0) &&
                                 data.psi[b] == Cplx(0.0, 0.0)),
            "multi_commutator_residual: refused, states must be supported at "
            "total bosons <= boson_cap - (M + N)");

  // LHS: nested matrix commutators applied around F2, then the sandwich
  Mat core = diag_fn(ctx, data.F2, data.v2, 0.0);
  for (int l = 0; l < M; ++l) {
    const Mat a = lowering_fock(ctx, data.annihilation_g[static_cast<std::size_t>(l)]);
    core = a * core - core * a;
  }
  for (int j = 0; j < N; ++j) {
    const Mat ad =
        lowering_fock(ctx, data.creation_g[static_cast<std::size_t>(j)]).adjoint();
    core = ad * core - core * ad;
  }
  const Mat f1 = diag_fn(ctx, data.F1, data.v1, 0.0);
  const Mat f3 = diag_fn(ctx, data.F3, data.v3, 0.0);
  const Cplx lhs = (f1 * data.phi).adjoint() * (core * (f3 * data.psi));

  // RHS: partition/bijection sum with counting-measure mode sums
  std::vector<std::vector<int>> subs_j, subs_l;
  subsets(N, subs_j);
  subsets(M, subs_l);
  Cplx rhs = 0.0;
  const double sign_n = (N % 2 == 0) ? 1.0 : -1.0;

  for (const auto& a_set : subs_j) {
    std::vector<int> b_set;
    for (int j = 0; j < N; ++j)
      if (std::find(a_set.begin(), a_set.end(), j) == a_set.end()) b_set.push_back(j);
    for (const auto& c_set : subs_l) {
      std::vector<int> d_set;
      for (int l = 0; l < M; ++l)
        if (std::find(c_set.begin(), c_set.end(), l) == c_set.end())
          d_set.push_back(l);
      if (b_set.size() != d_set.size()) continue;

      // modes for the integration variables p_A and p_L
      const int vars = static_cast<int>(a_set.size()) + M;
      const RVec dg2 = second_quantize_diag(ctx, data.v2);
      std::vector<int> p(static_cast<std::size_t>(vars), 0);
      bool done = false;
      while (!done) {
        // p layout: first #A entries for A, then M entries for L
        auto p_of_a = [&](std::size_t i) { return p[i]; };
        auto p_of_l = [&](int l) {
          return p[a_set.size() + static_cast<std::size_t>(l)];
        };

        // annihilation-side product over all of L
        Cplx amp_l = 1.0;
        for (int l = 0; l < M; ++l)
          amp_l *= std::conj(
              data.annihilation_g[static_cast<std::size_t>(l)][p_of_l(l)]);
        // creation functions at the A variables
        Cplx amp_a = 1.0;
        for (std::size_t i = 0; i < a_set.size(); ++i)
          amp_a *=
              data.creation_g[static_cast<std::size_t>(a_set[i])][p_of_a(i)];

        // v-shifts for the sandwich factors
        double shift1 = 0.0;
        for (std::size_t i = 0; i < a_set.size(); ++i) shift1 += data.v1[p_of_a(i)];
        double shift3 = 0.0;
        for (int cidx : c_set) shift3 += data.v3[p_of_l(cidx)];

        // iterated difference of F2 over the A cup L shifts
        std::vector<double> dshifts;
        for (std::size_t i = 0; i < a_set.size(); ++i)
          dshifts.push_back(data.v2[p_of_a(i)]);
        for (int l = 0; l < M; ++l) dshifts.push_back(data.v2[p_of_l(l)]);
        Vec diff_diag(d);
        for (int b = 0; b < d; ++b) {
          double acc = 0.0;
          const int nl = static_cast<int>(dshifts.size());
          for (unsigned mask = 0; mask < (1u << nl); ++mask) {
            double arg = dg2[b];
            int bits = 0;
            for (int l = 0; l < nl; ++l)
              if (mask & (1u << l)) {
                arg += dshifts[static_cast<std::size_t>(l)];
                ++bits;
              }
            acc += (((nl - bits) % 2 == 0) ? 1.0 : -1.0) * data.F2(arg);
          }
          diff_diag[b] = acc;
        }

        // a(p_A) phi and a(p_C) psi
        Vec phi_a = data.phi;
        for (std::size_t i = 0; i < a_set.size(); ++i)
          phi_a = ctx.lowering[static_cast<std::size_t>(p_of_a(i))] * phi_a;
        Vec psi_c = data.psi;
        for (int cidx : c_set)
          psi_c = ctx.lowering[static_cast<std::size_t>(p_of_l(cidx))] * psi_c;

        // bijection sum over B -> D
        Cplx amp_bd = 0.0;
        if (b_set.empty()) {
          amp_bd = 1.0;
        } else {
          std::vector<int> perm(d_set.begin(), d_set.end());
          std::sort(perm.begin(), perm.end());
          do {
            Cplx term = 1.0;
            for (std::size_t i = 0; i < b_set.size(); ++i)
              term *= data.creation_g[static_cast<std::size_t>(b_set[i])]
                                     [p_of_l(perm[i])];
            amp_bd += term;
          } while (std::next_permutation(perm.begin(), perm.end()));
        }

        // sandwich: F1(dG(v1)+shift1) diff_diag F3(dG(v3)+shift3)
        const RVec dg1 = second_quantize_diag(ctx, data.v1);
        const RVec dg3 = second_quantize_diag(ctx, data.v3);
        Cplx bracket = 0.0;
        for (int b = 0; b < d; ++b)
          bracket += std::conj(phi_a[b]) * data.F1(dg1[b] + shift1) *
                     diff_diag[b] * data.F3(dg3[b] + shift3) * psi_c[b];

        rhs += amp_l * amp_a * amp_bd * bracket;

        // advance the mode tuple
        done = true;
        for (int pos = vars - 1; pos >= 0; --pos) {
          if (++p[static_cast<std::size_t>(pos)] < K) {
            done = false;
            break;
          }
          p[static_cast<std::size_t>(pos)] = 0;
        }
      }
    }
  }
  rhs *= sign_n;
  return std::abs(lhs - rhs);
}

namespace {

Mat nested_ad(const FockContext& ctx, const std::vector<Vec>& creation_g,
              const std::vector<Vec>& annihilation_g, const Mat& center) {
  Mat core = center;
  for (const auto& g : annihilation_g) {
    const Mat a = lowering_fock(ctx, g);
    core = a * core - core * a;
  }
  for (const auto& g : creation_g) {
    const Mat ad = lowering_fock(ctx, g).adjoint();
    core = ad * core - core * ad;
  }
  return core;
}

double l2_mode_norm(const RVec& w, const Vec& g) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < g.size(); ++k) acc += w[k] * std::norm(g[k]);
  return std::sqrt(acc);
}

CommNormRecord comm_norm_at(const FockContext& ctx, const CommNormSpec& spec) {
  CommNormRecord rec;
  const int K = ctx.mode_count;
  RVec v = spec.v.size() == K ? spec.v : RVec(ctx.omega);
  RVec v_eps(K);
  for (int k = 0; k < K; ++k) v_eps[k] = v[k] / (1.0 + spec.eps * v[k]);

  auto f_pow = [&](double expo) {
    return diag_fn(
        ctx,
        [&](double t) {
          return std::pow((spec.E + t) / (1.0 + spec.eps * (spec.E + t)), expo);
        },
        v_eps, 0.0);
  };
  auto f_exp = [&](double rate) {
    return diag_fn(
        ctx,
        [&](double t) {
          return std::exp(rate * (spec.E + t) / (1.0 + spec.eps * (spec.E + t)));
        },
        v_eps, 0.0);
  };
  auto theta_pow = [&](double expo) {
    return diag_fn(
        ctx, [&](double t) { return std::pow(1.0 + t, -0.5 * expo); }, v, 0.0);
  };

  const Mat center = spec.exponential ? f_exp(spec.delta) : f_pow(spec.alpha);
  const Mat core = nested_ad(ctx, spec.creation_g, spec.annihilation_g, center);
  Mat t = theta_pow(static_cast<double>(spec.n)) *
          (spec.exponential ? f_exp(-spec.beta)
                            : f_pow(spec.sigma - spec.beta + spec.kappa)) *
          core *
          (spec.exponential ? f_exp(-spec.gamma)
                            : f_pow(spec.tau - spec.gamma - spec.kappa)) *
          theta_pow(static_cast<double>(spec.m));
  rec.norm = op_norm(t);

  const int N = static_cast<int>(spec.creation_g.size());
  const int M = static_cast<int>(spec.annihilation_g.size());
  std::vector<Vec> gs;
  for (const auto& g : spec.creation_g) gs.push_back(g);
  for (const auto& g : spec.annihilation_g) gs.push_back(g);

  if (!spec.exponential) {
    const double mu =
        std::max(std::abs(spec.kappa) + spec.sigma + spec.tau,
                 spec.alpha + std::abs(spec.kappa) + spec.sigma + spec.tau -
                     0.5 * (M + N + spec.m + spec.n));
    RVec w_plain(K), w_mu(K), w_kst(K);
    for (int k = 0; k < K; ++k) {
      w_plain[k] = v[k];
      w_mu[k] = v[k] * std::pow(1.0 + v[k] / spec.E, 2.0 * mu);
      w_kst[k] = v[k] * std::pow(1.0 + v[k] / spec.E,
                                 2.0 * (std::abs(spec.kappa) + spec.sigma + spec.tau));
    }
    double sum = 0.0;
    for (std::size_t a = 0; a < gs.size(); ++a) {
      for (std::size_t b = 0; b < gs.size(); ++b) {
        if (a == b) continue;
        double term = l2_mode_norm(w_mu, gs[a]) * l2_mode_norm(w_kst, gs[b]);
        for (std::size_t c2 = 0; c2 < gs.size(); ++c2)
          if (c2 != a && c2 != b) term *= l2_mode_norm(w_plain, gs[c2]);
        sum += term;
      }
      double term = l2_mode_norm(w_mu, gs[a]);
      for (std::size_t c2 = 0; c2 < gs.size(); ++c2)
        if (c2 != a) term *= l2_mode_norm(w_plain, gs[c2]);
      sum += term;
    }
    rec.bound_shape =
        std::pow(spec.E, -0.5 * (M + N + spec.m + spec.n) + spec.sigma + spec.tau) *
        sum;
  } else {
    RVec u(K);
    for (int k = 0; k < K; ++k) {
      const double dv = spec.delta * v[k];
      u[k] = std::max(dv, sqr(dv) / ctx.omega[k]) * std::exp(2.0 * spec.delta * v[k]);
    }
    double prod = 1.0;
    for (const auto& g : gs) prod *= l2_mode_norm(u, g);
    rec.bound_shape = prod;
  }
  rec.ratio = rec.bound_shape > 0.0 ? rec.norm / rec.bound_shape : 0.0;

  // inversion identities comm-inv1/comm-inv2 for the first wave function
  if (!gs.empty()) {
    const Mat phi = field_fock(ctx, gs.front());
    const Mat theta = center;
    const Mat theta_inv = center.inverse();
    auto ad1 = [&](const Mat& a, const Mat& b) { return Mat(a * b - b * a); };
    const Mat r1 = ad1(phi, theta_inv) * theta + theta_inv * ad1(phi, theta);
    const Mat r2 = ad1(phi, ad1(phi, theta_inv)) * theta +
                   theta_inv * ad1(phi, ad1(phi, theta)) -
                   2.0 * (theta_inv * ad1(phi, theta)) *
                       (theta_inv * ad1(phi, theta));
    rec.inversion_residual = std::max(r1.norm(), r2.norm());
  }
  return rec;
}

}  // namespace

CommNormRecord commutator_norm_check(const FockContext& ctx,
                                     const CommNormSpec& spec) {
  if (!spec.exponential) {
    if (std::abs(spec.alpha) < 0.5 ||
        std::abs(spec.alpha - (spec.beta + spec.gamma)) > 1e-12) {
      CommNormRecord rec;
      rec.skipped = true;
      return rec;
    }
  } else {
    if (spec.eps > spec.delta ||
        std::abs(spec.delta - (spec.beta + spec.gamma)) > 1e-12) {
      CommNormRecord rec;
      rec.skipped = true;
      return rec;
    }
  }
  CommNormRecord rec = comm_norm_at(ctx, spec);
  FockContext refined = build_context(ctx.mode_count, ctx.omega, ctx.boson_cap + 2,
                                      ctx.spin_dim);
  const CommNormRecord fine = comm_norm_at(refined, spec);
  rec.ratio_refined = fine.ratio;
  const double scale = std::max(rec.ratio, rec.ratio_refined);
  rec.refinement_change =
      scale == 0.0 ? 0.0 : std::abs(rec.ratio_refined - rec.ratio) / scale;
  rec.pass = std::isfinite(rec.ratio) && rec.refinement_change < 0.15 &&
             rec.inversion_residual < 1e-10;
  return rec;
}

WeightCommutatorRecord weight_commutator_check(const FockContext& ctx,
                                               const CoefficientVector& c,
                                               const RVec& x,
                                               const WeightSpec& weight) {
  WeightCommutatorRecord rec;
  const RVec wd = weight_diag(ctx, weight);
  const Mat theta = Mat(Vec(wd.cast<Cplx>()).asDiagonal());
  const Mat theta_inv = Mat(Vec(wd.cwiseInverse().cast<Cplx>()).asDiagonal());
  // vartheta = 1 for polynomial weights, 1 + dGamma(omega) for exponential
  Mat vartheta_inv_sqrt;
  {
    const RVec dg = second_quantize_diag(ctx, ctx.omega);
    Vec d(ctx.fock_dim());
    for (int b = 0; b < ctx.fock_dim(); ++b)
      d[b] = weight.kind == WeightSpec::Kind::polynomial
                 ? 1.0
                 : 1.0 / std::sqrt(1.0 + dg[b]);
    vartheta_inv_sqrt = Mat(d.asDiagonal());
  }
  auto ad1 = [&](const Mat& a, const Mat& b) { return Mat(a * b - b * a); };

  const Mat gx = c.G_at(x);
  const Mat theta2 = theta * theta;
  double t1 = 0.0, tp = 0.0, tm = 0.0;
  Mat t1m = Mat::Zero(ctx.fock_dim(), ctx.fock_dim());
  for (int l = 0; l < c.nu; ++l) {
    const Mat phi = field_fock(ctx, gx.col(l));
    t1m += vartheta_inv_sqrt * theta_inv * ad1(ad1(theta2, phi), phi) * theta_inv *
           vartheta_inv_sqrt;
    const Mat tplus = 2.0 * ad1(theta, phi) * theta_inv * vartheta_inv_sqrt;
    const Mat tminus = 2.0 * ad1(theta_inv, phi) * theta * vartheta_inv_sqrt;
    tp += sqr(op_norm(tplus));
    tm += sqr(op_norm(tminus));
  }
  t1 = 0.5 * op_norm(t1m);
  rec.t1_norm = t1;
  rec.tplus_norm = std::sqrt(tp);
  rec.tminus_norm = std::sqrt(tm);

  Mat t2m = Mat::Zero(ctx.fock_dim(), ctx.fock_dim());
  if (c.q) {
    const Mat phi_q = field_fock(ctx, c.q_at(x));
    t2m += Cplx(0.0, 0.5) * ad1(theta, phi_q) * theta_inv * vartheta_inv_sqrt;
  }
  if (c.F && c.spin.couplings() > 0 && ctx.spin_dim == 1) {
    const Mat fx = c.F_at(x);
    for (int j = 0; j < c.spin.couplings(); ++j) {
      const Mat phi_f = c.spin.sigma[static_cast<std::size_t>(j)](0, 0) *
                        field_fock(ctx, fx.col(j));
      t2m += 0.5 * theta_inv * ad1(theta, ad1(theta, phi_f)) * theta_inv *
             vartheta_inv_sqrt;
    }
  }
  rec.t2_norm = op_norm(t2m);

  NormSpec circ;
  circ.kind = weight.kind == WeightSpec::Kind::polynomial ? NormKind::circle_poly
                                                          : NormKind::circle_exp;
  circ.varpi = weight.varpi;
  circ.kappa = weight.kappa;
  circ.alpha = weight.exponent;
  circ.delta = weight.exponent;
  circ.t0 = weight.t0;
  rec.g_bound = g_circle_norm(ctx, c, x, circ);
  rec.qf_bound = qf_circle_norm(ctx, c, x, circ);
  rec.t1_ratio = rec.g_bound > 0.0 ? rec.t1_norm / sqr(rec.g_bound) : 0.0;
  rec.tpm_ratio = rec.g_bound > 0.0
                      ? std::max(rec.tplus_norm, rec.tminus_norm) / rec.g_bound
                      : 0.0;
  rec.t2_ratio = rec.qf_bound > 0.0 ? rec.t2_norm / rec.qf_bound : 0.0;

  // comm-inv1 / comm-inv2 for the first coupling column
  if (c.G) {
    const Mat phi = field_fock(ctx, gx.col(0));
    const Mat r1 = ad1(phi, theta_inv) * theta + theta_inv * ad1(phi, theta);
    const Mat r2 =
        ad1(phi, ad1(phi, theta_inv)) * theta + theta_inv * ad1(phi, ad1(phi, theta)) -
        2.0 * (theta_inv * ad1(phi, theta)) * (theta_inv * ad1(phi, theta));
    rec.inversion_residual = std::max(r1.norm(), r2.norm());
  }
  return rec;
}

double faa_di_bruno_residual(double a, double eps, double t, int k, double h) {
  require(k >= 1 && k <= 6, "faa_di_bruno_residual: k in 1..6");
  // closed form: d^k/dt^k e^{aF_eps} = e^{aF_eps} sum_l c_{k,l} a^l (-eps)^{k-l}
  //   / (1+eps t)^{k+l}, c_{k,l} = (k!/l!) C(k-1, l-1)
  auto fact = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  auto choose = [&](int n, int r) {
    if (r < 0 || r > n) return 0.0;
    return fact(n) / (fact(r) * fact(n - r));
  };
  double closed = 0.0;
  for (int l = 1; l <= k; ++l)
    closed += fact(k) / fact(l) * choose(k - 1, l - 1) * std::pow(a, l) *
              std::pow(-eps, k - l) / std::pow(1.0 + eps * t, k + l);
  closed *= std::exp(a * f_eps(t, eps));

  // central finite differences of order O(h^2)
  auto g = [&](double u) { return std::exp(a * f_eps(u, eps)); };
  double fd = 0.0;
  for (int i = 0; i <= k; ++i)
    fd += ((k - i) % 2 == 0 ? 1.0 : -1.0) * choose(k, i) *
          g(t + (static_cast<double>(i) - 0.5 * k) * h);
  fd /= std::pow(h, k);
  return std::abs(fd - closed);
}

}  // namespace fockfk
