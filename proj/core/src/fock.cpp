#include "fockfk/fock.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace fockfk {

namespace {

void gen_level(int modes_left, int total, std::vector<int>& head,
               std::vector<std::vector<int>>& out) {
  if (modes_left == 1) {
    head.push_back(total);
    out.push_back(head);
    head.pop_back();
    return;
  }
  for (int n = total; n >= 0; --n) {
    head.push_back(n);
    gen_level(modes_left - 1, total - n, head, out);
    head.pop_back();
  }
}

}  // namespace

int FockContext::index_of(const std::vector<int>& occ) const {
  auto it = index_.find(occ);
  return it == index_.end() ? -1 : it->second;
}

RVec FockContext::safe_mask(int margin) const {
  RVec mask = RVec::Zero(fock_dim());
  for (int i = 0; i < fock_dim(); ++i)
    if (total_bosons[static_cast<std::size_t>(i)] <= boson_cap - margin)
      mask[i] = 1.0;
  return mask;
}

FockContext build_context(int mode_count, const RVec& omega, int boson_cap,
                          int spin_dim) {
  require(mode_count >= 1, "build_context: mode_count must be >= 1");
  require(boson_cap >= 0, "build_context: boson_cap must be >= 0");
  require(spin_dim >= 1, "build_context: spin_dim must be >= 1");
  require(omega.size() == mode_count,
          "build_context: omega must have one entry per mode");
  for (int j = 0; j < mode_count; ++j)
    require(omega[j] > 0.0, "build_context: frequency omega[" +
                                std::to_string(j) + "] = " +
                                std::to_string(omega[j]) +
                                " is not strictly positive");

  FockContext ctx;
  ctx.mode_count = mode_count;
  ctx.omega = omega;
  ctx.boson_cap = boson_cap;
  ctx.spin_dim = spin_dim;

  std::vector<int> head;
  for (int total = 0; total <= boson_cap; ++total)
    gen_level(mode_count, total, head, ctx.basis);

  for (std::size_t i = 0; i < ctx.basis.size(); ++i) {
    int t = 0;
    for (int n : ctx.basis[i]) t += n;
    ctx.total_bosons.push_back(t);
    ctx.index_[ctx.basis[i]] = static_cast<int>(i);
  }

  const int d = ctx.fock_dim();
  ctx.lowering.assign(static_cast<std::size_t>(mode_count), Mat::Zero(d, d));
  for (int i = 0; i < d; ++i) {
    std::vector<int> occ = ctx.basis[static_cast<std::size_t>(i)];
    for (int j = 0; j < mode_count; ++j) {
      if (occ[static_cast<std::size_t>(j)] == 0) continue;
      occ[static_cast<std::size_t>(j)] -= 1;
      const int tgt = ctx.index_.at(occ);
      occ[static_cast<std::size_t>(j)] += 1;
      ctx.lowering[static_cast<std::size_t>(j)](tgt, i) =
          std::sqrt(static_cast<double>(occ[static_cast<std::size_t>(j)]));
    }
  }
  return ctx;
}

Mat lowering_fock(const FockContext& ctx, const Vec& f) {
  require(f.size() == ctx.mode_count, "ladder: amplitude size mismatch");
  Mat out = Mat::Zero(ctx.fock_dim(), ctx.fock_dim());
  for (int j = 0; j < ctx.mode_count; ++j)
    out += std::conj(f[j]) * ctx.lowering[static_cast<std::size_t>(j)];
  return out;
}

Mat field_fock(const FockContext& ctx, const Vec& f) {
  const Mat a = lowering_fock(ctx, f);
  return Mat(a + a.adjoint());
}

Mat lift_fock(const FockContext& ctx, const Mat& fock_part) {
  if (ctx.spin_dim == 1) return fock_part;
  return kron(Mat::Identity(ctx.spin_dim, ctx.spin_dim), fock_part);
}

Mat spin_tensor(const FockContext& ctx, const Mat& sigma, const Mat& fock_part) {
  require(sigma.rows() == ctx.spin_dim && sigma.cols() == ctx.spin_dim,
          "spin_tensor: sigma dimension mismatch");
  return kron(sigma, fock_part);
}

FockOperator diagonal_operator(const FockContext& ctx, const RVec& fock_diag) {
  FockOperator op;
  Vec d(ctx.dim());
  for (int s = 0; s < ctx.spin_dim; ++s)
    for (int b = 0; b < ctx.fock_dim(); ++b) d[ctx.full_index(s, b)] = fock_diag[b];
  op.matrix = d.asDiagonal();
  op.hermitian = true;
  op.diagonal = true;
  return op;
}

FockOperator ladder(const FockContext& ctx, const Vec& f, LadderKind kind) {
  FockOperator op;
  switch (kind) {
    case LadderKind::annihilate:
      op.matrix = lift_fock(ctx, lowering_fock(ctx, f));
      break;
    case LadderKind::create:
      op.matrix = lift_fock(ctx, lowering_fock(ctx, f).adjoint());
      break;
    case LadderKind::field:
      op.matrix = lift_fock(ctx, field_fock(ctx, f));
      op.hermitian = true;
      break;
    case LadderKind::conjugate_field:
      op.matrix = lift_fock(ctx, field_fock(ctx, kI * f));
      op.hermitian = true;
      break;
  }
  return op;
}

FockOperator weyl(const FockContext& ctx, const Vec& g) {
  FockOperator op;
  op.matrix = lift_fock(ctx, expm_i_hermitian(field_fock(ctx, kI * g), -1.0));
  return op;
}

RVec second_quantize_diag(const FockContext& ctx, const RVec& kappa) {
  require(kappa.size() == ctx.mode_count, "second_quantize: size mismatch");
  RVec d = RVec::Zero(ctx.fock_dim());
  for (int i = 0; i < ctx.fock_dim(); ++i)
    for (int j = 0; j < ctx.mode_count; ++j)
      d[i] += ctx.basis[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
              kappa[j];
  return d;
}

FockOperator second_quantize(const FockContext& ctx, const RVec& kappa) {
  return diagonal_operator(ctx, second_quantize_diag(ctx, kappa));
}

void validate(const FockContext& ctx, const WeightSpec& spec) {
  require(spec.varpi.size() == ctx.mode_count && spec.kappa.size() == ctx.mode_count,
          "weight: per-mode arrays must match mode count");
  if (spec.kind == WeightSpec::Kind::polynomial)
    require(std::abs(spec.exponent) >= 0.5,
            "weight: polynomial exponent must satisfy |alpha| >= 1/2");
  else
    require(std::abs(spec.exponent) > 0.0 && std::abs(spec.exponent) <= 1.0,
            "weight: exponential exponent must satisfy 0 < |delta| <= 1");
  require(spec.eps >= 0.0 && spec.eps <= 1.0, "weight: eps must be in [0,1]");
  require(spec.t0 > 0.0 && spec.t >= 0.0 && spec.t <= spec.t0,
          "weight: need 0 <= t <= t0");
  for (int j = 0; j < ctx.mode_count; ++j) {
    require(spec.kappa[j] >= 0.0 && spec.varpi[j] >= 0.0,
            "weight: varpi and kappa must be nonnegative");
    require(spec.varpi[j] <= ctx.omega[j] + 1e-12,
            "weight: varpi must be dominated by omega");
  }
}

namespace {

bool varpi_zero(const WeightSpec& s) { return s.varpi.lpNorm<Eigen::Infinity>() == 0.0; }

double tau_alpha(double alpha, double t, double t0) {
  return alpha > 0.0 ? t / (2.0 * alpha) : (t - t0) / (2.0 * alpha);
}

// Y(t) = 1 + iota tau_alpha(t) + sum_j n_j v_{alpha,eps,t}(j) and dY/dt,
// evaluated over the occupation basis.
void poly_inner(const FockContext& ctx, const WeightSpec& s, double alpha, double t,
                RVec& y, RVec& ydot) {
  const double iota = varpi_zero(s) ? 0.0 : 1.0;
  const double tau = tau_alpha(alpha, t, s.t0);
  const double taudot = 1.0 / (2.0 * alpha);
  y = RVec::Constant(ctx.fock_dim(), 1.0 + iota * tau);
  ydot = RVec::Constant(ctx.fock_dim(), iota * taudot);
  for (int i = 0; i < ctx.fock_dim(); ++i) {
    for (int j = 0; j < ctx.mode_count; ++j) {
      const int n = ctx.basis[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (n == 0) continue;
      const double v = tau * s.varpi[j] + s.kappa[j];
      const double vdot = taudot * s.varpi[j];
      const double den = 1.0 + s.eps * v;
      y[i] += n * v / den;
      ydot[i] += n * vdot / (den * den);
    }
  }
}

double f_eps(double y, double eps) { return y / (1.0 + eps * y); }

}  // namespace

RVec weight_diag(const FockContext& ctx, const WeightSpec& spec) {
  validate(ctx, spec);
  RVec y, ydot, out(ctx.fock_dim());
  if (spec.kind == WeightSpec::Kind::polynomial) {
    poly_inner(ctx, spec, spec.exponent, spec.t, y, ydot);
    for (int i = 0; i < ctx.fock_dim(); ++i)
      out[i] = std::pow(f_eps(y[i], spec.eps), spec.exponent);
  } else {
    const double delta = spec.exponent;
    const double t = delta > 0.0 ? spec.t : spec.t0 - spec.t;
    poly_inner(ctx, spec, 1.0, t, y, ydot);
    for (int i = 0; i < ctx.fock_dim(); ++i)
      out[i] = std::exp(delta * f_eps(y[i], spec.eps));
  }
  return out;
}

RVec weight_rate_diag(const FockContext& ctx, const WeightSpec& spec) {
  validate(ctx, spec);
  RVec y, ydot, out(ctx.fock_dim());
  if (spec.kind == WeightSpec::Kind::polynomial) {
    poly_inner(ctx, spec, spec.exponent, spec.t, y, ydot);
    // d/dt log F_eps(Y)^alpha = alpha Ydot (1/Y - eps/(1+eps Y))
    for (int i = 0; i < ctx.fock_dim(); ++i)
      out[i] = spec.exponent * ydot[i] *
               (1.0 / y[i] - spec.eps / (1.0 + spec.eps * y[i]));
  } else {
    const double delta = spec.exponent;
    const double t = delta > 0.0 ? spec.t : spec.t0 - spec.t;
    const double sign = delta > 0.0 ? 1.0 : -1.0;  // inner time runs backwards
    poly_inner(ctx, spec, 1.0, t, y, ydot);
    for (int i = 0; i < ctx.fock_dim(); ++i) {
      const double den = 1.0 + spec.eps * y[i];
      out[i] = sign * delta * ydot[i] / (den * den);
    }
  }
  return out;
}

FockOperator weight_operator(const FockContext& ctx, const WeightSpec& spec) {
  return diagonal_operator(ctx, weight_diag(ctx, spec));
}

std::string operator_to_json(const FockContext& ctx, const FockOperator& op) {
  std::ostringstream os;
  os << "{\"dim\":" << ctx.dim() << ",\"basis\":[";
  for (std::size_t i = 0; i < ctx.basis.size(); ++i) {
    if (i) os << ",";
    os << "[";
    for (std::size_t j = 0; j < ctx.basis[i].size(); ++j) {
      if (j) os << ",";
      os << ctx.basis[i][j];
    }
    os << "]";
  }
  os << "],\"entries\":[";
  bool first = true;
  char buf[96];
  for (int r = 0; r < op.matrix.rows(); ++r) {
    for (int c = 0; c < op.matrix.cols(); ++c) {
      const Cplx z = op.matrix(r, c);
      if (std::abs(z) < 1e-15) continue;
      if (!first) os << ",";
      first = false;
      std::snprintf(buf, sizeof(buf), "[%d,%d,%.17g,%.17g]", r, c, z.real(),
                    z.imag());
      os << buf;
    }
  }
  os << "]}";
  return os.str();
}

}  // namespace fockfk
