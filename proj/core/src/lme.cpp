#include "gne/lme.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace gne::lme {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using model::ConstraintKind;
using poly::Mono;
using poly::MonomialTable;

CriticalPairSystem build_critical_system(const Gnep& g, int player) {
  const auto& lay = g.layout;
  const auto& pl = g.players[player];
  CriticalPairSystem sys;
  sys.player = player;
  sys.ni = lay.dim(player);
  sys.mi = pl.m();
  const int n = lay.total();
  sys.G.assign(sys.ni + sys.mi, std::vector<Polynomial>(sys.mi, Polynomial(n)));
  for (int c = 0; c < sys.mi; ++c) {
    const Polynomial& gc = pl.constraints[pl.kkt_index[c]].cleared;
    for (int s = 0; s < sys.ni; ++s) sys.G[s][c] = gc.derivative(lay.flat(player, s));
    sys.G[sys.ni + c][c] = gc;
  }
  sys.fhat = poly::gradient_block(pl.objective, lay, player);
  for (int l = 0; l < sys.mi; ++l) sys.fhat.push_back(RationalFunction(Polynomial(n)));
  return sys;
}

namespace {

// tau vector from (T, q) and the objective gradient: tau_j = (T fhat)_j / q
std::vector<RationalFunction> tau_from_Tq(const Gnep& g, int player,
                                          const std::vector<std::vector<Polynomial>>& T,
                                          const Polynomial& q) {
  const auto& lay = g.layout;
  const auto& pl = g.players[player];
  const int n = lay.total();
  const int ni = lay.dim(player);
  const int mi = pl.m();
  const Polynomial& N = pl.objective.num();
  const Polynomial& D = pl.objective.den();
  bool poly_obj = pl.objective.is_polynomial();
  // gradient numerators: d f / d x_s = grad_num_s / D^2
  std::vector<Polynomial> grad_num(ni, Polynomial(n));
  for (int s = 0; s < ni; ++s) {
    int v = lay.flat(player, s);
    grad_num[s] = poly_obj ? N.derivative(v) : N.derivative(v) * D - N * D.derivative(v);
    grad_num[s].prune();
  }
  Polynomial den = poly_obj ? q : q * D * D;
  std::vector<RationalFunction> tau;
  for (int j = 0; j < mi; ++j) {
    Polynomial num(n);
    for (int s = 0; s < ni; ++s) num += T[j][s] * grad_num[s];
    num.prune();
    tau.emplace_back(num, den);
  }
  return tau;
}

// +1 / -1 when the sign of q on X is known (nonnegative factors certified by
// declarations, strict guards or perfect squares), 0 when unknown
int q_sign_on_X(const Gnep& g, const Polynomial& q) {
  std::vector<Polynomial> basis = g.declared_positive;
  for (const auto& pl : g.players)
    for (const auto& c : pl.constraints)
      if (c.kind == ConstraintKind::StrictIneq && c.original.is_polynomial())
        basis.push_back(c.original.num());
  auto split = poly::split_declared_factors(q, basis);
  if (split.fully_declared) return split.constant > 0 ? 1 : -1;
  if (model::linear_sqrt(split.leftover)) {
    // leftover is a square; its zeros only relax the cleared sign conditions
    return split.constant > 0 ? 1 : -1;
  }
  auto half = model::linear_sqrt(split.leftover * split.constant);
  if (half) return 1;
  return 0;
}

bool q_positive_on_X(const Gnep& g, const Polynomial& q) { return q_sign_on_X(g, q) == 1; }

}  // namespace

std::optional<LmeResult> solve_lme_linear(const Gnep& g, int player, int degree,
                                          std::mt19937_64& rng) {
  CriticalPairSystem sys = build_critical_system(g, player);
  const int n = g.layout.total();
  const int ni = sys.ni, mi = sys.mi;
  if (mi == 0) {
    LmeResult out;
    out.q = Polynomial::constant(n, 1.0);
    out.q_positive = true;
    out.degree_used = 0;
    out.provenance = "auto-d0";
    return out;
  }
  int gdeg = 0;
  for (const auto& row : sys.G)
    for (const auto& p : row) gdeg = std::max(gdeg, p.degree());
  const auto& unk_tab = MonomialTable::get(n, degree);
  const auto& eq_tab = MonomialTable::get(n, degree + gdeg);
  const int M = unk_tab.size();
  const int ncols = (mi * (ni + mi) + 1) * M;
  const int nrows = mi * mi * eq_tab.size();
  if (static_cast<long long>(ncols) * nrows > 80'000'000LL) return std::nullopt;

  auto tvar = [&](int r, int s, int mono) { return (r * (ni + mi) + s) * M + mono; };
  const int qvar0 = mi * (ni + mi) * M;

  MatrixXd A = MatrixXd::Zero(nrows, ncols);
  auto row_of = [&](int r, int c, int mono) { return (r * mi + c) * eq_tab.size() + mono; };
  for (int r = 0; r < mi; ++r)
    for (int c = 0; c < mi; ++c) {
      for (int s = 0; s < ni + mi; ++s) {
        const Polynomial& G = sys.G[s][c];
        if (G.is_zero()) continue;
        for (const auto& [gm, gc] : G.sorted_terms())
          for (int mu = 0; mu < M; ++mu)
            A(row_of(r, c, eq_tab.index(poly::mono_mul(gm, unk_tab.mono(mu)))),
              tvar(r, s, mu)) += gc;
      }
      if (r == c)
        for (int mu = 0; mu < M; ++mu) A(row_of(r, c, mu), qvar0 + mu) -= 1.0;
    }

  Eigen::BDCSVD<MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-10 * std::max(smax, 1.0)) ++rank;
  int nullity = ncols - rank;
  if (nullity == 0) return std::nullopt;
  MatrixXd N = svd.matrixV().rightCols(nullity);

  std::normal_distribution<double> gsn(0.0, 1.0);
  VectorXd v;
  double qnorm = 0.0;
  for (int attempt = 0; attempt < 4 && qnorm < 1e-9; ++attempt) {
    VectorXd ell = VectorXd::Zero(ncols);
    for (int mu = 0; mu < M; ++mu) ell[qvar0 + mu] = gsn(rng);
    v = N * (N.transpose() * ell);
    qnorm = v.segment(qvar0, M).norm();
  }
  if (qnorm < 1e-9) return std::nullopt;
  // rescale so the largest q coefficient is exactly one
  int imax = 0;
  for (int mu = 1; mu < M; ++mu)
    if (std::abs(v[qvar0 + mu]) > std::abs(v[qvar0 + imax])) imax = mu;
  v /= v[qvar0 + imax];

  LmeResult out;
  out.T.assign(mi, std::vector<Polynomial>(ni + mi, Polynomial(n)));
  for (int r = 0; r < mi; ++r)
    for (int s = 0; s < ni + mi; ++s) {
      Polynomial p(n);
      for (int mu = 0; mu < M; ++mu)
        if (v[tvar(r, s, mu)] != 0.0) p.add_term(unk_tab.mono(mu), v[tvar(r, s, mu)]);
      p.prune(1e-11);
      out.T[r][s] = p;
    }
  Polynomial q(n);
  for (int mu = 0; mu < M; ++mu)
    if (v[qvar0 + mu] != 0.0) q.add_term(unk_tab.mono(mu), v[qvar0 + mu]);
  q.prune(1e-11);
  if (q.is_zero()) return std::nullopt;
  out.q = q;
  out.q_positive = q_positive_on_X(g, q);
  out.degree_used = degree;
  out.provenance = "auto-d" + std::to_string(degree);
  // the identity must hold exactly; reject noisy nullspace vectors
  for (int r = 0; r < mi; ++r)
    for (int c = 0; c < mi; ++c) {
      Polynomial acc = r == c ? -q : Polynomial(n);
      for (int s = 0; s < ni + mi; ++s) acc += out.T[r][s] * sys.G[s][c];
      double scale = std::max(1.0, q.max_abs_coeff());
      if (acc.max_abs_coeff() > 1e-7 * scale) return std::nullopt;
    }
  out.tau = tau_from_Tq(g, player, out.T, out.q);
  return out;
}

LmeResult lme_auto(const Gnep& g, int player, int max_degree, std::mt19937_64& rng) {
  for (int d = 0; d <= max_degree; ++d) {
    auto r = solve_lme_linear(g, player, d, rng);
    if (r) return *r;
  }
  throw LmeNotFound("no multiplier expression up to degree " + std::to_string(max_degree) +
                    " for player " + std::to_string(player + 1));
}

LmeResult lme_box(const Gnep& g, int player) {
  auto shape = model::match_box(g, player);
  if (!shape) throw TemplateMismatch("player constraints are not a box");
  const auto& lay = g.layout;
  const int n = lay.total();
  const int ni = lay.dim(player);
  const int mi = 2 * ni;
  std::vector<Polynomial> a(ni), b(ni), width(ni);
  for (int j = 0; j < ni; ++j) {
    a[j] = shape->lower[j].num();
    b[j] = shape->upper[j].num();
    width[j] = b[j] - a[j];
  }
  Polynomial q = Polynomial::constant(n, 1.0);
  for (int j = 0; j < ni; ++j) q = q * width[j];
  std::vector<Polynomial> others(ni, Polynomial::constant(n, 1.0));
  for (int j = 0; j < ni; ++j)
    for (int l = 0; l < ni; ++l)
      if (l != j) others[j] = others[j] * width[l];

  LmeResult out;
  out.T.assign(mi, std::vector<Polynomial>(ni + mi, Polynomial(n)));
  for (int j = 0; j < ni; ++j) {
    int xj = lay.flat(player, j);
    Polynomial xpoly = Polynomial::variable(n, xj);
    int lo = shape->lower_slot[j], hi = shape->upper_slot[j];
    double slo = shape->lower_scale[j], shi = shape->upper_scale[j];
    // row of the lower-bound multiplier
    out.T[lo][j] = (b[j] - xpoly) * others[j] * (1.0 / slo);
    out.T[lo][ni + lo] = others[j] * (1.0 / slo);
    out.T[lo][ni + hi] = others[j] * (1.0 / slo);
    // row of the upper-bound multiplier
    out.T[hi][j] = (a[j] - xpoly) * others[j] * (1.0 / shi);
    out.T[hi][ni + lo] = others[j] * (1.0 / shi);
    out.T[hi][ni + hi] = others[j] * (1.0 / shi);
  }
  out.q = q;
  out.q_positive = q_positive_on_X(g, q);
  out.provenance = "box";
  out.tau = tau_from_Tq(g, player, out.T, out.q);
  return out;
}

LmeResult lme_simplex(const Gnep& g, int player) {
  auto shape = model::match_simplex(g, player);
  if (!shape) throw TemplateMismatch("player constraints are not a simplex");
  const auto& lay = g.layout;
  const int n = lay.total();
  const int ni = lay.dim(player);
  const int mi = ni + 1;
  Polynomial u = shape->cap_u.num();
  std::vector<Polynomial> l(ni);
  Polynomial q = u;
  for (int j = 0; j < ni; ++j) {
    l[j] = shape->lower[j].num();
    q -= l[j];
  }
  q.prune();
  LmeResult out;
  out.T.assign(mi, std::vector<Polynomial>(ni + mi, Polynomial(n)));
  int cap = shape->cap_slot;
  double scap = shape->cap_scale;
  for (int s = 0; s < ni; ++s) {
    Polynomial xs = Polynomial::variable(n, lay.flat(player, s));
    out.T[cap][s] = (l[s] - xs) * (1.0 / scap);
  }
  for (int c = 0; c < mi; ++c) out.T[cap][ni + c] = Polynomial::constant(n, 1.0 / scap);
  for (int j = 0; j < ni; ++j) {
    int slot = shape->lower_slot[j];
    double sl = shape->lower_scale[j];
    for (int s = 0; s < ni; ++s) {
      Polynomial xs = Polynomial::variable(n, lay.flat(player, s));
      Polynomial entry = (l[s] - xs) * (1.0 / sl);
      if (s == j) entry += q * (1.0 / sl);
      entry.prune();
      out.T[slot][s] = entry;
    }
    for (int c = 0; c < mi; ++c) out.T[slot][ni + c] = Polynomial::constant(n, 1.0 / sl);
  }
  out.q = q;
  out.q_positive = q_positive_on_X(g, q);
  out.provenance = "simplex";
  out.tau = tau_from_Tq(g, player, out.T, out.q);
  return out;
}

LmeResult lme_ball(const Gnep& g, int player) {
  auto shape = model::match_ball(g, player);
  if (!shape) throw TemplateMismatch("player constraints are not ball shaped");
  const auto& lay = g.layout;
  const int n = lay.total();
  const int ni = lay.dim(player);
  LmeResult out;
  if (!shape->annulus) {
    const int mi = 1;
    double k = shape->hom_degree;
    out.T.assign(mi, std::vector<Polynomial>(ni + mi, Polynomial(n)));
    for (int s = 0; s < ni; ++s)
      out.T[0][s] =
          Polynomial::variable(n, lay.flat(player, s), -1.0 / shape->upper_scale);
    out.T[0][ni] = Polynomial::constant(n, k / shape->upper_scale);
    out.q = shape->R * k;
  } else {
    if (!shape->euclidean)
      throw TemplateMismatch("annulus multiplier template needs ||x_i||^2 shape");
    const int mi = 2;
    out.T.assign(mi, std::vector<Polynomial>(ni + mi, Polynomial(n)));
    int lo = shape->lower_slot, hi = shape->upper_slot;
    double sl = shape->lower_scale, sh = shape->upper_scale;
    Polynomial w1 = Polynomial::variable(n, lay.flat(player, 0));
    for (int s = 0; s < ni; ++s) {
      Polynomial ws = Polynomial::variable(n, lay.flat(player, s));
      Polynomial base = w1 * ws * -1.0;
      out.T[lo][s] = base * (1.0 / sl);
      out.T[hi][s] = base * (1.0 / sh);
    }
    Mono e1(n, 0);
    e1[lay.flat(player, 0)] = 1;
    out.T[lo][0] += shape->R * (1.0 / sl);
    out.T[hi][0] += shape->r_low * (1.0 / sh);
    out.T[lo][ni + lo] = w1 * (2.0 / sl);
    out.T[lo][ni + hi] = w1 * (2.0 / sl);
    out.T[hi][ni + lo] = w1 * (2.0 / sh);
    out.T[hi][ni + hi] = w1 * (2.0 / sh);
    out.q = w1 * (shape->R - shape->r_low) * 2.0;
  }
  out.q_positive = q_positive_on_X(g, out.q);
  out.provenance = "ball";
  out.tau = tau_from_Tq(g, player, out.T, out.q);
  return out;
}

LmeResult lme_explicit(const Gnep& g, int player) {
  const auto& lay = g.layout;
  const auto& pl = g.players[player];
  const int n = lay.total();
  const int ni = lay.dim(player);
  const int mi = pl.m();
  const auto& exprs = pl.lme.exprs;
  LmeResult out;
  out.provenance = "explicit";
  if (exprs.size() == static_cast<std::size_t>(mi) * (ni + mi) + 1) {
    out.T.assign(mi, std::vector<Polynomial>(ni + mi, Polynomial(n)));
    for (int r = 0; r < mi; ++r)
      for (int s = 0; s < ni + mi; ++s) {
        const RationalFunction& e = exprs[r * (ni + mi) + s];
        if (!e.is_polynomial()) throw LmeError("explicit T entries must be polynomials");
        out.T[r][s] = e.num();
      }
    const RationalFunction& qe = exprs.back();
    if (!qe.is_polynomial()) throw LmeError("explicit q must be a polynomial");
    out.q = qe.num();
    CriticalPairSystem sys = build_critical_system(g, player);
    for (int r = 0; r < mi; ++r)
      for (int c = 0; c < mi; ++c) {
        Polynomial acc = r == c ? -out.q : Polynomial(n);
        for (int s = 0; s < ni + mi; ++s) acc += out.T[r][s] * sys.G[s][c];
        if (acc.max_abs_coeff() > 1e-8 * std::max(1.0, out.q.max_abs_coeff()))
          throw LmeError("explicit (T, q) fails the identity T G = q I");
      }
    out.q_positive = q_positive_on_X(g, out.q);
    out.tau = tau_from_Tq(g, player, out.T, out.q);
    return out;
  }
  if (exprs.size() == static_cast<std::size_t>(mi)) {
    out.tau = exprs;
    out.q = Polynomial::constant(n, 1.0);
    out.q_positive = false;
    return out;
  }
  throw LmeError("explicit lme has the wrong number of expressions");
}

LmeResult build_lme(const Gnep& g, int player, std::mt19937_64& rng) {
  using K = model::LmeSpec::Kind;
  switch (g.players[player].lme.kind) {
    case K::Auto: return lme_auto(g, player, g.config.lme_max_degree, rng);
    case K::Box: return lme_box(g, player);
    case K::Simplex: return lme_simplex(g, player);
    case K::Ball: return lme_ball(g, player);
    case K::Explicit: return lme_explicit(g, player);
  }
  throw LmeError("unreachable lme kind");
}

double identity_residual(const Gnep& g, int player, const LmeResult& r, int npoints,
                         std::mt19937_64& rng) {
  if (r.T.empty()) return 0.0;  // tau-only results carry no identity data
  CriticalPairSystem sys = build_critical_system(g, player);
  const int n = g.layout.total();
  std::normal_distribution<double> gd(0.0, 1.0);
  double worst = 0.0;
  std::vector<double> pt(n);
  for (int p = 0; p < npoints; ++p) {
    for (auto& v : pt) v = gd(rng);
    double scale = std::max(1.0, std::abs(r.q.eval(pt)));
    for (int i = 0; i < sys.mi; ++i)
      for (int c = 0; c < sys.mi; ++c) {
        double acc = i == c ? -r.q.eval(pt) : 0.0;
        for (int s = 0; s < sys.ni + sys.mi; ++s)
          acc += r.T[i][s].eval(pt) * sys.G[s][c].eval(pt);
        worst = std::max(worst, std::abs(acc) / scale);
      }
  }
  return worst;
}

KktPieces build_kkt_pieces(const Gnep& g, int player, const LmeResult& lme) {
  const auto& lay = g.layout;
  const auto& pl = g.players[player];
  const int n = lay.total();
  const int ni = lay.dim(player);
  const int mi = pl.m();
  KktPieces out;
  std::vector<Polynomial> basis = g.declared_positive;
  for (const auto& p : g.players)
    for (const auto& c : p.constraints)
      if (c.kind == ConstraintKind::StrictIneq && c.original.is_polynomial())
        basis.push_back(c.original.num());

  const Polynomial& N = pl.objective.num();
  const Polynomial& D = pl.objective.den();
  bool poly_obj = pl.objective.is_polynomial();

  if (!lme.T.empty() || mi == 0) {
    // common denominator q * D^2: multiply the whole system through by it
    std::vector<Polynomial> grad_num(ni, Polynomial(n));
    for (int s = 0; s < ni; ++s) {
      int v = lay.flat(player, s);
      grad_num[s] = poly_obj ? N.derivative(v) : N.derivative(v) * D - N * D.derivative(v);
      grad_num[s].prune();
    }
    std::vector<Polynomial> tau_num(mi, Polynomial(n));
    for (int j = 0; j < mi; ++j) {
      for (int s = 0; s < ni; ++s) tau_num[j] += lme.T[j][s] * grad_num[s];
      tau_num[j].prune();
    }
    for (int s = 0; s < ni; ++s) {
      Polynomial st = lme.q * grad_num[s];
      for (int j = 0; j < mi; ++j) {
        const Polynomial& gj = pl.constraints[pl.kkt_index[j]].cleared;
        st -= tau_num[j] * gj.derivative(lay.flat(player, s));
      }
      st.prune(1e-12);
      if (!st.is_zero()) out.stationarity.push_back(st);
    }
    for (int j = 0; j < mi; ++j) {
      const auto& cons = pl.constraints[pl.kkt_index[j]];
      Polynomial comp = tau_num[j] * cons.cleared;
      comp.prune(1e-12);
      if (!comp.is_zero()) out.complementarity.push_back(comp);
      if (cons.kind == ConstraintKind::WeakIneq) {
        // tau_j >= 0 with tau_j = tau_num_j / (q D^2); D^2 is a square, so
        // the sign reduces to tau_num_j * q, or +-tau_num_j when q has a
        // known sign on X
        int qs = q_sign_on_X(g, lme.q);
        Polynomial sign = qs == 1    ? tau_num[j]
                          : qs == -1 ? -tau_num[j]
                                     : tau_num[j] * lme.q;
        sign.prune(1e-12);
        if (!sign.is_zero()) out.sign_conditions.push_back(sign);
      }
    }
    return out;
  }

  // tau given directly as rational functions: clear each piece separately
  for (int s = 0; s < ni; ++s) {
    int v = lay.flat(player, s);
    RationalFunction st = pl.objective.derivative(v);
    for (int j = 0; j < mi; ++j) {
      const Polynomial& gj = pl.constraints[pl.kkt_index[j]].cleared;
      st = st - lme.tau[j] * RationalFunction(gj.derivative(v));
    }
    auto cleared = poly::clear_denominators(st, poly::Relation::Eq, basis);
    cleared.poly.prune(1e-12);
    if (!cleared.poly.is_zero()) out.stationarity.push_back(cleared.poly);
  }
  for (int j = 0; j < mi; ++j) {
    const auto& cons = pl.constraints[pl.kkt_index[j]];
    auto comp = poly::clear_denominators(lme.tau[j] * RationalFunction(cons.cleared),
                                         poly::Relation::Eq, basis);
    comp.poly.prune(1e-12);
    if (!comp.poly.is_zero()) out.complementarity.push_back(comp.poly);
    if (cons.kind == ConstraintKind::WeakIneq) {
      auto sign = poly::clear_denominators(lme.tau[j], poly::Relation::Ge, basis);
      sign.poly.prune(1e-12);
      if (!sign.poly.is_zero()) out.sign_conditions.push_back(sign.poly);
    }
  }
  return out;
}

}  // namespace gne::lme
