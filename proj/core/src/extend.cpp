#include "gne/extend.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "gne/expr.hpp"

namespace gne::extend {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using model::ConstraintKind;
using poly::Mono;
using poly::MonomialTable;

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::BoxForm: return "box";
    case Provenance::SimplexForm: return "simplex";
    case Provenance::BallForm: return "ball";
    case Provenance::Interpolated: return "interpolated";
    case Provenance::SosCertified: return "sos";
    case Provenance::Identity: return "identity";
    case Provenance::Explicit: return "explicit";
  }
  return "?";
}

double anchor_error(const Extension& e) {
  std::span<const double> pt(e.u.data(), static_cast<std::size_t>(e.u.size()));
  double err = 0.0;
  for (std::size_t j = 0; j < e.p.size(); ++j)
    err = std::max(err, std::abs(e.p[j].eval(pt) - e.v[j]));
  return err;
}

namespace {

constexpr double kAnchorTol = 1e-6;

double eval_at(const Polynomial& p, const VectorXd& x) {
  return p.eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

Extension make(const Gnep& g, const Triple& t, std::vector<RationalFunction> p,
               Provenance prov, std::string note = {}) {
  Extension e;
  e.p = std::move(p);
  e.provenance = prov;
  e.u = t.u;
  e.player = t.player;
  e.v = t.v;
  e.note = std::move(note);
  double err = anchor_error(e);
  if (err > 1e-8 * (1.0 + t.v.norm()))
    throw ExtendError("extension anchor error " + std::to_string(err));
  (void)g;
  return e;
}

}  // namespace

Extension extend_box(const Gnep& g, const Triple& t) {
  auto shape = model::match_box(g, t.player);
  if (!shape) throw ExtendError("player constraints are not a box");
  const int ni = g.layout.dim(t.player);
  std::vector<RationalFunction> p;
  for (int j = 0; j < ni; ++j) {
    double aj = eval_at(shape->lower[j].num(), t.u);
    double bj = eval_at(shape->upper[j].num(), t.u);
    if (t.v[j] < aj - kAnchorTol * (1 + std::abs(aj)) ||
        t.v[j] > bj + kAnchorTol * (1 + std::abs(bj)))
      throw AnchorInfeasible("anchor value outside the box");
    double width = bj - aj;
    double mu = width > 1e-9 ? (bj - t.v[j]) / width : 0.0;
    mu = std::clamp(mu, 0.0, 1.0);
    Polynomial comp = shape->lower[j].num() * mu + shape->upper[j].num() * (1.0 - mu);
    comp.prune();
    p.emplace_back(comp);
  }
  return make(g, t, std::move(p), Provenance::BoxForm);
}

Extension extend_simplex(const Gnep& g, const Triple& t) {
  auto shape = model::match_simplex(g, t.player);
  if (!shape) throw ExtendError("player constraints are not a simplex");
  const int ni = g.layout.dim(t.player);
  Polynomial width = shape->cap_u.num();
  for (int j = 0; j < ni; ++j) width -= shape->lower[j].num();
  width.prune();
  double wu = eval_at(width, t.u);
  double cap = eval_at(shape->cap_u.num(), t.u);
  double sum_v = 0.0;
  for (int j = 0; j < ni; ++j) {
    double lj = eval_at(shape->lower[j].num(), t.u);
    if (t.v[j] < lj - kAnchorTol * (1 + std::abs(lj)))
      throw AnchorInfeasible("anchor value below a simplex lower bound");
    sum_v += t.v[j];
  }
  if (sum_v > cap + kAnchorTol * (1 + std::abs(cap)))
    throw AnchorInfeasible("anchor value above the simplex cap");
  std::vector<RationalFunction> p;
  for (int j = 0; j < ni; ++j) {
    double lj = eval_at(shape->lower[j].num(), t.u);
    double mu = wu > 1e-9 ? (t.v[j] - lj) / wu : 0.0;
    mu = std::clamp(mu, 0.0, 1.0);
    Polynomial comp = width * mu + shape->lower[j].num();
    comp.prune();
    p.emplace_back(comp);
  }
  return make(g, t, std::move(p), Provenance::SimplexForm);
}

Extension extend_ball(const Gnep& g, const Triple& t) {
  auto shape = model::match_ball(g, t.player);
  if (!shape || !shape->euclidean || shape->annulus)
    throw ExtendError("ball extension needs ||x_i||^2 <= R(x_-i)^2");
  auto root = model::linear_sqrt(shape->R);
  if (!root) throw ExtendError("ball radius is not a polynomial square");
  const int ni = g.layout.dim(t.player);
  double Ru = eval_at(*root, t.u);
  double vn = t.v.norm();
  if (vn * vn > eval_at(shape->R, t.u) + kAnchorTol * (1 + std::abs(Ru)))
    throw AnchorInfeasible("anchor value outside the ball");
  // signed ratio keeps the anchor exact when R(u) < 0
  double mu = std::abs(Ru) > 1e-9 ? vn / Ru : 0.0;
  std::vector<double> s(ni, 1.0 / std::sqrt(static_cast<double>(ni)));
  if (vn > 1e-12)
    for (int j = 0; j < ni; ++j) s[j] = t.v[j] / vn;
  std::vector<RationalFunction> p;
  for (int j = 0; j < ni; ++j) {
    Polynomial comp = *root * (s[j] * mu);
    comp.prune();
    p.emplace_back(comp);
  }
  return make(g, t, std::move(p), Provenance::BallForm);
}

Extension extend_constant(const Gnep& g, const Triple& t) {
  const auto& lay = g.layout;
  const int n = lay.total();
  std::vector<RationalFunction> p;
  for (int j = 0; j < lay.dim(t.player); ++j)
    p.push_back(RationalFunction::constant(n, t.v[j]));
  // feasibility of the constant map at the anchor
  VectorXd z = t.u;
  for (int j = 0; j < lay.dim(t.player); ++j) z[lay.flat(t.player, j)] = t.v[j];
  for (const auto& c : g.players[t.player].constraints) {
    double val = eval_at(c.cleared, z);
    if (c.kind == ConstraintKind::Equality && std::abs(val) > kAnchorTol)
      throw AnchorInfeasible("constant extension violates an equality");
    if (c.kind != ConstraintKind::Equality && val < -kAnchorTol)
      throw AnchorInfeasible("constant extension violates an inequality");
  }
  return make(g, t, std::move(p), Provenance::Identity, "constant map (own feasible set)");
}

namespace {

// substitutes x_i by the extension images inside a cleared constraint
Polynomial compose_player(const Gnep& g, int player, const Polynomial& f,
                          const std::vector<Polynomial>& images) {
  const auto& lay = g.layout;
  const int n = lay.total();
  std::vector<Polynomial> full;
  full.reserve(n);
  for (int v = 0; v < n; ++v) {
    if (lay.in_block(v, player)) {
      auto [pl, j] = lay.split(v);
      full.push_back(images[j]);
    } else {
      full.push_back(Polynomial::variable(n, v));
    }
  }
  return f.compose(full);
}

bool certify_nonneg(const Polynomial& f, const KktDescription& kkt,
                    const sdp::SdpOptions& opts) {
  int deg = std::max(f.degree(), 0);
  int two_l = deg + (deg & 1);
  for (int bump = 0; bump <= 2; bump += 2) {
    auto cert = momsos::qmod_membership(f, kkt.eqs, kkt.ineqs, two_l + bump, opts);
    if (cert) return true;
  }
  return false;
}

}  // namespace

Extension extend_interpolate(const Gnep& g, const Triple& t,
                             const std::vector<VectorXd>& nodes, const KktDescription& kkt,
                             int degree_cap, const sdp::SdpOptions& sdp_opts) {
  const auto& lay = g.layout;
  const int n = lay.total();
  const int ni = lay.dim(t.player);
  // interpolation targets: p(u) = v; p(z) = z_i elsewhere
  std::vector<VectorXd> pts;
  std::vector<VectorXd> vals;
  pts.push_back(t.u);
  vals.push_back(t.v);
  for (const auto& z : nodes) {
    if ((z - t.u).norm() < 1e-7 * (1.0 + t.u.norm())) continue;
    VectorXd zi(ni);
    for (int j = 0; j < ni; ++j) zi[j] = z[lay.flat(t.player, j)];
    pts.push_back(z);
    vals.push_back(zi);
  }
  for (int deg = 1; deg <= degree_cap; ++deg) {
    const auto& tab = MonomialTable::get(n, deg);
    MatrixXd A(pts.size(), tab.size());
    for (std::size_t r = 0; r < pts.size(); ++r)
      for (int c = 0; c < tab.size(); ++c) {
        double v = 1.0;
        const Mono& m = tab.mono(c);
        for (int vv = 0; vv < n; ++vv)
          for (int e = 0; e < m[vv]; ++e) v *= pts[r][vv];
        A(static_cast<int>(r), c) = v;
      }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    std::vector<Polynomial> comps;
    bool consistent = true;
    for (int j = 0; j < ni && consistent; ++j) {
      VectorXd b(pts.size());
      for (std::size_t r = 0; r < pts.size(); ++r) b[static_cast<int>(r)] = vals[r][j];
      VectorXd coef = qr.solve(b);
      if ((A * coef - b).norm() > 1e-9 * (1.0 + b.norm())) {
        consistent = false;
        break;
      }
      Polynomial p(n);
      for (int c = 0; c < tab.size(); ++c)
        if (coef[c] != 0.0) p.add_term(tab.mono(c), coef[c]);
      p.prune(1e-12);
      comps.push_back(p);
    }
    if (!consistent) continue;
    // membership validation of feasibility over the kkt description
    bool valid = true;
    for (const auto& c : g.players[t.player].constraints) {
      Polynomial comp = compose_player(g, t.player, c.cleared, comps);
      comp.prune(1e-12);
      if (c.kind == ConstraintKind::Equality) {
        valid = certify_nonneg(comp, kkt, sdp_opts) && certify_nonneg(-comp, kkt, sdp_opts);
      } else if (c.kind == ConstraintKind::StrictIneq) {
        Polynomial shifted =
            comp - Polynomial::constant(n, 1e-6 * std::max(1.0, comp.max_abs_coeff()));
        valid = certify_nonneg(shifted, kkt, sdp_opts);
      } else {
        valid = certify_nonneg(comp, kkt, sdp_opts);
      }
      if (!valid) break;
    }
    if (!valid)
      throw ExtensionUnavailable("interpolant failed the feasibility certificate");
    std::vector<RationalFunction> p;
    for (auto& c : comps) p.emplace_back(std::move(c));
    return make(g, t, std::move(p), Provenance::Interpolated,
                "degree " + std::to_string(deg) + " through " + std::to_string(pts.size()) +
                    " nodes");
  }
  throw ExtensionUnavailable("interpolation inconsistent up to the degree cap");
}

Extension extend_sos(const Gnep& g, const Triple& t, const KktDescription& kkt,
                     int half_degree, const Polynomial& h, const sdp::SdpOptions& sdp_opts) {
  const auto& lay = g.layout;
  const int n = lay.total();
  const int ni = lay.dim(t.player);
  const int player = t.player;
  const auto& pl = g.players[player];
  const int two_l = 2 * half_degree;

  // constraints must be linear in the player's own block
  struct LinForm {
    Polynomial g0;
    std::vector<Polynomial> gs;  // coefficient of x_{i,s}
    ConstraintKind kind;
  };
  std::vector<LinForm> forms;
  std::vector<int> block;
  for (int j = 0; j < ni; ++j) block.push_back(lay.flat(player, j));
  for (const auto& c : pl.constraints) {
    LinForm lf;
    lf.kind = c.kind;
    lf.g0 = Polynomial(n);
    lf.gs.assign(ni, Polynomial(n));
    for (const auto& [m, coef] : c.cleared.terms()) {
      int bdeg = 0, coord = -1;
      for (int j = 0; j < ni; ++j) {
        bdeg += m[block[j]];
        if (m[block[j]] > 0) coord = j;
      }
      if (bdeg == 0) {
        lf.g0.add_term(m, coef);
      } else if (bdeg == 1) {
        Mono stripped = m;
        stripped[block[coord]] -= 1;
        lf.gs[coord].add_term(stripped, coef);
      } else {
        throw ExtendError("constraint nonlinear in the player's strategy");
      }
    }
    forms.push_back(std::move(lf));
  }

  const auto& qtab = MonomialTable::get(n, two_l);
  // matching table must cover h * g(q): bound its degree
  int hdeg = std::max(h.degree(), 0);
  int gdeg = 0;
  for (const auto& lf : forms) {
    gdeg = std::max(gdeg, lf.g0.degree());
    for (const auto& gs : lf.gs) gdeg = std::max(gdeg, gs.degree());
  }
  const int big = std::max(two_l, hdeg + gdeg + two_l);
  const auto& btab = MonomialTable::get(n, big);

  // variable layout
  int nv = 0;
  const int q0 = nv;
  nv += ni * qtab.size();
  std::vector<int> mu_var(forms.size(), -1);
  for (std::size_t j = 0; j < forms.size(); ++j)
    if (forms[j].kind != ConstraintKind::Equality) mu_var[j] = nv++;
  struct GramBlock {
    int half_deg, side, var0;
    const Polynomial* weight;
    int form;  // membership j it belongs to
  };
  struct IdealVar {
    int var0, size, eq, form;
  };
  std::vector<GramBlock> grams;
  std::vector<IdealVar> ideals;
  auto tri = [](int side, int r, int c) { return r * side - r * (r - 1) / 2 + (c - r); };
  for (std::size_t j = 0; j < forms.size(); ++j) {
    if (forms[j].kind == ConstraintKind::Equality) continue;
    for (std::size_t e = 0; e < kkt.eqs.size(); ++e) {
      int de = std::max(kkt.eqs[e].degree(), 0);
      if (de > two_l || kkt.eqs[e].is_zero()) continue;
      IdealVar iv{nv, MonomialTable::get(n, two_l - de).size(), static_cast<int>(e),
                  static_cast<int>(j)};
      nv += iv.size;
      ideals.push_back(iv);
    }
    GramBlock g0{half_degree, MonomialTable::get(n, half_degree).size(), nv, nullptr,
                 static_cast<int>(j)};
    nv += g0.side * (g0.side + 1) / 2;
    grams.push_back(g0);
    for (const auto& w : kkt.ineqs) {
      int dg = std::max(w.degree(), 0);
      int hd = half_degree - (dg + 1) / 2;
      if (dg > two_l || hd < 0 || w.is_zero()) continue;
      GramBlock gb{hd, MonomialTable::get(n, hd).size(), nv, &w, static_cast<int>(j)};
      nv += gb.side * (gb.side + 1) / 2;
      grams.push_back(gb);
    }
  }

  sdp::SdpProblem prob;
  prob.nvars = nv;
  prob.c.setZero(nv);
  for (const auto& gb : grams)
    for (int d = 0; d < gb.side; ++d) prob.c[gb.var0 + tri(gb.side, d, d)] = 1.0;
  for (const auto& gb : grams) {
    sdp::BlockLMI blk;
    blk.side = gb.side;
    blk.coef.resize(nv);
    for (int r = 0; r < gb.side; ++r)
      for (int c = r; c < gb.side; ++c) {
        int var = gb.var0 + tri(gb.side, r, c);
        blk.coef[var].push_back({r, c, 1.0});
        if (r != c) blk.coef[var].push_back({c, r, 1.0});
      }
    prob.blocks.push_back(std::move(blk));
  }
  // mu sign blocks: mu_j >= 0 weak, mu_j >= eps strict
  for (std::size_t j = 0; j < forms.size(); ++j) {
    if (mu_var[j] < 0) continue;
    sdp::BlockLMI blk;
    blk.side = 1;
    blk.coef.resize(nv);
    blk.coef[mu_var[j]].push_back({0, 0, 1.0});
    if (forms[j].kind == ConstraintKind::StrictIneq)
      blk.constant.push_back({0, 0, -1e-6});
    prob.blocks.push_back(std::move(blk));
  }

  std::vector<std::map<int, double>> rows;
  std::vector<double> rhs;
  auto new_row = [&]() -> std::map<int, double>& {
    rows.emplace_back();
    rhs.push_back(0.0);
    return rows.back();
  };

  // anchor q(u) = h(u) v
  double hu = eval_at(h, t.u);
  if (std::abs(hu) < 1e-10) throw ExtendError("sos denominator vanishes at the anchor");
  for (int s = 0; s < ni; ++s) {
    auto& row = new_row();
    for (int c = 0; c < qtab.size(); ++c) {
      double v = 1.0;
      const Mono& m = qtab.mono(c);
      for (int vv = 0; vv < n; ++vv)
        for (int e = 0; e < m[vv]; ++e) v *= t.u[vv];
      row[q0 + s * qtab.size() + c] += v;
    }
    rhs.back() = hu * t.v[s];
  }

  // per-constraint identities: membership rows for inequalities, zero rows
  // for equalities, over the big matching table
  for (std::size_t j = 0; j < forms.size(); ++j) {
    const auto& lf = forms[j];
    // coefficient map of h*g0 and of h*gs (per s)
    Polynomial hg0 = h * lf.g0;
    std::vector<Polynomial> hgs;
    for (int s = 0; s < ni; ++s) hgs.push_back(h * lf.gs[s]);
    std::vector<std::map<int, double>> local(btab.size());
    for (const auto& [m, coef] : hg0.sorted_terms()) local[btab.index(m)][-1] += coef;
    for (int s = 0; s < ni; ++s)
      for (const auto& [gm, gc] : hgs[s].sorted_terms())
        for (int c = 0; c < qtab.size(); ++c)
          local[btab.index(poly::mono_mul(gm, qtab.mono(c)))][q0 + s * qtab.size() + c] += gc;
    // subtract certificate side for inequality memberships
    if (lf.kind == ConstraintKind::Equality) {
      for (int i = 0; i < btab.size(); ++i) {
        if (local[i].empty()) continue;
        auto& row = new_row();
        for (const auto& [var, c] : local[i]) {
          if (var == -1)
            rhs.back() -= c;
          else
            row[var] += c;
        }
        if (row.empty() && std::abs(rhs.back()) < 1e-14) {
          rows.pop_back();
          rhs.pop_back();
        }
      }
      continue;
    }
    // h g(q) - mu_j - sum p_e h_e - sigma0 - sum sigma_l g_l = 0
    Mono unit(n, 0);
    local[btab.index(unit)][mu_var[j]] -= 1.0;
    for (const auto& iv : ideals) {
      if (iv.form != static_cast<int>(j)) continue;
      const auto& tb = MonomialTable::get(n, two_l - std::max(kkt.eqs[iv.eq].degree(), 0));
      for (int ci = 0; ci < tb.size(); ++ci)
        for (const auto& [m, c] : kkt.eqs[iv.eq].sorted_terms())
          local[btab.index(poly::mono_mul(tb.mono(ci), m))][iv.var0 + ci] -= c;
    }
    for (const auto& gb : grams) {
      if (gb.form != static_cast<int>(j)) continue;
      const auto& basis = MonomialTable::get(n, gb.half_deg);
      std::vector<std::pair<Mono, double>> wterms;
      if (gb.weight)
        wterms = gb.weight->sorted_terms();
      else
        wterms = {{Mono(n, 0), 1.0}};
      for (int r = 0; r < gb.side; ++r)
        for (int c = r; c < gb.side; ++c) {
          int var = gb.var0 + tri(gb.side, r, c);
          double mult = r == c ? 1.0 : 2.0;
          Mono bm = poly::mono_mul(basis.mono(r), basis.mono(c));
          for (const auto& [m, cc] : wterms)
            local[btab.index(poly::mono_mul(bm, m))][var] -= mult * cc;
        }
    }
    for (int i = 0; i < btab.size(); ++i) {
      if (local[i].empty()) continue;
      auto& row = new_row();
      for (const auto& [var, c] : local[i]) {
        if (var == -1)
          rhs.back() -= c;
        else
          row[var] += c;
      }
      if (row.empty() && std::abs(rhs.back()) < 1e-14) {
        rows.pop_back();
        rhs.pop_back();
      } else if (row.empty()) {
        throw ExtensionUnavailable("sos system degree overflow");
      }
    }
  }

  prob.eq_rhs.resize(static_cast<int>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    sdp::SparseRow sr;
    for (const auto& [var, c] : rows[r])
      if (c != 0.0) sr.terms.emplace_back(var, c);
    prob.eq_rows.push_back(std::move(sr));
    prob.eq_rhs[static_cast<int>(r)] = rhs[r];
  }

  auto sol = sdp::solve_sdp(prob, sdp_opts);
  if (sol.status == sdp::SdpStatus::PrimalInfeasible ||
      sol.status == sdp::SdpStatus::DualInfeasible || sol.x.size() != nv ||
      !sol.x.allFinite())
    throw ExtensionUnavailable("sos feasibility system not solved at this degree");

  std::vector<Polynomial> qs(ni, Polynomial(n));
  for (int s = 0; s < ni; ++s) {
    for (int c = 0; c < qtab.size(); ++c) {
      double v = sol.x[q0 + s * qtab.size() + c];
      if (v != 0.0) qs[s].add_term(qtab.mono(c), v);
    }
    qs[s].prune(1e-10);
  }
  // independent verification of the certificate identities
  for (std::size_t j = 0; j < forms.size(); ++j) {
    const auto& lf = forms[j];
    Polynomial lhs = h * lf.g0;
    for (int s = 0; s < ni; ++s) lhs += h * lf.gs[s] * qs[s];
    if (lf.kind == ConstraintKind::Equality) {
      if (lhs.max_abs_coeff() > 1e-6 * std::max(1.0, h.max_abs_coeff()))
        throw ExtensionUnavailable("sos equality identity failed verification");
      continue;
    }
    lhs.add_term(Mono(n, 0), -sol.x[mu_var[j]]);
    for (const auto& iv : ideals) {
      if (iv.form != static_cast<int>(j)) continue;
      const auto& tb = MonomialTable::get(n, two_l - std::max(kkt.eqs[iv.eq].degree(), 0));
      Polynomial mult(n);
      for (int ci = 0; ci < tb.size(); ++ci)
        if (sol.x[iv.var0 + ci] != 0.0) mult.add_term(tb.mono(ci), sol.x[iv.var0 + ci]);
      lhs -= mult * kkt.eqs[iv.eq];
    }
    for (const auto& gb : grams) {
      if (gb.form != static_cast<int>(j)) continue;
      const auto& basis = MonomialTable::get(n, gb.half_deg);
      Polynomial sos(n);
      for (int r = 0; r < gb.side; ++r)
        for (int c = 0; c < gb.side; ++c) {
          int rr = std::min(r, c), cc = std::max(r, c);
          sos.add_term(poly::mono_mul(basis.mono(r), basis.mono(c)),
                       sol.x[gb.var0 + tri(gb.side, rr, cc)]);
        }
      lhs -= gb.weight ? sos * (*gb.weight) : sos;
    }
    lhs.prune(1e-14);
    if (lhs.max_abs_coeff() > 1e-5 * std::max(1.0, h.max_abs_coeff()))
      throw ExtensionUnavailable("sos membership identity failed verification");
  }

  bool h_positive = false;
  {
    std::vector<Polynomial> basis = g.declared_positive;
    for (const auto& p2 : g.players)
      for (const auto& c : p2.constraints)
        if (c.kind == ConstraintKind::StrictIneq && c.original.is_polynomial())
          basis.push_back(c.original.num());
    auto split = poly::split_declared_factors(h, basis);
    h_positive = split.fully_declared && split.constant > 0;
  }
  std::vector<RationalFunction> p;
  for (int s = 0; s < ni; ++s) p.emplace_back(qs[s], h, h_positive);
  return make(g, t, std::move(p), Provenance::SosCertified,
              "degree " + std::to_string(two_l));
}

Extension extend_explicit(const Gnep& g, const Triple& t) {
  const auto& lay = g.layout;
  const auto& spec = g.players[t.player].extension;
  if (spec.exprs.size() != static_cast<std::size_t>(lay.dim(t.player)))
    throw ExtendError("explicit extension needs n_i expressions");
  // substitute anchor placeholders textually, then parse
  auto substitute = [&](const std::string& src) {
    std::string out;
    std::size_t i = 0;
    while (i < src.size()) {
      char c = src[i];
      auto read_pair = [&](std::size_t start) -> std::optional<std::pair<int, int>> {
        std::size_t p = start;
        std::size_t d0 = p;
        while (p < src.size() && std::isdigit(static_cast<unsigned char>(src[p]))) ++p;
        if (p == d0 || p >= src.size() || src[p] != '_') return std::nullopt;
        int a = std::atoi(src.substr(d0, p - d0).c_str());
        ++p;
        std::size_t d1 = p;
        while (p < src.size() && std::isdigit(static_cast<unsigned char>(src[p]))) ++p;
        if (p == d1) return std::nullopt;
        int b = std::atoi(src.substr(d1, p - d1).c_str());
        i = p;
        return std::make_pair(a, b);
      };
      if ((c == 'u' || c == 'v') && i + 1 < src.size() &&
          std::isdigit(static_cast<unsigned char>(src[i + 1]))) {
        auto pair = read_pair(i + 1);
        if (!pair) throw ExtendError("bad anchor placeholder in extension expression");
        auto [pi, j] = *pair;
        double val;
        if (c == 'u') {
          val = t.u[lay.flat(pi - 1, j - 1)];
        } else {
          if (pi - 1 != t.player) throw ExtendError("v placeholder for the wrong player");
          val = t.v[j - 1];
        }
        out += "(" + poly::format_double(val) + ")";
        continue;
      }
      if (src.compare(i, 5, "normv") == 0) {
        std::size_t p = i + 5;
        std::size_t d0 = p;
        while (p < src.size() && std::isdigit(static_cast<unsigned char>(src[p]))) ++p;
        if (p == d0) throw ExtendError("bad normv placeholder");
        int pi = std::atoi(src.substr(d0, p - d0).c_str());
        if (pi - 1 != t.player) throw ExtendError("normv placeholder for the wrong player");
        out += "(" + poly::format_double(t.v.norm()) + ")";
        i = p;
        continue;
      }
      out.push_back(c);
      ++i;
    }
    return out;
  };
  std::vector<RationalFunction> p;
  for (const auto& e : spec.exprs)
    p.push_back(poly::parse_expression(substitute(e), lay));
  return make(g, t, std::move(p), Provenance::Explicit);
}

namespace {

bool own_set_independent(const Gnep& g, int player) {
  const auto& lay = g.layout;
  for (const auto& c : g.players[player].constraints)
    for (int v = 0; v < lay.total(); ++v)
      if (!lay.in_block(v, player) &&
          (c.cleared.depends_on(v) || c.original.den().depends_on(v)))
        return false;
  return true;
}

}  // namespace

Extension extend_auto(const Gnep& g, const Triple& t, const std::vector<VectorXd>& trace_nodes,
                      const KktDescription& kkt, const sdp::SdpOptions& sdp_opts) {
  using K = model::ExtensionSpec::Kind;
  const auto& spec = g.players[t.player].extension;
  switch (spec.kind) {
    case K::Explicit: return extend_explicit(g, t);
    case K::Box: return extend_box(g, t);
    case K::Simplex: return extend_simplex(g, t);
    case K::Ball: return extend_ball(g, t);
    case K::Auto: break;
  }
  if (own_set_independent(g, t.player)) return extend_constant(g, t);
  if (auto s = model::match_box(g, t.player); s) return extend_box(g, t);
  if (auto s = model::match_simplex(g, t.player); s) return extend_simplex(g, t);
  if (auto s = model::match_ball(g, t.player);
      s && s->euclidean && !s->annulus && model::linear_sqrt(s->R))
    return extend_ball(g, t);
  // the sos system for constraints linear in the own block
  bool linear = true;
  const auto& lay = g.layout;
  std::vector<int> block;
  for (int j = 0; j < lay.dim(t.player); ++j) block.push_back(lay.flat(t.player, j));
  for (const auto& c : g.players[t.player].constraints)
    if (c.cleared.degree_in(block) > 1) linear = false;
  if (linear) {
    int maxdeg = 2;
    for (const auto& c : g.players[t.player].constraints)
      maxdeg = std::max(maxdeg, c.cleared.degree());
    for (const auto& p : kkt.eqs) maxdeg = std::max(maxdeg, p.degree());
    int l0 = (maxdeg + 1) / 2;
    std::vector<Polynomial> hs;
    hs.push_back(Polynomial::constant(lay.total(), 1.0));
    Polynomial denprod = Polynomial::constant(lay.total(), 1.0);
    bool any_den = false;
    for (const auto& c : g.players[t.player].constraints)
      if (!c.original.is_polynomial()) {
        denprod = denprod * c.original.den();
        any_den = true;
      }
    if (any_den) hs.push_back(denprod);
    for (const auto& h : hs)
      for (int l = l0; l <= l0 + 1; ++l) {
        try {
          return extend_sos(g, t, kkt, l, h, sdp_opts);
        } catch (const ExtendError&) {
        }
      }
  }
  if (!trace_nodes.empty()) {
    try {
      return extend_interpolate(g, t, trace_nodes, kkt, 3, sdp_opts);
    } catch (const ExtendError&) {
    }
  }
  throw ExtensionUnavailable("no feasible extension construction applies");
}

}  // namespace gne::extend
