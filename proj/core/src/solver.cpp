#include "gne/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gne::solver {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using model::ConstraintKind;
using poly::Mono;
using poly::RationalFunction;

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::GneFound: return "GneFound";
    case SolveStatus::NoGneInKktSet: return "NoGneInKktSet";
    case SolveStatus::BoundaryOnly: return "BoundaryOnly";
    case SolveStatus::Inconclusive: return "Inconclusive";
  }
  return "?";
}

KktSet build_kkt_set(const Gnep& g, const std::vector<lme::LmeResult>& lmes) {
  KktSet out;
  out.base.n = g.layout.total();
  for (int i = 0; i < g.layout.players(); ++i) {
    auto pieces = lme::build_kkt_pieces(g, i, lmes[i]);
    std::string who = "player" + std::to_string(i + 1);
    for (auto& p : pieces.stationarity) {
      out.base.eqs.push_back(std::move(p));
      out.eq_origin.push_back(who + ":stationarity");
    }
    for (auto& p : pieces.complementarity) {
      out.base.eqs.push_back(std::move(p));
      out.eq_origin.push_back(who + ":complementarity");
    }
    for (auto& p : pieces.sign_conditions) {
      out.base.ineqs.push_back(std::move(p));
      out.ineq_origin.push_back(who + ":sign");
    }
    for (const auto& c : g.players[i].constraints) {
      switch (c.kind) {
        case ConstraintKind::Equality:
          out.base.eqs.push_back(c.cleared);
          out.eq_origin.push_back(who + ":feasibility");
          break;
        case ConstraintKind::WeakIneq:
          out.base.ineqs.push_back(c.cleared);
          out.ineq_origin.push_back(who + ":feasibility");
          break;
        case ConstraintKind::StrictIneq:
          out.base.stricts.push_back(c.cleared);
          out.strict_origin.push_back(who + ":feasibility");
          break;
      }
    }
  }
  return out;
}

MatrixXd select_theta(int n, std::mt19937_64& rng, double cond_cap) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    MatrixXd R(n + 1, n + 1);
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) R(i, j) = g(rng);
    MatrixXd theta = R.transpose() * R;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(theta, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (lo > 0 && hi / lo < cond_cap) return theta;
  }
}

Polynomial theta_polynomial(const MatrixXd& theta) {
  const int n = static_cast<int>(theta.rows()) - 1;
  Polynomial p(n);
  auto basis = [&](int a) {
    if (a == 0) return Polynomial::constant(n, 1.0);
    return Polynomial::variable(n, a - 1);
  };
  for (int a = 0; a <= n; ++a)
    for (int b = 0; b <= n; ++b) p += basis(a) * basis(b) * theta(a, b);
  p.prune();
  return p;
}

GneSolver::GneSolver(Gnep g) : g_(std::move(g)), rng_(g_.config.seed) {
  lmes_.reserve(g_.layout.players());
  for (int i = 0; i < g_.layout.players(); ++i) lmes_.push_back(lme::build_lme(g_, i, rng_));
  kkt_ = build_kkt_set(g_, lmes_);
  theta_ = select_theta(g_.layout.total(), rng_);
  theta_poly_ = theta_polynomial(theta_);
}

momsos::SemialgebraicSet GneSolver::master_set() const {
  momsos::SemialgebraicSet K = kkt_.base;
  for (const auto& c : cuts_) K.ineqs.push_back(c);
  for (const auto& e : exclusions_) K.ineqs.push_back(e);
  return K;
}

ratopt::SolveControls GneSolver::controls() const {
  ratopt::SolveControls ctl;
  ctl.k_max_extra = g_.config.max_order;
  ctl.tol.tol_rank = g_.config.tol_rank;
  ctl.tol.tol_feas = std::max(g_.config.tol_kappa, 1e-6);
  ctl.tol.tol_strict = g_.config.tol_strict;
  ctl.sdp.max_iters = g_.config.sdp_max_iters;
  return ctl;
}

extend::KktDescription GneSolver::kkt_description() const {
  extend::KktDescription d;
  d.eqs = kkt_.base.eqs;
  d.ineqs = kkt_.base.ineqs;
  for (const auto& s : kkt_.base.stricts) d.ineqs.push_back(s);
  for (const auto& c : cuts_) d.ineqs.push_back(c);
  for (const auto& e : exclusions_) d.ineqs.push_back(e);
  return d;
}

GneSolver::CheckProgram GneSolver::build_check(int player, const VectorXd& u,
                                               bool tightened) const {
  const auto& lay = g_.layout;
  const auto& pl = g_.players[player];
  const int n = lay.total();
  const int ni = lay.dim(player);
  std::vector<std::optional<double>> fixed(n);
  for (int v = 0; v < n; ++v)
    if (!lay.in_block(v, player)) fixed[v] = u[v];
  std::vector<int> block;
  for (int j = 0; j < ni; ++j) block.push_back(lay.flat(player, j));

  CheckProgram out;
  out.prog.K.n = ni;

  auto push = [&](const Polynomial& p, int kind /*0 eq, 1 ineq, 2 strict*/) {
    Polynomial sub = p.subst_partial(fixed).restrict_to(block);
    sub.prune(1e-13);
    double scale = std::max(1.0, p.max_abs_coeff());
    if (auto c = sub.as_constant()) {
      double tol = 1e-6 * scale;
      bool ok = kind == 0 ? std::abs(*c) <= tol : *c >= -tol;
      if (!ok) out.infeasible_substitution = true;
      return;
    }
    if (kind == 0)
      out.prog.K.eqs.push_back(sub);
    else if (kind == 1)
      out.prog.K.ineqs.push_back(sub);
    else
      out.prog.K.stricts.push_back(sub);
  };

  for (const auto& c : pl.constraints)
    push(c.cleared, c.kind == ConstraintKind::Equality  ? 0
                    : c.kind == ConstraintKind::WeakIneq ? 1
                                                         : 2);
  if (tightened) {
    auto pieces = lme::build_kkt_pieces(g_, player, lmes_[player]);
    for (const auto& p : pieces.stationarity) push(p, 0);
    for (const auto& p : pieces.complementarity) push(p, 0);
    for (const auto& p : pieces.sign_conditions) push(p, 1);
  }

  // objective: f_i(x_i, u_-i) - f_i(u) as a ratio of polynomials in x_i
  const Polynomial& N = pl.objective.num();
  const Polynomial& D = pl.objective.den();
  double fu;
  {
    std::span<const double> pt(u.data(), static_cast<std::size_t>(u.size()));
    fu = pl.objective.eval(pt);
  }
  Polynomial Ni = N.subst_partial(fixed).restrict_to(block);
  Polynomial Di = D.subst_partial(fixed).restrict_to(block);
  Polynomial a1 = Ni - Di * fu;
  a1.prune(1e-13);
  out.prog.a1 = a1;
  out.prog.a2 = Di;
  double fscale = std::max({1.0, Ni.max_abs_coeff(), std::abs(fu) * Di.max_abs_coeff()});
  if (a1.is_zero() || a1.max_abs_coeff() <= 1e-9 * fscale) out.objective_zero = true;
  return out;
}

PlayerCheck GneSolver::run_check(int player, const VectorXd& u, bool tightened,
                                 std::mt19937_64& rng) const {
  PlayerCheck pc;
  pc.player = player;
  const auto& lay = g_.layout;
  const int ni = lay.dim(player);
  CheckProgram cp = build_check(player, u, tightened);
  if (cp.infeasible_substitution) {
    pc.note = "check constraints inconsistent at the candidate";
    return pc;
  }
  if (cp.objective_zero) {
    pc.known = true;
    pc.delta = 0.0;
    pc.has_v = true;
    pc.v.resize(ni);
    for (int j = 0; j < ni; ++j) pc.v[j] = u[lay.flat(player, j)];
    pc.note = "objective constant over the feasible set";
    return pc;
  }
  auto ctl = controls();
  auto out = ratopt::solve_rational(cp.prog, ctl, rng);
  pc.order = out.order;
  pc.sdp_iterations = out.sdp_iterations;
  pc.note = out.note;
  switch (out.status) {
    case ratopt::RatStatus::MinimizersFound: {
      pc.known = true;
      pc.delta = out.value;
      // tie-break: lexicographically smallest coordinates
      auto lex_less = [](const VectorXd& a, const VectorXd& b) {
        for (int i = 0; i < a.size(); ++i) {
          if (a[i] < b[i] - 1e-9) return true;
          if (a[i] > b[i] + 1e-9) return false;
        }
        return false;
      };
      int best = 0;
      for (std::size_t i = 1; i < out.minimizers.size(); ++i)
        if (lex_less(out.minimizers[i], out.minimizers[best])) best = static_cast<int>(i);
      pc.has_v = true;
      pc.v = out.minimizers[best];
      pc.closure_atoms = out.closure_atoms;
      break;
    }
    case ratopt::RatStatus::ValueOnlyOnClosure:
      pc.known = true;
      pc.delta = out.value;
      pc.closure_atoms = out.closure_atoms;
      break;
    case ratopt::RatStatus::InfeasibleCertified:
      // the candidate itself is feasible, so this is a numerical artifact
      pc.note = "tightened check relaxation infeasible";
      break;
    case ratopt::RatStatus::Inconclusive:
      // no minimizer was represented, but a certified relaxation bound close
      // to zero still proves that the player cannot improve: the incumbent
      // strategy always achieves objective zero
      if (out.bound_certified && out.value >= -g_.config.tol_delta) {
        pc.known = true;
        pc.delta = out.value;
        pc.note = "certified by the relaxation bound";
      }
      break;
  }
  return pc;
}

double GneSolver::kappa_at(const VectorXd& u) const {
  std::span<const double> pt(u.data(), static_cast<std::size_t>(u.size()));
  double kappa = -1e300;
  for (const auto& pl : g_.players)
    for (const auto& c : pl.constraints) {
      double v;
      try {
        v = c.original.eval(pt);
      } catch (const poly::DenominatorZero&) {
        return 1e300;
      }
      kappa = std::max(kappa, c.kind == ConstraintKind::Equality ? std::abs(v) : -v);
    }
  return kappa == -1e300 ? 0.0 : kappa;
}

bool GneSolver::stricts_hold(const VectorXd& u) const {
  std::span<const double> pt(u.data(), static_cast<std::size_t>(u.size()));
  for (const auto& pl : g_.players)
    for (const auto& c : pl.constraints)
      if (c.kind == ConstraintKind::StrictIneq) {
        try {
          if (c.original.eval(pt) <= g_.config.tol_strict) return false;
        } catch (const poly::DenominatorZero&) {
          return false;
        }
      }
  return true;
}

sdp::SdpProblem GneSolver::first_master_relaxation() {
  auto K = master_set();
  Polynomial one = Polynomial::constant(K.n, 1.0);
  int d0 = momsos::minimal_order(K, theta_poly_, one);
  auto rel = momsos::assemble_relaxation(K, theta_poly_, one, d0);
  rel.sdp.name = "master relaxation, order " + std::to_string(d0);
  return rel.sdp;
}

SolveOutcome GneSolver::solve() {
  SolveOutcome out;
  const auto& lay = g_.layout;
  auto ctl = controls();

  for (int k = 0; k < g_.config.max_loops; ++k) {
    LoopTrace tr;
    tr.k = k;
    auto master = ratopt::minimize_quadratic_master(theta_poly_, master_set(), ctl, rng_);
    tr.master_order = master.order;
    tr.master_sdp_iterations = master.sdp_iterations;
    out.loops = k + 1;
    if (master.status == ratopt::MasterStatus::InfeasibleCertified) {
      tr.note = master.note;
      out.trace.push_back(std::move(tr));
      out.status = SolveStatus::NoGneInKktSet;
      out.note = "master problem infeasible at loop " + std::to_string(k);
      return out;
    }
    if (master.status == ratopt::MasterStatus::BoundaryAtom) {
      tr.note = master.note;
      tr.u = master.point;
      out.trace.push_back(std::move(tr));
      out.status = SolveStatus::BoundaryOnly;
      out.point = master.point;
      out.boundary_atoms.push_back(master.point);
      out.note = "master minimizer lies on the strict-inequality boundary";
      return out;
    }
    if (master.status == ratopt::MasterStatus::Inconclusive) {
      tr.note = master.note;
      out.trace.push_back(std::move(tr));
      out.status = SolveStatus::Inconclusive;
      out.note = "master relaxation inconclusive: " + master.note;
      return out;
    }
    VectorXd u = master.point;
    tr.u = u;
    tr.theta_u = master.value;
    nodes_.push_back(u);

    // per-player checks on the multiplier-tightened sets
    std::vector<PlayerCheck> checks;
    bool any_unknown = false;
    for (int i = 0; i < lay.players(); ++i) {
      checks.push_back(run_check(i, u, true, rng_));
      if (!checks.back().known) any_unknown = true;
    }
    std::vector<int> active;
    for (const auto& pc : checks)
      if (pc.known && pc.delta < -g_.config.tol_delta) active.push_back(pc.player);

    if (active.empty() && !any_unknown) {
      // candidate equilibrium: certify with the plain per-player problems at a
      // fresh seed before accepting
      std::mt19937_64 verify_rng(rng_());
      bool ok = true;
      bool boundary = false;
      std::vector<VectorXd> boundary_atoms;
      for (int i = 0; i < lay.players() && ok; ++i) {
        PlayerCheck plain = run_check(i, u, false, verify_rng);
        checks[i].note += checks[i].note.empty() ? "verified" : "; verified";
        if (!plain.known) {
          checks[i].note += " (plain check inconclusive)";
          ok = false;
          tr.note = "verification inconclusive for player " + std::to_string(i + 1);
        } else if (plain.delta < -g_.config.tol_delta) {
          ok = false;
          if (plain.has_v) {
            checks[i] = plain;
            active.push_back(i);
          } else {
            boundary = true;
            for (const auto& a : plain.closure_atoms) {
              VectorXd full = u;
              for (int j = 0; j < lay.dim(i); ++j) full[lay.flat(i, j)] = a[j];
              boundary_atoms.push_back(full);
            }
            tr.note = "player " + std::to_string(i + 1) +
                      " improves only on the strict boundary";
          }
        }
      }
      if (ok) {
        double kappa = kappa_at(u);
        double delta = 0.0;
        for (const auto& pc : checks) delta = std::min(delta, pc.delta);
        tr.checks = checks;
        out.trace.push_back(std::move(tr));
        if (kappa <= g_.config.tol_kappa && stricts_hold(u)) {
          out.status = SolveStatus::GneFound;
          out.point = u;
          out.delta = delta;
          out.kappa = kappa;
          return out;
        }
        out.status = SolveStatus::Inconclusive;
        out.note = "candidate equilibrium violates feasibility tolerances";
        out.point = u;
        out.delta = delta;
        out.kappa = kappa;
        return out;
      }
      if (boundary) {
        tr.checks = checks;
        out.trace.push_back(std::move(tr));
        out.status = SolveStatus::BoundaryOnly;
        out.point = u;
        out.boundary_atoms = boundary_atoms;
        out.note = "improvement exists only in the closure of a strict constraint";
        return out;
      }
      if (active.empty()) {
        tr.checks = checks;
        out.trace.push_back(std::move(tr));
        out.status = SolveStatus::Inconclusive;
        out.note = tr.note;
        return out;
      }
    }
    if (any_unknown && active.empty()) {
      tr.checks = checks;
      std::string who;
      for (const auto& pc : checks)
        if (!pc.known) who += (who.empty() ? "" : ",") + std::to_string(pc.player + 1);
      out.trace.push_back(std::move(tr));
      out.status = SolveStatus::Inconclusive;
      out.note = "check subproblem inconclusive for player(s) " + who;
      return out;
    }

    // cuts for every failing player
    tr.checks = checks;
    tr.active = active;
    auto kktdesc = kkt_description();
    for (int i : active) {
      const auto& pc = checks[i];
      if (!pc.has_v) {
        out.trace.push_back(std::move(tr));
        out.status = SolveStatus::BoundaryOnly;
        out.point = u;
        for (const auto& a : pc.closure_atoms) {
          VectorXd full = u;
          for (int j = 0; j < lay.dim(i); ++j) full[lay.flat(i, j)] = a[j];
          out.boundary_atoms.push_back(full);
        }
        out.note = "player " + std::to_string(i + 1) + " improves only on the strict boundary";
        return out;
      }
      extend::Triple triple{u, i, pc.v};
      extend::Extension ext;
      try {
        ext = extend::extend_auto(g_, triple, nodes_, kktdesc, ctl.sdp);
      } catch (const extend::ExtendError& e) {
        out.trace.push_back(std::move(tr));
        out.status = SolveStatus::Inconclusive;
        out.note = "no feasible extension for player " + std::to_string(i + 1) + " at loop " +
                   std::to_string(k) + ": " + e.what();
        return out;
      }
      // cut: f_i(p(x), x_-i) - f_i(x) >= 0, cleared to a polynomial
      RationalFunction fp = poly::substitute_player(g_.players[i].objective, lay, i, ext.p);
      RationalFunction diff = fp - g_.players[i].objective;
      std::vector<Polynomial> basis = g_.declared_positive;
      for (const auto& p2 : g_.players)
        for (const auto& c2 : p2.constraints)
          if (c2.kind == ConstraintKind::StrictIneq && c2.original.is_polynomial())
            basis.push_back(c2.original.num());
      auto cleared = poly::clear_denominators(diff, poly::Relation::Ge, basis);
      Polynomial cut = cleared.poly;
      cut.prune(1e-12);
      double scale = cut.max_abs_coeff();
      if (scale > 0) cut *= 1.0 / scale;
      CutRecord rec;
      rec.player = i;
      rec.provenance = ext.provenance;
      std::ostringstream pdesc;
      pdesc << "p" << (i + 1) << " = (";
      for (std::size_t j = 0; j < ext.p.size(); ++j)
        pdesc << (j ? ", " : "") << ext.p[j].str(&lay);
      pdesc << ")";
      rec.extension_text = pdesc.str();
      rec.cut = cut;
      cuts_.push_back(cut);
      tr.cuts.push_back(std::move(rec));
    }
    out.trace.push_back(std::move(tr));
  }
  out.status = SolveStatus::Inconclusive;
  out.note = "loop budget exhausted after " + std::to_string(g_.config.max_loops) + " loops";
  return out;
}

GneSolver::PointCheck GneSolver::check_point(const VectorXd& u) {
  PointCheck out;
  std::mt19937_64 rng(rng_());
  double delta = 0.0;
  bool all_known = true;
  for (int i = 0; i < g_.layout.players(); ++i) {
    PlayerCheck pc = run_check(i, u, false, rng);
    if (!pc.known) all_known = false;
    delta = std::min(delta, pc.known ? pc.delta : 0.0);
    out.checks.push_back(std::move(pc));
  }
  out.delta = delta;
  out.kappa = kappa_at(u);
  out.strict_ok = stricts_hold(u);
  out.is_gne = all_known && delta >= -g_.config.tol_delta &&
               out.kappa <= g_.config.tol_kappa && out.strict_ok;
  return out;
}

EnumerationOutcome GneSolver::enumerate_gnes() {
  EnumerationOutcome out;
  auto ctl = controls();
  const int max_gnes = 16;
  for (int round = 0; round < max_gnes; ++round) {
    SolveOutcome sol = solve();
    for (auto& t : sol.trace) out.trace.push_back(t);
    if (sol.status == SolveStatus::NoGneInKktSet) {
      out.exhausted = true;
      out.note = round == 0 ? "no equilibrium in the kkt set" : "no further equilibria";
      return out;
    }
    if (sol.status != SolveStatus::GneFound) {
      out.note = "enumeration stopped: " + std::string(to_string(sol.status)) +
                 (sol.note.empty() ? "" : " (" + sol.note + ")");
      return out;
    }
    out.gnes.push_back(sol);
    // grow the exclusion radius zeta until the capped maximization certifies
    // that nothing else of the kkt set lies inside
    const VectorXd& u = sol.point;
    std::span<const double> pt(u.data(), static_cast<std::size_t>(u.size()));
    double theta_u = theta_poly_.eval(pt);
    double zeta = g_.config.zeta0;
    bool pinned = false;
    while (zeta >= g_.config.zeta_min) {
      auto bound =
          ratopt::bound_max_quadratic(theta_poly_, master_set(), theta_u + zeta, ctl);
      if (bound.valid &&
          (bound.infeasible ||
           bound.bound <= theta_u + g_.config.tol_delta * (1.0 + std::abs(theta_u)))) {
        pinned = true;
        break;
      }
      zeta *= 0.5;
    }
    if (!pinned) {
      out.note = "could not isolate the equilibrium for exclusion";
      return out;
    }
    Polynomial excl = theta_poly_ - Polynomial::constant(g_.layout.total(), theta_u + zeta);
    excl.prune();
    exclusions_.push_back(excl);
  }
  out.note = "enumeration cap reached";
  return out;
}

}  // namespace gne::solver
