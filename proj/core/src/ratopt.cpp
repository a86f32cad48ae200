#include "gne/ratopt.hpp"

#include <algorithm>
#include <cmath>

namespace gne::ratopt {

using Eigen::VectorXd;
using momsos::Tms;

const char* to_string(RatStatus s) {
  switch (s) {
    case RatStatus::MinimizersFound: return "MinimizersFound";
    case RatStatus::InfeasibleCertified: return "InfeasibleCertified";
    case RatStatus::ValueOnlyOnClosure: return "ValueOnlyOnClosure";
    case RatStatus::Inconclusive: return "Inconclusive";
  }
  return "?";
}

Membership check_membership(const SemialgebraicSet& K, const VectorXd& z) {
  Membership m;
  std::span<const double> pt(z.data(), static_cast<std::size_t>(z.size()));
  for (const auto& p : K.eqs) {
    double scale = std::max(1.0, p.max_abs_coeff());
    m.eq_violation = std::max(m.eq_violation, std::abs(p.eval(pt)) / scale);
  }
  for (const auto& q : K.ineqs) {
    double scale = std::max(1.0, q.max_abs_coeff());
    m.ineq_violation = std::max(m.ineq_violation, -q.eval(pt) / scale);
  }
  m.ineq_violation = std::max(m.ineq_violation, 0.0);
  for (const auto& q : K.stricts) m.strict_margin = std::min(m.strict_margin, q.eval(pt));
  return m;
}

Eigen::VectorXd polish_point(const SemialgebraicSet& K, Eigen::VectorXd z, double active_tol,
                             int max_iters) {
  const int n = K.n;
  // freeze the active set at entry
  std::vector<const Polynomial*> target;
  for (const auto& p : K.eqs) target.push_back(&p);
  {
    std::span<const double> pt(z.data(), static_cast<std::size_t>(z.size()));
    for (const auto& q : K.ineqs)
      if (std::abs(q.eval(pt)) <= active_tol * std::max(1.0, q.max_abs_coeff()))
        target.push_back(&q);
  }
  if (target.empty()) return z;
  const int m = static_cast<int>(target.size());
  std::vector<std::vector<Polynomial>> jac(m);
  for (int r = 0; r < m; ++r)
    for (int v = 0; v < n; ++v) jac[r].push_back(target[r]->derivative(v));
  auto residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd res(m);
    std::span<const double> pt(x.data(), static_cast<std::size_t>(x.size()));
    for (int r = 0; r < m; ++r)
      res[r] = target[r]->eval(pt) / std::max(1.0, target[r]->max_abs_coeff());
    return res;
  };
  Eigen::VectorXd best = z;
  double best_norm = residual(z).norm();
  Eigen::VectorXd cur = z;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd res = residual(cur);
    if (res.lpNorm<Eigen::Infinity>() < 1e-12) break;
    Eigen::MatrixXd J(m, n);
    std::span<const double> pt(cur.data(), static_cast<std::size_t>(cur.size()));
    for (int r = 0; r < m; ++r) {
      double scale = std::max(1.0, target[r]->max_abs_coeff());
      for (int v = 0; v < n; ++v) J(r, v) = jac[r][v].eval(pt) / scale;
    }
    Eigen::VectorXd step = J.colPivHouseholderQr().solve(res);
    if (!step.allFinite() || step.norm() > 1.0) break;
    double alpha = 1.0;
    bool accepted = false;
    for (int h = 0; h < 6 && !accepted; ++h, alpha *= 0.5) {
      Eigen::VectorXd trial = cur - alpha * step;
      double tn = residual(trial).norm();
      if (tn < res.norm()) {
        cur = trial;
        if (tn < best_norm) {
          best_norm = tn;
          best = trial;
        }
        accepted = true;
      }
    }
    if (!accepted) break;
  }
  // keep the refinement only if it did not damage inequality feasibility
  auto before = check_membership(K, z);
  auto after = check_membership(K, best);
  if (after.eq_violation <= before.eq_violation + 1e-12 &&
      after.ineq_violation <= std::max(before.ineq_violation, 1e-9))
    return best;
  return z;
}

namespace {

Tms tms_from_solution(int n, int k, const Eigen::VectorXd& x) {
  Tms y;
  y.n = n;
  y.half_order = k;
  y.vals = x;
  return y;
}

bool usable_point(const sdp::SdpSolution& sol) {
  return (sol.status == sdp::SdpStatus::Optimal || sol.status == sdp::SdpStatus::NearOptimal ||
          sol.status == sdp::SdpStatus::Failed) &&
         sol.x.size() > 0 && sol.x.allFinite();
}

}  // namespace

RatOptOutcome solve_rational(const RationalProgram& prog, const SolveControls& ctl,
                             std::mt19937_64& rng) {
  RatOptOutcome out;
  const int n = prog.K.n;
  const int d0 = momsos::minimal_order(prog.K, prog.a1, prog.a2);
  const int k_max = d0 + ctl.k_max_extra;
  for (int k = d0; k <= k_max; ++k) {
    out.order = k;
    auto rel = momsos::assemble_relaxation(prog.K, prog.a1, prog.a2, k);
    auto sol = sdp::solve_sdp(rel.sdp, ctl.sdp);
    out.sdp_iterations += sol.iterations;
    if (sol.status == sdp::SdpStatus::PrimalInfeasible) {
      out.status = RatStatus::InfeasibleCertified;
      out.note = "moment relaxation infeasible at order " + std::to_string(k);
      return out;
    }
    if (sol.status == sdp::SdpStatus::DualInfeasible) {
      out.note = "moment relaxation unbounded at order " + std::to_string(k);
      continue;
    }
    if (!usable_point(sol)) continue;
    bool certified = sol.status == sdp::SdpStatus::Optimal ||
                     sol.status == sdp::SdpStatus::NearOptimal;
    if (certified) {
      out.value = sol.primal_obj;
      out.bound_certified = true;
    }

    // renormalize to <a2, y> = 1 (stalled embeddings return a scaled ray)
    double mass = 0.0;
    {
      Tms ytmp = tms_from_solution(n, k, sol.x);
      mass = momsos::apply(prog.a2, ytmp);
    }
    if (!(std::abs(mass) > 1e-9)) continue;
    Tms y = tms_from_solution(n, k, sol.x / mass);
    auto ft = momsos::flat_truncation(y, k, d0, ctl.tol.tol_rank);
    if (!ft.holds) continue;
    momsos::AtomicMeasure am;
    try {
      am = momsos::extract_atoms(y, ft.t, ft.rank, rng, ctl.tol.tol_rank);
    } catch (const momsos::ExtractionFailed&) {
      continue;
    }
    // sort atoms into K members and closure-only points
    std::vector<VectorXd> in_K, in_closure;
    double best_val = 1e300;
    double feas_tol = certified ? ctl.tol.tol_feas : std::max(1e-4, ctl.tol.tol_feas);
    for (VectorXd z : am.atoms) {
      z = polish_point(prog.K, z);
      auto mem = check_membership(prog.K, z);
      if (mem.eq_violation > feas_tol || mem.ineq_violation > feas_tol) continue;
      std::span<const double> pt(z.data(), static_cast<std::size_t>(z.size()));
      double a2v = prog.a2.eval(pt);
      if (mem.strict_margin > ctl.tol.tol_strict && a2v > ctl.tol.tol_strict) {
        in_K.push_back(z);
        best_val = std::min(best_val, prog.a1.eval(pt) / a2v);
      } else {
        in_closure.push_back(z);
      }
    }
    if (in_K.empty() && in_closure.empty()) continue;  // extraction inconsistent, go up
    out.flat_t = ft.t;
    if (!certified) {
      if (in_K.empty()) continue;
      out.value = best_val;  // uncertified bound replaced by the achieved value
    }
    if (!in_K.empty()) {
      std::vector<VectorXd> mins;
      for (const auto& z : in_K) {
        std::span<const double> pt(z.data(), static_cast<std::size_t>(z.size()));
        double val = prog.a1.eval(pt) / prog.a2.eval(pt);
        if (val <= best_val + 1e-6 * (1.0 + std::abs(best_val))) mins.push_back(z);
      }
      out.status = RatStatus::MinimizersFound;
      out.minimizers = mins;
      out.closure_atoms = in_closure;
      return out;
    }
    out.status = RatStatus::ValueOnlyOnClosure;
    out.closure_atoms = in_closure;
    return out;
  }
  out.status = RatStatus::Inconclusive;
  if (out.note.empty()) out.note = "no flat truncation up to order " + std::to_string(k_max);
  return out;
}

MasterOutcome minimize_quadratic_master(const Polynomial& theta, const SemialgebraicSet& K,
                                        const SolveControls& ctl, std::mt19937_64& rng) {
  (void)rng;
  MasterOutcome out;
  const int n = K.n;
  Polynomial one = Polynomial::constant(n, 1.0);
  const int d0 = momsos::minimal_order(K, theta, one);
  const int k_max = d0 + ctl.k_max_extra;
  for (int k = d0; k <= k_max; ++k) {
    out.order = k;
    auto rel = momsos::assemble_relaxation(K, theta, one, k);
    auto sol = sdp::solve_sdp(rel.sdp, ctl.sdp);
    out.sdp_iterations += sol.iterations;
    if (sol.status == sdp::SdpStatus::PrimalInfeasible) {
      out.status = MasterStatus::InfeasibleCertified;
      out.note = "master relaxation infeasible at order " + std::to_string(k);
      return out;
    }
    if (!usable_point(sol)) continue;
    bool certified = sol.status == sdp::SdpStatus::Optimal ||
                     sol.status == sdp::SdpStatus::NearOptimal;
    // the embedding can stall on tight relaxations (they have no interior);
    // the returned ray still carries the minimizer, so renormalize by the mass
    double y0 = sol.x[0];
    if (!(y0 > 1e-9)) continue;
    Tms y = tms_from_solution(n, k, sol.x / y0);
    // a rank-one truncation at any level pins the unique minimizer down to
    // its first-order moments; uncertified points get one order of magnitude
    // of slack here and must survive polishing onto the variety below
    double rank_tol = certified ? ctl.tol.tol_rank : 1e-2;
    bool rank1 = false;
    for (int t = 1; t <= k && !rank1; ++t)
      if (momsos::numeric_rank(momsos::moment_matrix(y, t), rank_tol) == 1) rank1 = true;
    if (!rank1) continue;
    VectorXd u(n);
    for (int v = 0; v < n; ++v) u[v] = y.vals[1 + v];
    u = polish_point(K, u);
    auto mem = check_membership(K, u);
    double feas_tol = std::max(ctl.tol.tol_feas, 1e-6);
    if (mem.eq_violation > feas_tol || mem.ineq_violation > feas_tol) continue;
    std::span<const double> pt(u.data(), static_cast<std::size_t>(u.size()));
    double tval = theta.eval(pt);
    if (certified &&
        std::abs(tval - sol.primal_obj) > 1e-4 * (1.0 + std::abs(sol.primal_obj)))
      continue;  // first moments do not represent the minimizer yet
    out.value = tval;
    out.point = u;
    if (!certified) out.note = "uncertified relaxation point, validated downstream";
    if (mem.strict_margin > ctl.tol.tol_strict) {
      out.status = MasterStatus::MinimizerFound;
    } else {
      out.status = MasterStatus::BoundaryAtom;
      out.note = "minimizer violates a strict inequality";
    }
    return out;
  }
  out.status = MasterStatus::Inconclusive;
  out.note = "no rank-one truncation up to order " + std::to_string(k_max);
  return out;
}

MaxBound bound_max_quadratic(const Polynomial& theta, const SemialgebraicSet& K, double cap,
                             const SolveControls& ctl) {
  MaxBound out;
  const int n = K.n;
  SemialgebraicSet Kc = K;
  Kc.ineqs.push_back(Polynomial::constant(n, cap) - theta);
  Polynomial neg = -theta;
  Polynomial one = Polynomial::constant(n, 1.0);
  const int d0 = momsos::minimal_order(Kc, neg, one);
  const int k_max = d0 + ctl.k_max_extra;
  for (int k = d0; k <= k_max; ++k) {
    auto rel = momsos::assemble_relaxation(Kc, neg, one, k);
    auto sol = sdp::solve_sdp(rel.sdp, ctl.sdp);
    if (sol.status == sdp::SdpStatus::PrimalInfeasible) {
      out.infeasible = true;
      out.valid = true;
      return out;
    }
    if (sol.status == sdp::SdpStatus::Optimal || sol.status == sdp::SdpStatus::NearOptimal) {
      out.valid = true;
      out.bound = -sol.primal_obj;  // upper bound on max theta over the capped set
      if (out.bound <= cap + 1e-7 * (1.0 + std::abs(cap))) return out;
    }
  }
  return out;
}

}  // namespace gne::ratopt
