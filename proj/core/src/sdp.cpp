#include "gne/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace gne::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "Optimal";
    case SdpStatus::NearOptimal: return "NearOptimal";
    case SdpStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SdpStatus::DualInfeasible: return "DualInfeasible";
    case SdpStatus::Failed: return "Failed";
  }
  return "?";
}

// Homogeneous self-dual embedding of
//   (P) min c'x  s.t.  Ex = f,  S(x) = C + sum_j x_j A_j >= 0
//   (D) max f'y - <C,Z>  s.t.  E'y + adj(Z) = c,  Z >= 0
// with iterates (x, y, Z, S, tau, kappa) solving
//   (i)   E x - f tau           = 0
//   (ii)  C tau + sum x_j A_j - S = 0
//   (iii) E'y + adj(Z) - c tau  = 0
//   (iv)  c'x - f'y + <C,Z> + kappa = 0
// and <S,Z> + tau kappa -> 0. Nesterov-Todd scaling, Mehrotra correction.

namespace {

struct BlockScaling {
  MatrixXd R;     // s = R diag(lam) R',  z = R^-T diag(lam) R^-1
  MatrixXd Rinv;
  VectorXd lam;
  MatrixXd Y;     // R^-T R^-1, so W^-2(U) = Y U Y
};

struct Workspace {
  const SdpProblem& p;
  int nx, ne, nb;
  double normb, normh, normc;

  explicit Workspace(const SdpProblem& prob) : p(prob) {
    nx = p.nvars;
    ne = static_cast<int>(p.eq_rows.size());
    nb = static_cast<int>(p.blocks.size());
    normc = p.c.size() ? p.c.norm() : 0.0;
    normb = p.eq_rhs.size() ? p.eq_rhs.norm() : 0.0;
    double h2 = 0.0;
    for (const auto& b : p.blocks)
      for (const auto& e : b.constant) h2 += e.val * e.val;
    normh = std::sqrt(h2);
  }

  // out_b = C_b * tau + sum_j x_j A_bj
  void lmi_value(const VectorXd& x, double tau, std::vector<MatrixXd>& out) const {
    out.resize(nb);
    for (int b = 0; b < nb; ++b) {
      const auto& blk = p.blocks[b];
      MatrixXd& M = out[b];
      M.setZero(blk.side, blk.side);
      if (tau != 0.0)
        for (const auto& e : blk.constant) M(e.row, e.col) += tau * e.val;
      for (int j = 0; j < nx; ++j) {
        double xj = x[j];
        if (xj == 0.0 || blk.coef[j].empty()) continue;
        for (const auto& e : blk.coef[j]) M(e.row, e.col) += xj * e.val;
      }
    }
  }

  // out[j] = sum_b <A_bj, Z_b>
  void lmi_adjoint(const std::vector<MatrixXd>& Z, VectorXd& out) const {
    out.setZero(nx);
    for (int b = 0; b < nb; ++b) {
      const auto& blk = p.blocks[b];
      for (int j = 0; j < nx; ++j) {
        double s = 0.0;
        for (const auto& e : blk.coef[j]) s += e.val * Z[b](e.row, e.col);
        out[j] += s;
      }
    }
  }

  double const_inner(const std::vector<MatrixXd>& Z) const {
    double s = 0.0;
    for (int b = 0; b < nb; ++b)
      for (const auto& e : p.blocks[b].constant) s += e.val * Z[b](e.row, e.col);
    return s;
  }

  void eq_apply(const VectorXd& x, VectorXd& out) const {
    out.setZero(ne);
    for (int r = 0; r < ne; ++r) {
      double s = 0.0;
      for (const auto& [j, v] : p.eq_rows[r].terms) s += v * x[j];
      out[r] = s;
    }
  }

  void eq_adjoint(const VectorXd& y, VectorXd& out) const {
    out.setZero(nx);
    for (int r = 0; r < ne; ++r)
      for (const auto& [j, v] : p.eq_rows[r].terms) out[j] += v * y[r];
  }
};

double block_inner(const std::vector<MatrixXd>& A, const std::vector<MatrixXd>& B) {
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += (A[i].array() * B[i].array()).sum();
  return s;
}

bool compute_scaling(const std::vector<MatrixXd>& S, const std::vector<MatrixXd>& Z,
                     std::vector<BlockScaling>& W) {
  W.resize(S.size());
  for (std::size_t b = 0; b < S.size(); ++b) {
    Eigen::LLT<MatrixXd> ls(S[b]);
    Eigen::LLT<MatrixXd> lz(Z[b]);
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    MatrixXd Ls = ls.matrixL();
    MatrixXd Lz = lz.matrixL();
    Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Ls,
                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
    VectorXd sig = svd.singularValues();
    if (sig.minCoeff() <= 0) return false;
    BlockScaling& w = W[b];
    w.lam = sig;
    VectorXd isq = sig.cwiseSqrt().cwiseInverse();
    w.R = Ls * svd.matrixV() * isq.asDiagonal();
    w.Rinv = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
    w.Y = w.Rinv.transpose() * w.Rinv;
  }
  return true;
}

// max alpha in [0, cap] with lam + alpha * dScaled >= 0
double max_step_scaled(const VectorXd& lam, const MatrixXd& dScaled, double cap) {
  VectorXd il = lam.cwiseSqrt().cwiseInverse();
  MatrixXd M = il.asDiagonal() * dScaled * il.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0) return cap;
  return std::min(cap, 1.0 / (-lmin));
}

struct KktSolver {
  const Workspace& ws;
  bool schur_ok = true;
  MatrixXd M;
  Eigen::LLT<MatrixXd> lltM;
  MatrixXd SchurE;
  Eigen::LLT<MatrixXd> lltE;
  MatrixXd K;
  Eigen::PartialPivLU<MatrixXd> lu;
  double reg = 1e-11;

  explicit KktSolver(const Workspace& w) : ws(w) {
    for (int j = 0; j < ws.nx && schur_ok; ++j) {
      bool seen = false;
      for (const auto& b : ws.p.blocks)
        if (!b.coef[j].empty()) { seen = true; break; }
      if (!seen) schur_ok = false;
    }
  }

  void factor(const std::vector<BlockScaling>& W) {
    const int nx = ws.nx, ne = ws.ne;
    M.setZero(nx, nx);
    for (int b = 0; b < ws.nb; ++b) {
      const auto& blk = ws.p.blocks[b];
      const MatrixXd& Y = W[b].Y;
      MatrixXd T(blk.side, blk.side), B(blk.side, blk.side);
      for (int j = 0; j < nx; ++j) {
        if (blk.coef[j].empty()) continue;
        T.setZero();
        for (const auto& e : blk.coef[j]) T.col(e.col) += e.val * Y.col(e.row);
        B.noalias() = T * Y;  // T = Y A_j, so B = Y A_j Y
        for (int k = j; k < nx; ++k) {
          if (blk.coef[k].empty()) continue;
          double s = 0.0;
          for (const auto& e : blk.coef[k]) s += e.val * B(e.row, e.col);
          M(j, k) += s;
        }
      }
    }
    M = M.selfadjointView<Eigen::Upper>();
    double mscale = std::max(1.0, M.diagonal().maxCoeff());
    if (schur_ok) {
      bool ok = false;
      double r = 0.0;
      for (int attempt = 0; attempt < 3 && !ok; ++attempt) {
        MatrixXd Mreg = M;
        if (r > 0) Mreg.diagonal().array() += r;
        lltM.compute(Mreg);
        ok = lltM.info() == Eigen::Success;
        r = r == 0.0 ? 1e-14 * mscale : r * 100;
      }
      if (ok && ne > 0) {
        MatrixXd At = MatrixXd::Zero(nx, ne);
        for (int rr = 0; rr < ne; ++rr)
          for (const auto& [j, v] : ws.p.eq_rows[rr].terms) At(j, rr) = v;
        MatrixXd MiAt = lltM.solve(At);
        SchurE.noalias() = At.transpose() * MiAt;
        lltE.compute(SchurE);
        if (lltE.info() != Eigen::Success) ok = false;
      }
      if (ok) return;
      schur_ok = false;
    }
    K.setZero(nx + ne, nx + ne);
    K.topLeftCorner(nx, nx) = M;
    K.topLeftCorner(nx, nx).diagonal().array() += reg * mscale;
    for (int r = 0; r < ne; ++r)
      for (const auto& [j, v] : ws.p.eq_rows[r].terms) {
        K(nx + r, j) = v;
        K(j, nx + r) = v;
      }
    K.bottomRightCorner(ne, ne).diagonal().array() -= reg * std::max(1.0, mscale);
    lu.compute(K);
  }

  // solves [M E'; E 0] [dx; dy] = [r1; r2]
  void solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& dy) const {
    const int nx = ws.nx, ne = ws.ne;
    if (schur_ok) {
      VectorXd Mi_r1 = lltM.solve(r1);
      if (ne == 0) {
        dx = Mi_r1;
        dy.resize(0);
        return;
      }
      VectorXd rhs(ne);
      ws.eq_apply(Mi_r1, rhs);
      rhs -= r2;
      dy = lltE.solve(rhs);
      VectorXd Ety;
      ws.eq_adjoint(dy, Ety);
      dx = lltM.solve(r1 - Ety);
    } else {
      VectorXd rhs(nx + ne);
      rhs.head(nx) = r1;
      if (ne) rhs.tail(ne) = r2;
      VectorXd s = lu.solve(rhs);
      dx = s.head(nx);
      dy = ne ? VectorXd(s.tail(ne)) : VectorXd();
    }
  }

  void apply_M(const std::vector<BlockScaling>& W, const VectorXd& v, VectorXd& out) const {
    out.setZero(ws.nx);
    for (int b = 0; b < ws.nb; ++b) {
      const auto& blk = ws.p.blocks[b];
      MatrixXd U = MatrixXd::Zero(blk.side, blk.side);
      for (int j = 0; j < ws.nx; ++j) {
        if (blk.coef[j].empty() || v[j] == 0.0) continue;
        for (const auto& e : blk.coef[j]) U(e.row, e.col) += v[j] * e.val;
      }
      MatrixXd YUY = W[b].Y * U * W[b].Y;
      for (int j = 0; j < ws.nx; ++j) {
        double s = 0.0;
        for (const auto& e : blk.coef[j]) s += e.val * YUY(e.row, e.col);
        out[j] += s;
      }
    }
  }

  void solve_refined(const std::vector<BlockScaling>& W, const VectorXd& r1,
                     const VectorXd& r2, VectorXd& dx, VectorXd& dy) const {
    solve(r1, r2, dx, dy);
    VectorXd best_x = dx, best_y = dy;
    double best_rn = 1e300;
    for (int round = 0; round < 8; ++round) {
      VectorXd res1 = r1, res2 = r2;
      VectorXd Mdx;
      apply_M(W, dx, Mdx);
      res1 -= Mdx;
      if (ws.ne > 0) {
        VectorXd Ety, Edx;
        ws.eq_adjoint(dy, Ety);
        res1 -= Ety;
        ws.eq_apply(dx, Edx);
        res2 -= Edx;
      }
      double rn = res1.norm() + (ws.ne ? res2.norm() : 0.0);
      if (rn < best_rn) {
        best_rn = rn;
        best_x = dx;
        best_y = dy;
      }
      double sn = std::max(1.0, r1.norm() + (ws.ne ? r2.norm() : 0.0));
      if (rn <= 1e-12 * sn || rn > best_rn * 2) break;
      VectorXd cx, cy;
      solve(res1, res2, cx, cy);
      dx += cx;
      if (ws.ne) dy += cy;
    }
    dx = best_x;
    dy = best_y;
  }
};

}  // namespace

SdpSolution solve_sdp(const SdpProblem& p, const SdpOptions& opts) {
  Workspace ws(p);
  const int nx = ws.nx, ne = ws.ne, nb = ws.nb;
  SdpSolution sol;
  sol.x.setZero(nx);
  sol.eq_dual.setZero(ne);

  double nu = 1.0;
  for (const auto& b : p.blocks) nu += b.side;

  VectorXd x = VectorXd::Zero(nx);
  VectorXd y = VectorXd::Zero(ne);  // true dual multipliers for Ex = f
  std::vector<MatrixXd> S(nb), Z(nb);
  for (int b = 0; b < nb; ++b) {
    S[b] = MatrixXd::Identity(p.blocks[b].side, p.blocks[b].side);
    Z[b] = MatrixXd::Identity(p.blocks[b].side, p.blocks[b].side);
  }
  double tau = 1.0, kappa = 1.0;

  KktSolver kkt(ws);
  std::vector<BlockScaling> W;
  std::vector<MatrixXd> rg(nb), V(nb), YrgY(nb), YCY(nb);
  std::vector<MatrixXd> dS(nb), dZ(nb), dSs(nb), dZs(nb), dSs_aff(nb), dZs_aff(nb);

  // best-iterate bookkeeping: late iterations can regress once the scaling
  // matrices go singular, so keep the most accurate point seen
  struct Snapshot {
    VectorXd x, y;
    std::vector<MatrixXd> S, Z;
    double tau = 1.0, kappa = 1.0;
    double score = 1e300;
    double pobj = 0, dobj = 0, gap = 0, pres = 0, dres = 0;
    int iter = 0;
  } best;
  int stall = 0;

  auto record_point = [&](SdpStatus st, double pobj, double dobj, double gap, double pres,
                          double dres, int iters) {
    sol.status = st;
    sol.x = x / tau;
    sol.eq_dual = ne ? VectorXd(y / tau) : VectorXd();
    sol.Z.resize(nb);
    for (int b = 0; b < nb; ++b) sol.Z[b] = Z[b] / tau;
    sol.primal_obj = pobj;
    sol.dual_obj = dobj;
    sol.gap = gap;
    sol.primal_res = pres;
    sol.dual_res = dres;
    sol.iterations = iters;
  };

  for (int iter = 0; iter <= opts.max_iters; ++iter) {
    // residuals of (i)-(iv)
    VectorXd adjZ, Ety, Ex;
    ws.lmi_adjoint(Z, adjZ);
    ws.eq_adjoint(y, Ety);
    ws.eq_apply(x, Ex);
    VectorXd rp = Ex - p.eq_rhs * tau;                       // (i)
    ws.lmi_value(x, tau, rg);
    for (int b = 0; b < nb; ++b) rg[b] -= S[b];              // (ii)
    VectorXd rd = Ety + adjZ - p.c * tau;                    // (iii)
    double CZ = ws.const_inner(Z);
    double fy = ne ? p.eq_rhs.dot(y) : 0.0;
    double rt = p.c.dot(x) - fy + CZ + kappa;                // (iv)
    double szdot = block_inner(S, Z);
    double mu = (szdot + tau * kappa) / nu;

    double pobj = p.c.dot(x) / tau;
    double dobj = (fy - CZ) / tau;
    double gap = szdot / (tau * tau);
    double relgap = gap / std::max({1.0, std::abs(pobj), std::abs(dobj)});
    double pres = ne ? (rp / tau).norm() / (1.0 + ws.normb) : 0.0;
    double gres = 0.0;
    for (int b = 0; b < nb; ++b) gres += (rg[b] / tau).squaredNorm();
    pres = std::max(pres, std::sqrt(gres) / (1.0 + ws.normh));
    double dres = (rd / tau).norm() / (1.0 + ws.normc);
    double worst = std::max({relgap, pres, dres});

    if (opts.verbose)
      std::fprintf(stderr,
                   "it %2d pobj % .6e dobj % .6e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n",
                   iter, pobj, dobj, relgap, pres, dres, tau, kappa);

    if (worst <= opts.tol) {
      record_point(SdpStatus::Optimal, pobj, dobj, gap, pres, dres, iter);
      return sol;
    }
    if (worst < best.score) {
      best.score = worst;
      best.x = x;
      best.y = y;
      best.S = S;
      best.Z = Z;
      best.tau = tau;
      best.kappa = kappa;
      best.pobj = pobj;
      best.dobj = dobj;
      best.gap = gap;
      best.pres = pres;
      best.dres = dres;
      best.iter = iter;
      stall = 0;
    } else if (++stall >= 8 || worst > 50 * best.score) {
      break;  // accuracy exhausted; fall through to the best point
    }

    // primal infeasibility: ray (y, Z >= 0) with E'y + adj(Z) = 0, f'y - <C,Z> > 0
    double certval = fy - CZ;
    if (certval > 1e-12 && tau * std::max(1.0, kappa) <= 1e-6 * kappa) {
      double certres = (Ety + adjZ).norm() / (certval * (1.0 + ws.normc));
      if (certres <= std::max(opts.tol * 100, 1e-7)) {
        sol.status = SdpStatus::PrimalInfeasible;
        sol.eq_dual = ne ? VectorXd(y / certval) : VectorXd();
        sol.Z.resize(nb);
        for (int b = 0; b < nb; ++b) sol.Z[b] = Z[b] / certval;
        sol.cert_res = certres;
        sol.iterations = iter;
        return sol;
      }
    }
    // dual infeasibility: ray x with Ex = 0, sum x_j A_j >= 0, c'x < 0
    if (p.c.dot(x) < -1e-12 && tau * std::max(1.0, kappa) <= 1e-6 * kappa) {
      double scale = -p.c.dot(x);
      std::vector<MatrixXd> Sx;
      ws.lmi_value(x, 0.0, Sx);
      double mineig = 0.0;
      for (int b = 0; b < nb; ++b) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(Sx[b], Eigen::EigenvaluesOnly);
        mineig = std::min(mineig, es.eigenvalues().minCoeff());
      }
      double viol = (ne ? Ex.norm() : 0.0) + std::max(0.0, -mineig);
      double certres = viol / scale;
      if (certres <= std::max(opts.tol * 100, 1e-7)) {
        sol.status = SdpStatus::DualInfeasible;
        sol.x = x / scale;
        sol.cert_res = certres;
        sol.iterations = iter;
        return sol;
      }
    }

    if (iter == opts.max_iters) break;
    // degenerate collapse of the embedding (no strictly complementary solution)
    if (tau < 1e-10 && kappa < 1e-10) break;

    if (!compute_scaling(S, Z, W)) break;
    kkt.factor(W);

    // adj(Y C Y) and the tau-coupled solve
    VectorXd adjYCY = VectorXd::Zero(nx);
    double CYCY = 0.0;
    for (int b = 0; b < nb; ++b) {
      const auto& blk = p.blocks[b];
      MatrixXd C = MatrixXd::Zero(blk.side, blk.side);
      for (const auto& e : blk.constant) C(e.row, e.col) = e.val;
      YCY[b] = W[b].Y * C * W[b].Y;
      for (int j = 0; j < nx; ++j) {
        double s = 0.0;
        for (const auto& e : blk.coef[j]) s += e.val * YCY[b](e.row, e.col);
        adjYCY[j] += s;
      }
      for (const auto& e : blk.constant) CYCY += e.val * YCY[b](e.row, e.col);
    }
    VectorXd qhat = -(adjYCY + p.c);
    VectorXd vx, vh;
    kkt.solve_refined(W, qhat, p.eq_rhs, vx, vh);

    for (int b = 0; b < nb; ++b) YrgY[b] = W[b].Y * rg[b] * W[b].Y;
    VectorXd adjYrgY;
    ws.lmi_adjoint(YrgY, adjYrgY);
    double CYrgY = 0.0;
    for (int b = 0; b < nb; ++b)
      for (const auto& e : p.blocks[b].constant) CYrgY += e.val * YrgY[b](e.row, e.col);

    double dtau = 0.0, dkappa = 0.0;
    VectorXd dx, dyhat;

    auto newton = [&](double sigma, bool use_corr, double dtau_aff, double dkap_aff) {
      double eta = 1.0 - sigma;
      // scaled complementarity rhs and V = R^-T (Dlam^-1 o RHS) R^-1
      VectorXd adjV;
      {
        std::vector<MatrixXd> tmp(nb);
        for (int b = 0; b < nb; ++b) {
          const auto& w = W[b];
          int m = p.blocks[b].side;
          MatrixXd RHS = MatrixXd::Zero(m, m);
          RHS.diagonal() = -w.lam.cwiseProduct(w.lam);
          RHS.diagonal().array() += sigma * mu;
          if (use_corr) {
            MatrixXd prod = dSs_aff[b] * dZs_aff[b];
            RHS -= 0.5 * (prod + prod.transpose());
          }
          MatrixXd T(m, m);
          for (int i = 0; i < m; ++i)
            for (int j2 = 0; j2 < m; ++j2)
              T(i, j2) = RHS(i, j2) / (0.5 * (w.lam[i] + w.lam[j2]));
          V[b] = w.Rinv.transpose() * T * w.Rinv;
          tmp[b] = V[b];
        }
        ws.lmi_adjoint(tmp, adjV);
      }
      VectorXd r1 = eta * rd + adjV - eta * adjYrgY;
      VectorXd r2 = ne ? VectorXd(-eta * rp) : VectorXd();
      VectorXd ux, uh;
      kkt.solve_refined(W, r1, r2, ux, uh);

      double CV = 0.0;
      for (int b = 0; b < nb; ++b)
        for (const auto& e : p.blocks[b].constant) CV += e.val * V[b](e.row, e.col);
      double corr_tk = use_corr ? dtau_aff * dkap_aff : 0.0;
      double a = p.c.dot(vx) + (ne ? p.eq_rhs.dot(vh) : 0.0) - adjYCY.dot(vx) - CYCY -
                 kappa / tau;
      double b0 = p.c.dot(ux) + (ne ? p.eq_rhs.dot(uh) : 0.0) + CV - eta * CYrgY -
                  adjYCY.dot(ux) + (sigma * mu - tau * kappa - corr_tk) / tau;
      dtau = (-eta * rt - b0) / a;
      dx = ux + dtau * vx;
      dyhat = ne ? VectorXd(uh + dtau * vh) : VectorXd();
      dkappa = (sigma * mu - tau * kappa - corr_tk - kappa * dtau) / tau;

      for (int b = 0; b < nb; ++b) {
        const auto& blk = p.blocks[b];
        const auto& w = W[b];
        MatrixXd D = MatrixXd::Zero(blk.side, blk.side);
        for (const auto& e : blk.constant) D(e.row, e.col) += dtau * e.val;
        for (int j = 0; j < nx; ++j) {
          if (blk.coef[j].empty() || dx[j] == 0.0) continue;
          for (const auto& e : blk.coef[j]) D(e.row, e.col) += dx[j] * e.val;
        }
        dS[b] = eta * rg[b] + D;
        dS[b] = 0.5 * (dS[b] + dS[b].transpose());
        dSs[b] = w.Rinv * dS[b] * w.Rinv.transpose();
        dSs[b] = 0.5 * (dSs[b] + dSs[b].transpose());
        int m = blk.side;
        MatrixXd RHS = MatrixXd::Zero(m, m);
        RHS.diagonal() = -w.lam.cwiseProduct(w.lam);
        RHS.diagonal().array() += sigma * mu;
        if (use_corr) {
          MatrixXd prod = dSs_aff[b] * dZs_aff[b];
          RHS -= 0.5 * (prod + prod.transpose());
        }
        MatrixXd T(m, m);
        for (int i = 0; i < m; ++i)
          for (int j2 = 0; j2 < m; ++j2)
            T(i, j2) = RHS(i, j2) / (0.5 * (w.lam[i] + w.lam[j2]));
        dZs[b] = T - dSs[b];
        dZs[b] = 0.5 * (dZs[b] + dZs[b].transpose());
        dZ[b] = w.Rinv.transpose() * dZs[b] * w.Rinv;
        dZ[b] = 0.5 * (dZ[b] + dZ[b].transpose());
      }
    };

    // predictor
    newton(0.0, false, 0.0, 0.0);
    double alpha = 1.0;
    for (int b = 0; b < nb; ++b) {
      alpha = max_step_scaled(W[b].lam, dSs[b], alpha);
      alpha = max_step_scaled(W[b].lam, dZs[b], alpha);
    }
    if (dtau < 0) alpha = std::min(alpha, -tau / dtau);
    if (dkappa < 0) alpha = std::min(alpha, -kappa / dkappa);
    double mu_aff = (szdot + alpha * (block_inner(dS, Z) + block_inner(S, dZ)) +
                     alpha * alpha * block_inner(dS, dZ) +
                     (tau + alpha * dtau) * (kappa + alpha * dkappa)) /
                    nu;
    double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);
    for (int b = 0; b < nb; ++b) {
      dSs_aff[b] = dSs[b];
      dZs_aff[b] = dZs[b];
    }
    double dtau_aff = dtau, dkap_aff = dkappa;

    // corrector
    newton(sigma, true, dtau_aff, dkap_aff);
    alpha = 1.0;
    for (int b = 0; b < nb; ++b) {
      alpha = max_step_scaled(W[b].lam, dSs[b], alpha);
      alpha = max_step_scaled(W[b].lam, dZs[b], alpha);
    }
    if (dtau < 0) alpha = std::min(alpha, -tau / dtau);
    if (dkappa < 0) alpha = std::min(alpha, -kappa / dkappa);
    alpha *= opts.step_frac;
    if (!std::isfinite(alpha) || alpha <= 1e-14) break;

    x += alpha * dx;
    if (ne) y -= alpha * dyhat;  // KKT system solves for yhat = -dy
    for (int b = 0; b < nb; ++b) {
      S[b] += alpha * dS[b];
      Z[b] += alpha * dZ[b];
      S[b] = 0.5 * (S[b] + S[b].transpose());
      Z[b] = 0.5 * (Z[b] + Z[b].transpose());
    }
    tau += alpha * dtau;
    kappa += alpha * dkappa;
    sol.iterations = iter + 1;
  }

  // no full-accuracy convergence: report the best iterate seen
  if (best.score < 1e300 && best.tau > 1e-10 && best.x.allFinite()) {
    x = best.x;
    y = best.y;
    S = best.S;
    Z = best.Z;
    tau = best.tau;
    kappa = best.kappa;
    SdpStatus st = best.score <= opts.near_tol ? SdpStatus::NearOptimal : SdpStatus::Failed;
    record_point(st, best.pobj, best.dobj, best.gap, best.pres, best.dres, best.iter);
    return sol;
  }
  sol.status = SdpStatus::Failed;
  return sol;
}

void write_sdpa(const SdpProblem& p, std::ostream& os) {
  int ne = static_cast<int>(p.eq_rows.size());
  int nblocks = static_cast<int>(p.blocks.size()) + (ne > 0 ? 1 : 0);
  os << "* " << (p.name.empty() ? "moment relaxation" : p.name) << "\n";
  os << p.nvars << " = mDIM\n";
  os << nblocks << " = nBLOCK\n";
  for (std::size_t b = 0; b < p.blocks.size(); ++b)
    os << p.blocks[b].side << (b + 1 < p.blocks.size() || ne ? " " : "");
  if (ne) os << -2 * ne;
  os << " = bLOCKsTRUCT\n";
  for (int j = 0; j < p.nvars; ++j) os << p.c[j] << (j + 1 < p.nvars ? " " : "");
  os << "\n";
  auto emit = [&os](int mat, int blk, int r, int c, double v) {
    if (v == 0.0) return;
    if (r > c) return;  // upper triangle only
    os << mat << " " << blk << " " << (r + 1) << " " << (c + 1) << " " << v << "\n";
  };
  // SDPA: X = sum_j x_j F_j - F0 >= 0, so F_j = A_j and F0 = -C
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    for (const auto& e : p.blocks[b].constant) emit(0, static_cast<int>(b) + 1, e.row, e.col, -e.val);
    for (int j = 0; j < p.nvars; ++j)
      for (const auto& e : p.blocks[b].coef[j]) emit(j + 1, static_cast<int>(b) + 1, e.row, e.col, e.val);
  }
  if (ne) {
    int blk = static_cast<int>(p.blocks.size()) + 1;
    for (int r = 0; r < ne; ++r) {
      emit(0, blk, 2 * r, 2 * r, p.eq_rhs[r]);
      emit(0, blk, 2 * r + 1, 2 * r + 1, -p.eq_rhs[r]);
      for (const auto& [j, v] : p.eq_rows[r].terms) {
        emit(j + 1, blk, 2 * r, 2 * r, v);
        emit(j + 1, blk, 2 * r + 1, 2 * r + 1, -v);
      }
    }
  }
}

}  // namespace gne::sdp
