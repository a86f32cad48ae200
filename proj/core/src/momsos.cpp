#include "gne/momsos.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>

namespace gne::momsos {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double apply(const Polynomial& f, const Tms& y) {
  double s = 0.0;
  const auto& tab = y.table();
  for (const auto& [m, c] : f.terms()) s += c * y.vals[tab.index(m)];
  return s;
}

Tms moments_of_atoms(int n, int k, const std::vector<Eigen::VectorXd>& atoms,
                     const std::vector<double>& weights) {
  Tms y;
  y.n = n;
  y.half_order = k;
  const auto& tab = y.table();
  y.vals.setZero(tab.size());
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    for (int i = 0; i < tab.size(); ++i) {
      const Mono& m = tab.mono(i);
      double v = weights[a];
      for (int j = 0; j < n; ++j)
        for (int e = 0; e < m[j]; ++e) v *= atoms[a][j];
      y.vals[i] += v;
    }
  }
  return y;
}

MatrixXd moment_matrix(const Tms& y, int k) {
  if (k > y.half_order) throw OrderTooLow("moment matrix order exceeds tms");
  const auto& rows = MonomialTable::get(y.n, k);
  const auto& tab = y.table();
  MatrixXd M(rows.size(), rows.size());
  for (int i = 0; i < rows.size(); ++i)
    for (int j = i; j < rows.size(); ++j) {
      double v = y.vals[tab.index(mono_mul(rows.mono(i), rows.mono(j)))];
      M(i, j) = v;
      M(j, i) = v;
    }
  return M;
}

MatrixXd localizing_matrix(const Polynomial& q, const Tms& y, int k) {
  int dq = std::max(q.degree(), 0);
  if (dq > 2 * y.half_order) throw OrderTooLow("localizing polynomial degree exceeds tms");
  int s = k - (dq + 1) / 2;
  if (s < 0) throw OrderTooLow("localizing matrix order too low");
  if (2 * s + dq > 2 * y.half_order) throw OrderTooLow("localizing entries exceed tms");
  const auto& rows = MonomialTable::get(y.n, s);
  const auto& tab = y.table();
  MatrixXd L(rows.size(), rows.size());
  auto terms = q.sorted_terms();
  for (int i = 0; i < rows.size(); ++i)
    for (int j = i; j < rows.size(); ++j) {
      Mono base = mono_mul(rows.mono(i), rows.mono(j));
      double v = 0.0;
      for (const auto& [m, c] : terms) v += c * y.vals[tab.index(mono_mul(base, m))];
      L(i, j) = v;
      L(j, i) = v;
    }
  return L;
}

int numeric_rank(const MatrixXd& m, double tol_rank) {
  if (m.rows() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv[0] : 0.0;
  if (smax <= 1e-14) return 0;
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > tol_rank * smax) ++r;
  return r;
}

int minimal_order(const SemialgebraicSet& K, const Polynomial& a1, const Polynomial& a2) {
  int d = std::max(std::max(a1.degree(), a2.degree()), 1);
  int d0 = (d + 1) / 2;
  auto bump = [&](const std::vector<Polynomial>& v) {
    for (const auto& g : v) d0 = std::max(d0, (std::max(g.degree(), 1) + 1) / 2);
  };
  bump(K.eqs);
  bump(K.ineqs);
  bump(K.stricts);
  return d0;
}

namespace {

void add_localizing_block(sdp::SdpProblem& prob, int n, const Polynomial& q, int k) {
  int s = k - (std::max(q.degree(), 0) + 1) / 2;
  if (s < 0) throw OrderTooLow("constraint degree exceeds relaxation order");
  const auto& rows = MonomialTable::get(n, s);
  const auto& tab = MonomialTable::get(n, 2 * k);
  sdp::BlockLMI blk;
  blk.side = rows.size();
  blk.coef.resize(prob.nvars);
  auto terms = q.sorted_terms();
  for (int i = 0; i < rows.size(); ++i)
    for (int j = i; j < rows.size(); ++j) {
      Mono base = mono_mul(rows.mono(i), rows.mono(j));
      std::map<int, double> acc;
      for (const auto& [m, c] : terms) acc[tab.index(mono_mul(base, m))] += c;
      for (const auto& [var, c] : acc) {
        if (c == 0.0) continue;
        blk.coef[var].push_back({i, j, c});
        if (i != j) blk.coef[var].push_back({j, i, c});
      }
    }
  prob.blocks.push_back(std::move(blk));
}

}  // namespace

MomentRelaxation assemble_relaxation(const SemialgebraicSet& K_in, const Polynomial& a1,
                                     const Polynomial& a2, int k) {
  // normalize constraint polynomials to unit leading scale; this changes
  // nothing semantically and keeps the SDP well conditioned
  SemialgebraicSet K = K_in;
  auto normalize = [](std::vector<Polynomial>& v) {
    for (auto& p : v) {
      double m = p.max_abs_coeff();
      if (m > 0) p *= 1.0 / m;
    }
  };
  normalize(K.eqs);
  normalize(K.ineqs);
  normalize(K.stricts);
  const int n = K.n;
  const auto& tab = MonomialTable::get(n, 2 * k);
  MomentRelaxation rel;
  rel.k = k;
  rel.n = n;
  sdp::SdpProblem& prob = rel.sdp;
  prob.nvars = tab.size();
  prob.c.setZero(prob.nvars);
  for (const auto& [m, c] : a1.sorted_terms()) prob.c[tab.index(m)] += c;

  {
    const auto& rows = MonomialTable::get(n, k);
    sdp::BlockLMI blk;
    blk.side = rows.size();
    blk.coef.resize(prob.nvars);
    for (int i = 0; i < rows.size(); ++i)
      for (int j = i; j < rows.size(); ++j) {
        int var = tab.index(mono_mul(rows.mono(i), rows.mono(j)));
        blk.coef[var].push_back({i, j, 1.0});
        if (i != j) blk.coef[var].push_back({j, i, 1.0});
      }
    prob.blocks.push_back(std::move(blk));
  }
  for (const auto& q : K.ineqs) add_localizing_block(prob, n, q, k);
  for (const auto& q : K.stricts) add_localizing_block(prob, n, q, k);

  // L_p[y] = 0 entrywise; entries with the same row*col monomial collapse
  for (const auto& p : K.eqs) {
    int s = k - (std::max(p.degree(), 0) + 1) / 2;
    if (s < 0) throw OrderTooLow("equality degree exceeds relaxation order");
    const auto& sums = MonomialTable::get(n, 2 * s);
    auto terms = p.sorted_terms();
    for (int i = 0; i < sums.size(); ++i) {
      std::map<int, double> acc;
      for (const auto& [m, c] : terms) acc[tab.index(mono_mul(sums.mono(i), m))] += c;
      sdp::SparseRow row;
      for (const auto& [var, c] : acc)
        if (c != 0.0) row.terms.emplace_back(var, c);
      if (!row.terms.empty()) prob.eq_rows.push_back(std::move(row));
    }
  }
  {
    std::map<int, double> acc;
    for (const auto& [m, c] : a2.sorted_terms()) acc[tab.index(m)] += c;
    sdp::SparseRow row;
    for (const auto& [var, c] : acc)
      if (c != 0.0) row.terms.emplace_back(var, c);
    prob.eq_rows.push_back(std::move(row));
  }
  prob.eq_rhs.setZero(static_cast<int>(prob.eq_rows.size()));
  prob.eq_rhs[static_cast<int>(prob.eq_rows.size()) - 1] = 1.0;
  return rel;
}

FlatTruncation flat_truncation(const Tms& y, int k, int d0, double tol_rank) {
  FlatTruncation out;
  for (int t = d0; t <= k; ++t) {
    MatrixXd Mt = moment_matrix(y, t);
    MatrixXd Mlow = moment_matrix(y, t - d0);
    int rt = numeric_rank(Mt, tol_rank);
    int rl = numeric_rank(Mlow, tol_rank);
    if (rt > 0 && rt == rl) {
      out.holds = true;
      out.t = t;
      out.rank = rt;
      return out;
    }
  }
  return out;
}

AtomicMeasure extract_atoms(const Tms& y, int t, int r, std::mt19937_64& rng,
                            double tol_rank) {
  const int n = y.n;
  if (r <= 0) throw ExtractionFailed("zero measure");
  MatrixXd Mt = moment_matrix(y, t);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Mt);
  const int N = static_cast<int>(Mt.rows());
  MatrixXd F(N, r);
  for (int i = 0; i < r; ++i) {
    double ev = es.eigenvalues()[N - 1 - i];
    if (ev <= 0) throw ExtractionFailed("rank deficiency during extraction");
    F.col(i) = es.eigenvectors().col(N - 1 - i) * std::sqrt(ev);
  }
  const auto& rows = MonomialTable::get(n, t);
  // pivot rows in graded order, restricted to degree <= t-1 so that
  // multiplication by a variable stays inside the table
  std::vector<int> pivots;
  MatrixXd ortho(r, 0);
  double fscale = F.norm();
  for (int i = 0; i < N && static_cast<int>(pivots.size()) < r; ++i) {
    if (t >= 1 && poly::mono_degree(rows.mono(i)) > t - 1) break;
    VectorXd v = F.row(i).transpose();
    VectorXd res = v;
    for (int c = 0; c < ortho.cols(); ++c) res -= ortho.col(c).dot(v) * ortho.col(c);
    if (res.norm() > tol_rank * std::max(1e-30, fscale)) {
      ortho.conservativeResize(Eigen::NoChange, ortho.cols() + 1);
      ortho.col(ortho.cols() - 1) = res / res.norm();
      pivots.push_back(i);
    }
  }
  if (static_cast<int>(pivots.size()) < r)
    throw ExtractionFailed("could not find a monomial basis of the right size");
  MatrixXd P(r, r);
  for (int i = 0; i < r; ++i) P.row(i) = F.row(pivots[i]);
  Eigen::ColPivHouseholderQR<MatrixXd> Pqr(P.transpose());
  // coords(m, :) solves F.row(m) = coords(m, :) * P
  MatrixXd coords = Pqr.solve(F.transpose()).transpose();  // N x r

  std::vector<MatrixXd> Nv(n, MatrixXd(r, r));
  for (int v = 0; v < n; ++v) {
    for (int j = 0; j < r; ++j) {
      Mono m = rows.mono(pivots[j]);
      Mono mv = m;
      mv[v] += 1;
      int idx = rows.find(mv);
      if (idx < 0) throw ExtractionFailed("basis monomial shift leaves the table");
      Nv[v].col(j) = coords.row(idx).transpose();
    }
  }
  std::normal_distribution<double> g(0.0, 1.0);
  AtomicMeasure out;
  for (int attempt = 0; attempt < 4 && out.atoms.empty(); ++attempt) {
    VectorXd w(n);
    for (int v = 0; v < n; ++v) w[v] = g(rng);
    w /= w.norm();
    MatrixXd Ncomb = MatrixXd::Zero(r, r);
    for (int v = 0; v < n; ++v) Ncomb += w[v] * Nv[v];
    Eigen::RealSchur<MatrixXd> schur(Ncomb);
    const MatrixXd& T = schur.matrixT();
    bool complex_block = false;
    for (int i = 0; i + 1 < r; ++i)
      if (std::abs(T(i + 1, i)) > 1e-7 * std::max(1.0, T.norm())) complex_block = true;
    if (complex_block) continue;
    const MatrixXd& Q = schur.matrixU();
    out.atoms.assign(r, VectorXd(n));
    for (int i = 0; i < r; ++i)
      for (int v = 0; v < n; ++v) out.atoms[i][v] = Q.col(i).dot(Nv[v] * Q.col(i));
  }
  if (out.atoms.empty()) throw ExtractionFailed("no real simultaneous diagonalization");

  const auto& full = MonomialTable::get(n, 2 * t);
  const auto& tab = y.table();
  for (int pass = 0; pass < 2; ++pass) {
    int ra = static_cast<int>(out.atoms.size());
    MatrixXd Vm(full.size(), ra);
    for (int c = 0; c < ra; ++c)
      for (int i = 0; i < full.size(); ++i) {
        const Mono& m = full.mono(i);
        double v = 1.0;
        for (int j = 0; j < n; ++j)
          for (int e = 0; e < m[j]; ++e) v *= out.atoms[c][j];
        Vm(i, c) = v;
      }
    VectorXd target(full.size());
    for (int i = 0; i < full.size(); ++i) target[i] = y.vals[tab.index(full.mono(i))];
    VectorXd mu = Vm.colPivHouseholderQr().solve(target);
    out.residual = (Vm * mu - target).norm();
    out.weights.assign(mu.data(), mu.data() + mu.size());
    double wmax = 0.0;
    for (double wv : out.weights) wmax = std::max(wmax, wv);
    std::vector<Eigen::VectorXd> keep;
    std::vector<double> kw;
    for (std::size_t i = 0; i < out.weights.size(); ++i)
      if (out.weights[i] > 1e-9 * std::max(1.0, wmax)) {
        keep.push_back(out.atoms[i]);
        kw.push_back(out.weights[i]);
      }
    if (keep.empty()) throw ExtractionFailed("all extracted weights non-positive");
    if (keep.size() == out.atoms.size()) break;
    out.atoms = keep;
    out.weights = kw;
  }
  return out;
}

std::optional<QmodCertificate> qmod_membership(const Polynomial& f,
                                               const std::vector<Polynomial>& eqs,
                                               const std::vector<Polynomial>& ineqs,
                                               int two_l, const sdp::SdpOptions& opts) {
  const int n = f.nvars();
  if (f.degree() > two_l) return std::nullopt;
  const int l = two_l / 2;
  const auto& full = MonomialTable::get(n, two_l);

  struct GramBlock {
    int half_deg;
    int side;
    int var0;
    const Polynomial* weight;  // nullptr for sigma_0
  };
  std::vector<std::pair<int, int>> ideal_vars;
  std::vector<int> used_eqs;
  int nv = 0;
  for (std::size_t e = 0; e < eqs.size(); ++e) {
    int de = std::max(eqs[e].degree(), 0);
    if (de > two_l || eqs[e].is_zero()) continue;
    const auto& tb = MonomialTable::get(n, two_l - de);
    ideal_vars.emplace_back(nv, tb.size());
    used_eqs.push_back(static_cast<int>(e));
    nv += tb.size();
  }
  std::vector<GramBlock> grams;
  {
    GramBlock g0{l, MonomialTable::get(n, l).size(), nv, nullptr};
    nv += g0.side * (g0.side + 1) / 2;
    grams.push_back(g0);
  }
  for (const auto& q : ineqs) {
    int dg = std::max(q.degree(), 0);
    if (dg > two_l || q.is_zero()) continue;
    GramBlock gb{l - (dg + 1) / 2, 0, nv, &q};
    if (gb.half_deg < 0) continue;
    gb.side = MonomialTable::get(n, gb.half_deg).size();
    nv += gb.side * (gb.side + 1) / 2;
    grams.push_back(gb);
  }

  sdp::SdpProblem prob;
  prob.nvars = nv;
  prob.c.setZero(nv);
  auto tri_index = [](int side, int r, int c) { return r * side - r * (r - 1) / 2 + (c - r); };
  for (const auto& gb : grams) {
    for (int d = 0; d < gb.side; ++d) prob.c[gb.var0 + tri_index(gb.side, d, d)] = 1.0;
    sdp::BlockLMI blk;
    blk.side = gb.side;
    blk.coef.resize(nv);
    for (int rr = 0; rr < gb.side; ++rr)
      for (int cc = rr; cc < gb.side; ++cc) {
        int var = gb.var0 + tri_index(gb.side, rr, cc);
        blk.coef[var].push_back({rr, cc, 1.0});
        if (rr != cc) blk.coef[var].push_back({cc, rr, 1.0});
      }
    prob.blocks.push_back(std::move(blk));
  }

  std::vector<std::map<int, double>> rows(full.size());
  for (std::size_t ie = 0; ie < used_eqs.size(); ++ie) {
    const Polynomial& h = eqs[used_eqs[ie]];
    const auto& tb = MonomialTable::get(n, two_l - std::max(h.degree(), 0));
    for (int ci = 0; ci < tb.size(); ++ci)
      for (const auto& [m, c] : h.sorted_terms())
        rows[full.index(mono_mul(tb.mono(ci), m))][ideal_vars[ie].first + ci] += c;
  }
  for (const auto& gb : grams) {
    const auto& basis = MonomialTable::get(n, gb.half_deg);
    std::vector<std::pair<Mono, double>> wterms;
    if (gb.weight)
      wterms = gb.weight->sorted_terms();
    else
      wterms = {{Mono(n, 0), 1.0}};
    for (int rr = 0; rr < gb.side; ++rr)
      for (int cc = rr; cc < gb.side; ++cc) {
        int var = gb.var0 + tri_index(gb.side, rr, cc);
        double mult = rr == cc ? 1.0 : 2.0;
        Mono bm = mono_mul(basis.mono(rr), basis.mono(cc));
        for (const auto& [m, c] : wterms)
          rows[full.index(mono_mul(bm, m))][var] += mult * c;
      }
  }
  prob.eq_rhs.setZero(full.size());
  for (int i = 0; i < full.size(); ++i) {
    sdp::SparseRow row;
    for (const auto& [var, c] : rows[i])
      if (c != 0.0) row.terms.emplace_back(var, c);
    prob.eq_rows.push_back(std::move(row));
    prob.eq_rhs[i] = f.coeff(full.mono(i));
  }

  auto sol = solve_sdp(prob, opts);
  if (sol.status == sdp::SdpStatus::PrimalInfeasible ||
      sol.status == sdp::SdpStatus::DualInfeasible)
    return std::nullopt;
  // a Failed status may still carry a usable point; the reconstruction check
  // below is the actual acceptance test
  if (sol.x.size() != nv || !sol.x.allFinite()) return std::nullopt;

  QmodCertificate cert;
  Polynomial recon(n);
  for (std::size_t ie = 0; ie < used_eqs.size(); ++ie) {
    const auto& tb = MonomialTable::get(n, two_l - std::max(eqs[used_eqs[ie]].degree(), 0));
    Polynomial mult(n);
    for (int ci = 0; ci < tb.size(); ++ci) {
      double v = sol.x[ideal_vars[ie].first + ci];
      if (v != 0.0) mult.add_term(tb.mono(ci), v);
    }
    mult.prune(1e-12);
    recon += mult * eqs[used_eqs[ie]];
    cert.ideal_multipliers.push_back(std::move(mult));
  }
  for (const auto& gb : grams) {
    MatrixXd G(gb.side, gb.side);
    for (int rr = 0; rr < gb.side; ++rr)
      for (int cc = rr; cc < gb.side; ++cc) {
        double v = sol.x[gb.var0 + tri_index(gb.side, rr, cc)];
        G(rr, cc) = v;
        G(cc, rr) = v;
      }
    const auto& basis = MonomialTable::get(n, gb.half_deg);
    Polynomial sos(n);
    for (int rr = 0; rr < gb.side; ++rr)
      for (int cc = 0; cc < gb.side; ++cc)
        sos.add_term(mono_mul(basis.mono(rr), basis.mono(cc)), G(rr, cc));
    sos.prune(1e-14);
    recon += gb.weight ? sos * (*gb.weight) : sos;
    cert.sos_grams.push_back(std::move(G));
    cert.sos_degrees.push_back(gb.half_deg);
  }
  Polynomial diff = recon - f;
  double scale = std::max({1.0, f.max_abs_coeff(), recon.max_abs_coeff()});
  cert.residual = diff.max_abs_coeff() / scale;
  if (cert.residual > 1e-6) return std::nullopt;
  return cert;
}

}  // namespace gne::momsos
