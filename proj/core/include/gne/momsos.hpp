#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <vector>

#include "gne/poly.hpp"
#include "gne/sdp.hpp"

namespace gne::momsos {

using poly::Mono;
using poly::MonomialTable;
using poly::Polynomial;
using poly::mono_mul;

struct MomsosError : poly::PolyError {
  using poly::PolyError::PolyError;
};
struct OrderTooLow : MomsosError {
  using MomsosError::MomsosError;
};

// Truncated multi-sequence of degree 2k over n variables, indexed by the
// graded alphabetical monomial table.
struct Tms {
  int n = 0;
  int half_order = 0;  // k; entries run over all |alpha| <= 2k
  Eigen::VectorXd vals;

  const MonomialTable& table() const { return MonomialTable::get(n, 2 * half_order); }
  double operator()(const Mono& m) const { return vals[table().index(m)]; }
};

// <f, y> = sum_a f_a y_a
double apply(const Polynomial& f, const Tms& y);

// moments of a finite atomic measure sum mu_i delta_{z_i}
Tms moments_of_atoms(int n, int k, const std::vector<Eigen::VectorXd>& atoms,
                     const std::vector<double>& weights);

Eigen::MatrixXd moment_matrix(const Tms& y, int k);
Eigen::MatrixXd localizing_matrix(const Polynomial& q, const Tms& y, int k);

// numeric rank with a relative singular value threshold
int numeric_rank(const Eigen::MatrixXd& m, double tol_rank);

struct SemialgebraicSet {
  int n = 0;
  std::vector<Polynomial> eqs;       // Psi_0
  std::vector<Polynomial> ineqs;     // Psi_1
  std::vector<Polynomial> stricts;   // Psi_2 (relaxed to weak in the SDP)
};

// minimal relaxation order d0 per the degree rule
int minimal_order(const SemialgebraicSet& K, const Polynomial& a1, const Polynomial& a2);

struct MomentRelaxation {
  int k = 0;
  int n = 0;
  sdp::SdpProblem sdp;
  // block 0 is the moment matrix; blocks 1.. follow ineqs then stricts
};

// k-th order moment relaxation of  min <a1,y> s.t. <a2,y> = 1,
// L_p[y] = 0 (p in eqs), L_q[y] >= 0 (q in ineqs+stricts), M_k[y] >= 0.
MomentRelaxation assemble_relaxation(const SemialgebraicSet& K, const Polynomial& a1,
                                     const Polynomial& a2, int k);

struct FlatTruncation {
  bool holds = false;
  int t = 0;
  int rank = 0;
};

FlatTruncation flat_truncation(const Tms& y, int k, int d0, double tol_rank);

struct AtomicMeasure {
  std::vector<Eigen::VectorXd> atoms;
  std::vector<double> weights;
  double residual = 0.0;
};

struct ExtractionFailed : MomsosError {
  using MomsosError::MomsosError;
};

// Henrion-Lasserre extraction from M_t[y] of rank r
AtomicMeasure extract_atoms(const Tms& y, int t, int r, std::mt19937_64& rng,
                            double tol_rank = 1e-6);

// membership certificate for f in Ideal[eqs]_{2l} + Qmod[ineqs]_{2l}
struct QmodCertificate {
  std::vector<Polynomial> ideal_multipliers;       // one per eq
  std::vector<Eigen::MatrixXd> sos_grams;          // gram of sigma_0, then per ineq
  std::vector<int> sos_degrees;                    // half-degrees of the gram bases
  double residual = 0.0;
};

std::optional<QmodCertificate> qmod_membership(const Polynomial& f,
                                               const std::vector<Polynomial>& eqs,
                                               const std::vector<Polynomial>& ineqs,
                                               int two_l,
                                               const sdp::SdpOptions& opts = {});

}  // namespace gne::momsos
