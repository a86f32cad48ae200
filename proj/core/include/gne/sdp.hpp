#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

namespace gne::sdp {

// Affine/LMI form natural for moment relaxations:
//   min  c'x
//   s.t. E x = f
//        S_b(x) = C_b + sum_j x_j A_{b,j}  PSD   for every block b.
// Entries are stored as full symmetric triplet lists.

struct Entry {
  int row;
  int col;
  double val;
};

struct BlockLMI {
  int side = 0;
  // coef[j] lists the symmetric entries of A_{b,j}; empty vectors allowed
  std::vector<std::vector<Entry>> coef;
  std::vector<Entry> constant;  // C_b
};

struct SparseRow {
  std::vector<std::pair<int, double>> terms;  // (variable, coefficient)
};

struct SdpProblem {
  int nvars = 0;
  Eigen::VectorXd c;
  std::vector<SparseRow> eq_rows;
  Eigen::VectorXd eq_rhs;
  std::vector<BlockLMI> blocks;
  std::string name;
};

enum class SdpStatus { Optimal, NearOptimal, PrimalInfeasible, DualInfeasible, Failed };

const char* to_string(SdpStatus s);

struct SdpOptions {
  int max_iters = 200;
  double tol = 1e-8;
  double near_tol = 1e-6;
  double step_frac = 0.98;
  bool verbose = false;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::Failed;
  Eigen::VectorXd x;                    // primal variables (or dual-infeasibility ray)
  std::vector<Eigen::MatrixXd> Z;       // dual PSD matrices (or part of the infeasibility ray)
  Eigen::VectorXd eq_dual;              // multipliers for E x = f (or ray)
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  int iterations = 0;
  double gap = 0.0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double cert_res = 0.0;                // residual of the infeasibility certificate
};

SdpSolution solve_sdp(const SdpProblem& p, const SdpOptions& opts = {});

// Sparse SDPA (.dat-s) text dump; equalities are written as paired diagonal
// inequalities in a trailing diagonal block.
void write_sdpa(const SdpProblem& p, std::ostream& os);

}  // namespace gne::sdp
