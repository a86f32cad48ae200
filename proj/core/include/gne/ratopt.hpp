#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "gne/momsos.hpp"
#include "gne/poly.hpp"
#include "gne/sdp.hpp"

namespace gne::ratopt {

using momsos::SemialgebraicSet;
using poly::Polynomial;

// min a1(x)/a2(x) over K given by eqs = 0, ineqs >= 0, stricts > 0,
// with a2 > 0 on K.
struct RationalProgram {
  Polynomial a1;
  Polynomial a2;
  SemialgebraicSet K;
};

enum class RatStatus {
  MinimizersFound,
  InfeasibleCertified,
  ValueOnlyOnClosure,
  Inconclusive,
};

const char* to_string(RatStatus s);

struct Tolerances {
  double tol_rank = 1e-6;
  double tol_feas = 1e-6;     // membership tolerance for eqs/ineqs
  double tol_strict = 1e-6;   // classification threshold for stricts and a2
};

struct RatOptOutcome {
  RatStatus status = RatStatus::Inconclusive;
  double value = 0.0;                         // relaxation bound at the last order
  bool bound_certified = false;               // value came from a converged SDP
  std::vector<Eigen::VectorXd> minimizers;    // members of K
  std::vector<Eigen::VectorXd> closure_atoms; // members of K1 \ K
  int order = 0;                              // relaxation order reached
  int flat_t = 0;
  int sdp_iterations = 0;
  std::string note;
};

struct SolveControls {
  int k_max_extra = 3;  // orders beyond the minimal d0
  Tolerances tol;
  sdp::SdpOptions sdp;
};

RatOptOutcome solve_rational(const RationalProgram& prog, const SolveControls& ctl,
                             std::mt19937_64& rng);

enum class MasterStatus { MinimizerFound, InfeasibleCertified, BoundaryAtom, Inconclusive };

struct MasterOutcome {
  MasterStatus status = MasterStatus::Inconclusive;
  Eigen::VectorXd point;   // minimizer, or the closure atom for BoundaryAtom
  double value = 0.0;
  int order = 0;
  int sdp_iterations = 0;
  std::string note;
};

// Minimizes a coercive quadratic theta over the set (a2 = 1); the relaxation
// is declared tight only when some moment matrix has numeric rank one, in
// which case the minimizer is read off the first-order moments.
MasterOutcome minimize_quadratic_master(const Polynomial& theta, const SemialgebraicSet& K,
                                        const SolveControls& ctl, std::mt19937_64& rng);

// Upper bound for max theta over K intersected with {theta <= cap}; used by
// the enumeration sweep. Returns the bound from the moment relaxation.
struct MaxBound {
  bool infeasible = false;
  bool valid = false;
  double bound = 0.0;
};
MaxBound bound_max_quadratic(const Polynomial& theta, const SemialgebraicSet& K, double cap,
                             const SolveControls& ctl);

// residual-based membership report for a point
struct Membership {
  double eq_violation = 0.0;      // max |p(z)|
  double ineq_violation = 0.0;    // max(0, -q(z))
  double strict_margin = 1e300;   // min over stricts of q(z)
};
Membership check_membership(const SemialgebraicSet& K, const Eigen::VectorXd& z);

// Gauss-Newton refinement onto the equalities and active inequalities of K;
// returns the input point unchanged when no improvement is possible
Eigen::VectorXd polish_point(const SemialgebraicSet& K, Eigen::VectorXd z,
                             double active_tol = 1e-3, int max_iters = 40);

}  // namespace gne::ratopt
