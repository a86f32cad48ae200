#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "gne/extend.hpp"
#include "gne/lme.hpp"
#include "gne/model.hpp"
#include "gne/momsos.hpp"
#include "gne/ratopt.hpp"

namespace gne::solver {

using model::Gnep;
using poly::Polynomial;

// polynomial description of the kkt set (stationarity, complementarity, sign
// conditions and the joint feasibility constraints), with per-member origins
struct KktSet {
  momsos::SemialgebraicSet base;
  std::vector<std::string> eq_origin;
  std::vector<std::string> ineq_origin;
  std::vector<std::string> strict_origin;
};

KktSet build_kkt_set(const Gnep& g, const std::vector<lme::LmeResult>& lmes);

// Theta = R'R from a seeded standard normal R, resampled until the condition
// number is moderate
Eigen::MatrixXd select_theta(int n, std::mt19937_64& rng, double cond_cap = 1e6);
Polynomial theta_polynomial(const Eigen::MatrixXd& theta);

enum class SolveStatus { GneFound, NoGneInKktSet, BoundaryOnly, Inconclusive };
const char* to_string(SolveStatus s);

struct PlayerCheck {
  int player = 0;
  bool known = false;           // delta determined
  double delta = 0.0;
  bool has_v = false;
  Eigen::VectorXd v;            // minimizer of the check problem (x_i space)
  std::vector<Eigen::VectorXd> closure_atoms;  // x_i space, strict-boundary points
  int order = 0;
  int sdp_iterations = 0;
  std::string note;
};

struct CutRecord {
  int player = 0;
  std::string extension_text;
  extend::Provenance provenance = extend::Provenance::Identity;
  Polynomial cut;
};

struct LoopTrace {
  int k = 0;
  Eigen::VectorXd u;
  double theta_u = 0.0;
  int master_order = 0;
  int master_sdp_iterations = 0;
  std::vector<PlayerCheck> checks;
  std::vector<int> active;    // label set of players failing their check
  std::vector<CutRecord> cuts;
  std::string note;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::Inconclusive;
  Eigen::VectorXd point;
  double delta = 0.0;
  double kappa = 0.0;
  int loops = 0;
  std::vector<Eigen::VectorXd> boundary_atoms;
  std::vector<LoopTrace> trace;
  std::string note;
};

struct EnumerationOutcome {
  std::vector<SolveOutcome> gnes;
  bool exhausted = false;
  std::string note;
  std::vector<LoopTrace> trace;  // concatenated traces of the runs
};

class GneSolver {
 public:
  explicit GneSolver(Gnep g);

  SolveOutcome solve();
  EnumerationOutcome enumerate_gnes();

  struct PointCheck {
    double delta = 0.0;
    double kappa = 0.0;
    bool strict_ok = true;
    bool is_gne = false;
    std::vector<PlayerCheck> checks;
  };
  // delta/kappa verification of a candidate point (plain per-player checks)
  PointCheck check_point(const Eigen::VectorXd& u);

  // the order-d0 moment relaxation of the current master problem
  sdp::SdpProblem first_master_relaxation();

  const Gnep& problem() const { return g_; }
  const KktSet& kkt() const { return kkt_; }
  const Eigen::MatrixXd& theta() const { return theta_; }
  const std::vector<Polynomial>& cuts() const { return cuts_; }
  const std::vector<lme::LmeResult>& lmes() const { return lmes_; }

 private:
  momsos::SemialgebraicSet master_set() const;
  ratopt::SolveControls controls() const;
  // per-player check problem in the player's own variables
  struct CheckProgram {
    ratopt::RationalProgram prog;
    bool objective_zero = false;
    bool infeasible_substitution = false;
  };
  CheckProgram build_check(int player, const Eigen::VectorXd& u, bool tightened) const;
  PlayerCheck run_check(int player, const Eigen::VectorXd& u, bool tightened,
                        std::mt19937_64& rng) const;
  double kappa_at(const Eigen::VectorXd& u) const;
  bool stricts_hold(const Eigen::VectorXd& u) const;
  extend::KktDescription kkt_description() const;

  Gnep g_;
  std::vector<lme::LmeResult> lmes_;
  KktSet kkt_;
  Eigen::MatrixXd theta_;
  Polynomial theta_poly_;
  std::mt19937_64 rng_;
  std::vector<Polynomial> cuts_;        // accumulated extension cuts
  std::vector<Polynomial> exclusions_;  // enumeration exclusion constraints
  std::vector<Eigen::VectorXd> nodes_;  // kkt points seen (interpolation data)
};

}  // namespace gne::solver
