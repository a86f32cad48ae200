#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gne/expr.hpp"
#include "gne/poly.hpp"

namespace gne::model {

using poly::Polynomial;
using poly::RationalFunction;
using poly::Relation;
using poly::VarLayout;

enum class ConstraintKind { Equality, WeakIneq, StrictIneq };

struct Constraint {
  RationalFunction original;
  Polynomial cleared;      // polynomial form used by the KKT machinery
  ConstraintKind kind;
  bool squared = false;    // clearing multiplied by an undeclared denominator
  std::string text;        // source form, for reports
};

struct LmeSpec {
  enum class Kind { Auto, Box, Simplex, Ball, Explicit } kind = Kind::Auto;
  // box(a...;b...), simplex(l...;u), ball(a...;c...;r;R): parameter lists as
  // parsed; empty lists mean "infer from the constraints".
  std::vector<std::vector<RationalFunction>> params;
  // Explicit: row-major entries of T (m x (n_i+m)) followed by q, or exactly
  // m_i rational expressions for tau directly.
  std::vector<RationalFunction> exprs;
};

struct ExtensionSpec {
  enum class Kind { Auto, Box, Simplex, Ball, Explicit } kind = Kind::Auto;
  // Explicit extension expressions keep their text: they may reference the
  // anchor placeholders u{i}_{j}, v{i}_{j} and normv{i}, substituted at solve
  // time before parsing.
  std::vector<std::string> exprs;
};

struct PlayerProblem {
  RationalFunction objective;
  std::vector<Constraint> constraints;   // file order
  LmeSpec lme;
  ExtensionSpec extension;
  // indices into `constraints` of the equality/weak members, in file order;
  // multiplier slot j belongs to constraints[kkt_index[j]]
  std::vector<int> kkt_index;
  int m() const { return static_cast<int>(kkt_index.size()); }
};

struct SolverConfig {
  std::uint64_t seed = 0;
  int max_loops = 12;
  int max_order = 3;        // extra relaxation orders beyond the minimal d0
  double tol_delta = 1e-6;
  double tol_kappa = 1e-6;
  double tol_rank = 1e-6;
  double tol_strict = 1e-6;
  double zeta0 = 1e-2;
  double zeta_min = 1e-8;
  int lme_max_degree = 3;
  int sdp_max_iters = 200;
};

struct Gnep {
  VarLayout layout;
  std::vector<PlayerProblem> players;
  std::vector<Polynomial> declared_positive;
  SolverConfig config;
};

struct ModelError : poly::PolyError {
  ModelError(std::string msg, int line = 0, int col = 0)
      : poly::PolyError(std::move(msg)), line(line), col(col) {}
  int line, col;
};
struct SyntaxError : ModelError {
  using ModelError::ModelError;
};
struct UnknownVariable : ModelError {
  using ModelError::ModelError;
};
struct DanglingDenominator : ModelError {
  using ModelError::ModelError;
};

// Parses the line-oriented problem grammar. Throws SyntaxError /
// UnknownVariable / DanglingDenominator with source positions.
Gnep parse_problem(const std::string& text);

// Serializes back into the grammar; parse(print(g)) is structurally equal.
std::string print_problem(const Gnep& g);

struct Diagnostic {
  enum class Severity { Error, Warning } severity;
  std::string message;
};

std::vector<Diagnostic> validate(const Gnep& g);

// true when every constraint of every player is independent of the other
// players' variables (the NEP case)
bool is_nep(const Gnep& g);

// --- constraint shape matchers (shared by validation, lme and extend) -------
//
// All matchers look only at the equality/weak constraints (the multiplier
// slots) of the given player and require every slot to be matched. Scales
// record g_file = scale * g_canonical so multipliers can be rescaled.

struct BoxShape {
  // per coordinate j: a_j(x_-i) <= x_{i,j} <= b_j(x_-i)
  std::vector<RationalFunction> lower, upper;
  std::vector<int> lower_slot, upper_slot;   // multiplier slots
  std::vector<double> lower_scale, upper_scale;
};
std::optional<BoxShape> match_box(const Gnep& g, int player);

struct SimplexShape {
  // u(x_-i) >= e'x_i (after normalization), x_{i,j} >= l_j(x_-i)
  RationalFunction cap_u;
  std::vector<RationalFunction> lower;
  int cap_slot = -1;
  std::vector<int> lower_slot;
  double cap_scale = 1.0;
  std::vector<double> lower_scale;
};
std::optional<SimplexShape> match_simplex(const Gnep& g, int player);

struct BallShape {
  // single constraint R(x_-i) - phi >= 0 (or == 0) where every term of phi
  // has the same degree hom_degree >= 1 in the player's block
  Polynomial R;
  Polynomial phi;
  int hom_degree = 0;
  int upper_slot = -1;
  double upper_scale = 1.0;
  // annulus: additionally phi - r(x_-i) >= 0
  bool annulus = false;
  Polynomial r_low;
  int lower_slot = -1;
  double lower_scale = 1.0;
  // Euclidean data when phi = ||x_i||^2: R2 = R as the squared radius
  bool euclidean = false;
};
std::optional<BallShape> match_ball(const Gnep& g, int player);

// square root of a polynomial that is a perfect square of a linear (or
// constant) polynomial; nullopt otherwise
std::optional<Polynomial> linear_sqrt(const Polynomial& p);

}  // namespace gne::model
