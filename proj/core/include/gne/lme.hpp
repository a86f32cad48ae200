#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gne/model.hpp"
#include "gne/poly.hpp"

namespace gne::lme {

using model::Gnep;
using poly::Polynomial;
using poly::RationalFunction;

struct LmeError : poly::PolyError {
  using poly::PolyError::PolyError;
};
struct TemplateMismatch : LmeError {
  using LmeError::LmeError;
};
struct LmeNotFound : LmeError {
  using LmeError::LmeError;
};

// G_i(x) of the critical-pair system: (n_i + m_i) x m_i, gradients on top of
// the complementarity diagonal; fhat is the player's gradient block over zeros.
struct CriticalPairSystem {
  int player = 0;
  int ni = 0;
  int mi = 0;
  std::vector<std::vector<Polynomial>> G;  // G[row][col]
  std::vector<RationalFunction> fhat;
};

CriticalPairSystem build_critical_system(const Gnep& g, int player);

struct LmeResult {
  // T (m x (n_i+m)) and q with T G = q I as a polynomial identity; for
  // explicit multiplier lists T may be empty (tau given directly)
  std::vector<std::vector<Polynomial>> T;
  Polynomial q;
  bool q_positive = false;
  std::vector<RationalFunction> tau;  // one per multiplier slot, file order
  int degree_used = -1;               // degree of T/q for the linear solve path
  std::string provenance;             // auto-d<k> | box | simplex | ball | explicit
};

// linear solve of T G = q I at fixed degree d; nullopt when every solution
// forces q identically zero
std::optional<LmeResult> solve_lme_linear(const Gnep& g, int player, int degree,
                                          std::mt19937_64& rng);

// tries degrees 0..max_degree
LmeResult lme_auto(const Gnep& g, int player, int max_degree, std::mt19937_64& rng);

LmeResult lme_box(const Gnep& g, int player);
LmeResult lme_simplex(const Gnep& g, int player);
LmeResult lme_ball(const Gnep& g, int player);
LmeResult lme_explicit(const Gnep& g, int player);

// dispatch on the player's lme_spec
LmeResult build_lme(const Gnep& g, int player, std::mt19937_64& rng);

// max |(T G - q I)(x)| entry over sample points (identity check)
double identity_residual(const Gnep& g, int player, const LmeResult& r, int npoints,
                         std::mt19937_64& rng);

// Cleared polynomial KKT contributions of one player.
struct KktPieces {
  std::vector<Polynomial> stationarity;    // n_i polynomials, = 0 (zeros dropped)
  std::vector<Polynomial> complementarity; // one per multiplier slot, = 0
  std::vector<Polynomial> sign_conditions; // one per weak-inequality slot, >= 0
};

KktPieces build_kkt_pieces(const Gnep& g, int player, const LmeResult& lme);

}  // namespace gne::lme
