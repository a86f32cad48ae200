#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gne/model.hpp"
#include "gne/momsos.hpp"
#include "gne/poly.hpp"

namespace gne::extend {

using model::Gnep;
using poly::Polynomial;
using poly::RationalFunction;

struct ExtendError : poly::PolyError {
  using poly::PolyError::PolyError;
};
struct AnchorInfeasible : ExtendError {
  using ExtendError::ExtendError;
};
struct ExtensionUnavailable : ExtendError {
  using ExtendError::ExtendError;
};

enum class Provenance { BoxForm, SimplexForm, BallForm, Interpolated, SosCertified, Identity, Explicit };

const char* to_string(Provenance p);

struct Extension {
  std::vector<RationalFunction> p;  // length n_i, functions of the joint x
  Provenance provenance;
  Eigen::VectorXd u;                // anchor point
  int player = 0;
  Eigen::VectorXd v;                // anchor value p(u) = v
  std::string note;
};

// anchor data shared by all constructors
struct Triple {
  Eigen::VectorXd u;  // full joint point, in K
  int player;
  Eigen::VectorXd v;  // minimizer of the player's check problem, length n_i
};

Extension extend_box(const Gnep& g, const Triple& t);
Extension extend_simplex(const Gnep& g, const Triple& t);
Extension extend_ball(const Gnep& g, const Triple& t);

// constant map p = v; valid whenever the player's feasible set does not
// depend on the other players (the NEP case)
Extension extend_constant(const Gnep& g, const Triple& t);

// polynomial interpolation through the nodes (Theorem-style construction):
// p(u) = v, p(z) = z_i for z in nodes \ {u}; validated against the kkt-set
// description via quadratic module membership before acceptance.
struct KktDescription {
  std::vector<Polynomial> eqs;
  std::vector<Polynomial> ineqs;  // weak and strict members together
};
Extension extend_interpolate(const Gnep& g, const Triple& t,
                             const std::vector<Eigen::VectorXd>& nodes,
                             const KktDescription& kkt, int degree_cap,
                             const sdp::SdpOptions& sdp_opts);

// the sos feasibility system over the kkt-set description; requires every
// constraint of the player to be linear in its own block
Extension extend_sos(const Gnep& g, const Triple& t, const KktDescription& kkt,
                     int half_degree, const Polynomial& h,
                     const sdp::SdpOptions& sdp_opts);

// explicit expressions from the problem file with the anchor placeholders
// u{i}_{j}, v{i}_{j} and normv{i} substituted numerically
Extension extend_explicit(const Gnep& g, const Triple& t);

// dispatch: explicit spec first, then constant map for NEP players, matching
// closed forms, the sos system for linear-in-own-block constraints, and
// finally interpolation over the accumulated nodes
Extension extend_auto(const Gnep& g, const Triple& t,
                      const std::vector<Eigen::VectorXd>& trace_nodes,
                      const KktDescription& kkt, const sdp::SdpOptions& sdp_opts);

// || p(u) - v ||, for the anchor-exactness checks
double anchor_error(const Extension& e);

}  // namespace gne::extend
