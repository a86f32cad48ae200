#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "gne/lme.hpp"
#include "gne/model.hpp"

using namespace gne;
using namespace gne::lme;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

poly::Polynomial P(const std::string& s, const poly::VarLayout& lay) {
  return poly::parse_expression(s, lay).num();
}

// Brute-force critical pairs: solve stationarity + active-set equations by
// Newton iteration on random small instances, independent of the lme module.
struct CriticalPair {
  VectorXd x;        // full joint point
  VectorXd lambda;   // one entry per multiplier slot
};

std::vector<CriticalPair> brute_force_pairs(const model::Gnep& g, int player, int tries,
                                            std::mt19937_64& rng) {
  const auto& lay = g.layout;
  const auto& pl = g.players[player];
  const int n = lay.total();
  const int ni = lay.dim(player);
  const int mi = pl.m();
  std::normal_distribution<double> gd(0.0, 1.0);
  std::vector<CriticalPair> out;
  for (int t = 0; t < tries; ++t) {
    // random active subset of the multiplier slots
    std::vector<int> active;
    for (int j = 0; j < mi; ++j)
      if (pl.constraints[pl.kkt_index[j]].kind == model::ConstraintKind::Equality ||
          (rng() & 1))
        active.push_back(j);
    if (static_cast<int>(active.size()) > ni) continue;
    int na = static_cast<int>(active.size());
    // unknowns: x_i block and lambda over the active set
    VectorXd full(n);
    for (int v = 0; v < n; ++v) full[v] = gd(rng);
    VectorXd lam = VectorXd::Zero(na);
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
      // residual: stationarity (ni) + active constraints (na)
      VectorXd res(ni + na);
      MatrixXd J = MatrixXd::Zero(ni + na, ni + na);
      std::span<const double> pt(full.data(), static_cast<std::size_t>(n));
      for (int s = 0; s < ni; ++s) {
        double r = pl.objective.derivative(lay.flat(player, s)).eval(pt);
        for (int a = 0; a < na; ++a) {
          const auto& gc = pl.constraints[pl.kkt_index[active[a]]].cleared;
          r -= lam[a] * gc.derivative(lay.flat(player, s)).eval(pt);
        }
        res[s] = r;
        for (int s2 = 0; s2 < ni; ++s2) {
          double h = pl.objective.derivative(lay.flat(player, s))
                         .derivative(lay.flat(player, s2))
                         .eval(pt);
          for (int a = 0; a < na; ++a) {
            const auto& gc = pl.constraints[pl.kkt_index[active[a]]].cleared;
            h -= lam[a] * gc.derivative(lay.flat(player, s))
                              .derivative(lay.flat(player, s2))
                              .eval(pt);
          }
          J(s, s2) = h;
        }
        for (int a = 0; a < na; ++a) {
          const auto& gc = pl.constraints[pl.kkt_index[active[a]]].cleared;
          J(s, ni + a) = -gc.derivative(lay.flat(player, s)).eval(pt);
        }
      }
      for (int a = 0; a < na; ++a) {
        const auto& gc = pl.constraints[pl.kkt_index[active[a]]].cleared;
        res[ni + a] = gc.eval(pt);
        for (int s2 = 0; s2 < ni; ++s2)
          J(ni + a, s2) = gc.derivative(lay.flat(player, s2)).eval(pt);
      }
      // the multiplier identity is exact only at exact critical pairs, so
      // polish hard before accepting one
      if (res.norm() < 1e-13) {
        ok = true;
        break;
      }
      VectorXd step = J.fullPivLu().solve(res);
      if (!step.allFinite() || step.norm() > 1e6) break;
      for (int s = 0; s < ni; ++s) full[lay.flat(player, s)] -= step[s];
      lam -= step.segment(ni, na);
    }
    if (!ok) continue;
    // inactive slots must hold their constraints too for a genuine pair? The
    // multiplier identity of the lme is checked at exact critical pairs of the
    // active-set equations; inactive feasibility is not needed for it.
    CriticalPair cp;
    cp.x = full;
    cp.lambda = VectorXd::Zero(mi);
    for (int a = 0; a < na; ++a) cp.lambda[active[a]] = lam[a];
    out.push_back(cp);
  }
  return out;
}

void check_tau_against_pairs(const model::Gnep& g, int player, const LmeResult& lme,
                             const std::vector<CriticalPair>& pairs, int* checked) {
  for (const auto& cp : pairs) {
    std::span<const double> pt(cp.x.data(), static_cast<std::size_t>(cp.x.size()));
    double qv = 1.0;
    if (!lme.q.is_zero()) qv = lme.q.eval(pt);
    if (std::abs(qv) < 1e-6) continue;  // multiplier expression undefined here
    for (int j = 0; j < static_cast<int>(lme.tau.size()); ++j) {
      double tv;
      try {
        tv = lme.tau[j].eval(pt);
      } catch (const poly::DenominatorZero&) {
        continue;
      }
      CHECK(tv == doctest::Approx(cp.lambda[j]).epsilon(1e-6).scale(1.0));
      ++*checked;
    }
  }
}

}  // namespace

TEST_CASE("critical pair system matches the worked shape") {
  // g2 = (1 - x1 - x2, x2) with one-dimensional second player
  model::Gnep g = model::parse_problem(
      "players 2\ndims 1 1\n"
      "objective[1] = x1_1\nobjective[2] = x1_1*x2_1 + x2_1^2\n"
      "constraint[2]: 1 - x1_1 - x2_1 >= 0\nconstraint[2]: x2_1 >= 0\n");
  auto sys = build_critical_system(g, 1);
  REQUIRE(sys.ni == 1);
  REQUIRE(sys.mi == 2);
  poly::VarLayout lay({1, 1});
  CHECK(sys.G[0][0].approx_equal(P("-1", lay)));
  CHECK(sys.G[0][1].approx_equal(P("1", lay)));
  CHECK(sys.G[1][0].approx_equal(P("1 - x1_1 - x2_1", lay)));
  CHECK(sys.G[1][1].is_zero());
  CHECK(sys.G[2][0].is_zero());
  CHECK(sys.G[2][1].approx_equal(P("x2_1", lay)));

  // degree-1 linear solve reproduces a valid (T, q)
  std::mt19937_64 rng(3);
  auto r = solve_lme_linear(g, 1, 1, rng);
  REQUIRE(r.has_value());
  CHECK(identity_residual(g, 1, *r, 50, rng) < 1e-8);
}

TEST_CASE("single constraint x >= 0 solves at degree 0") {
  model::Gnep g = model::parse_problem(
      "players 1\ndims 1\nobjective[1] = x1_1^2 - x1_1\nconstraint[1]: x1_1 >= 0\n");
  std::mt19937_64 rng(1);
  auto r = solve_lme_linear(g, 0, 0, rng);
  REQUIRE(r.has_value());
  // T = [1, 0], q = 1 up to scaling: tau = f'
  CHECK(r->q.approx_equal(P("1", poly::VarLayout({1}))));
  std::vector<double> pt{0.7};
  CHECK(r->tau[0].eval(pt) == doctest::Approx(2 * 0.7 - 1.0));
}

TEST_CASE("ball player needs degree >= 1") {
  // ||x1||^2 <= x2_1^2: at degree 0 the identity forces q = 0
  model::Gnep g = model::parse_problem(
      "players 2\ndims 2 2\n"
      "objective[1] = -x1_1^2 - x2_1*x1_1\nobjective[2] = x2_1\n"
      "constraint[1]: x2_1^2 - x1_1^2 - x1_2^2 >= 0\n");
  std::mt19937_64 rng(5);
  CHECK(!solve_lme_linear(g, 0, 0, rng).has_value());
  auto r1 = solve_lme_linear(g, 0, 1, rng);
  REQUIRE(r1.has_value());
  CHECK(identity_residual(g, 0, *r1, 50, rng) < 1e-8);
}

TEST_CASE("m = 0 gives the empty expression with q = 1") {
  model::Gnep g =
      model::parse_problem("players 1\ndims 2\nobjective[1] = x1_1^2 + x1_2^2\n");
  std::mt19937_64 rng(1);
  auto r = lme_auto(g, 0, 3, rng);
  CHECK(r.tau.empty());
  CHECK(r.q.as_constant().value() == doctest::Approx(1.0));
}

TEST_CASE("box template matches the printed expressions and the kkt oracle") {
  model::Gnep g = model::parse_problem(
      "players 2\ndims 2 2\n"
      "positive: x1_2*x2_2 + 1\n"
      "objective[1] = -x1_1\n"
      "objective[2] = (3*x2_1*x2_2 - 2*x2_2) / (x1_2*x2_2 + 1)\n"
      "constraint[2]: x2_1 - 0.5 >= 0\n"
      "constraint[2]: 1 - x2_1 >= 0\n"
      "constraint[2]: x2_2 >= 0\n"
      "constraint[2]: x1_1 - x2_2 >= 0\n");
  auto r = lme_box(g, 1);
  std::mt19937_64 rng(7);
  CHECK(identity_residual(g, 1, r, 200, rng) < 1e-8);
  // lambda_{2,1} = (2 - 2 x2_1) df/dx21 at a generic point
  poly::VarLayout lay({2, 2});
  auto f2 = poly::parse_expression("(3*x2_1*x2_2 - 2*x2_2) / (x1_2*x2_2 + 1)", lay);
  std::vector<double> pt{0.8, -0.3, 0.7, 0.2};
  double df1 = f2.derivative(lay.flat(1, 0)).eval(pt);
  CHECK(r.tau[0].eval(pt) == doctest::Approx((2 - 2 * pt[2]) * df1).epsilon(1e-9));
  CHECK(r.tau[1].eval(pt) == doctest::Approx((1 - 2 * pt[2]) * df1).epsilon(1e-9));

  // against brute-force KKT pairs
  auto pairs = brute_force_pairs(g, 1, 60, rng);
  int checked = 0;
  check_tau_against_pairs(g, 1, r, pairs, &checked);
  CHECK(checked > 20);
}

TEST_CASE("box template at the analytic 1-d kkt point") {
  // min (x-2)^2 on [0,1]: minimizer x = 1 with multiplier 2 on 1 - x >= 0
  model::Gnep g = model::parse_problem(
      "players 1\ndims 1\nobjective[1] = x1_1^2 - 4*x1_1 + 4\n"
      "constraint[1]: x1_1 >= 0\nconstraint[1]: 1 - x1_1 >= 0\n");
  auto r = lme_box(g, 0);
  std::vector<double> pt{1.0};
  CHECK(r.tau[0].eval(pt) == doctest::Approx(0.0));   // lower bound inactive
  CHECK(r.tau[1].eval(pt) == doctest::Approx(2.0));   // -f' = 2
}

TEST_CASE("simplex template reproduces the worked linear-solve pick") {
  model::Gnep g = model::parse_problem(
      "players 2\ndims 1 1\n"
      "objective[1] = x1_1\nobjective[2] = x1_1*x2_1 + x2_1^2\n"
      "constraint[2]: 1 - x1_1 - x2_1 >= 0\nconstraint[2]: x2_1 >= 0\n");
  auto r = lme_simplex(g, 1);
  poly::VarLayout lay({1, 1});
  CHECK(r.q.approx_equal(P("1 - x1_1", lay)));
  // T rows per the hand construction: cap row (-x2, 1, 1), lower row (1-x1-x2, 1, 1)
  CHECK(r.T[0][0].approx_equal(P("-x2_1", lay)));
  CHECK(r.T[0][1].approx_equal(P("1", lay)));
  CHECK(r.T[0][2].approx_equal(P("1", lay)));
  CHECK(r.T[1][0].approx_equal(P("1 - x1_1 - x2_1", lay)));
  std::mt19937_64 rng(11);
  CHECK(identity_residual(g, 1, r, 100, rng) < 1e-10);
  auto pairs = brute_force_pairs(g, 1, 40, rng);
  int checked = 0;
  check_tau_against_pairs(g, 1, r, pairs, &checked);
  CHECK(checked > 10);
}

TEST_CASE("ball template matches the fractional quad game expression") {
  model::Gnep g = model::parse_problem(
      "players 2\ndims 2 2\n"
      "positive: x1_2*x2_2 + 1\n"
      "objective[1] = (-x1_1^2 - x2_1*x1_1) / (x1_2*x2_2 + 1)\n"
      "objective[2] = x2_1\n"
      "constraint[1]: x2_1^2 - x1_1^2 - x1_2^2 >= 0\n");
  auto r = lme_ball(g, 0);
  std::mt19937_64 rng(13);
  CHECK(identity_residual(g, 0, r, 200, rng) < 1e-9);
  // lambda_1 = -x_1' grad f_1 / (2 x21^2)
  poly::VarLayout lay({2, 2});
  auto f1 = poly::parse_expression("(-x1_1^2 - x2_1*x1_1) / (x1_2*x2_2 + 1)", lay);
  std::vector<double> pt{0.3, -0.6, 1.2, 0.4};
  double want = -(pt[0] * f1.derivative(0).eval(pt) + pt[1] * f1.derivative(1).eval(pt)) /
                (2 * pt[2] * pt[2]);
  CHECK(r.tau[0].eval(pt) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("homogeneous non-euclidean ball: cubic constraint") {
  // 1 + (e'x2)^2 - x11 x12 x13 >= 0 gives lambda = -x1' grad f / (3 R)
  model::Gnep g = model::parse_problem(
      "players 2\ndims 3 3\n"
      "objective[1] = x1_1^2 + x1_2*x1_3 + x1_1\n"
      "objective[2] = x2_1\n"
      "constraint[1]: 1 + (x2_1 + x2_2 + x2_3)^2 - x1_1*x1_2*x1_3 >= 0\n");
  auto r = lme_ball(g, 0);
  std::mt19937_64 rng(17);
  CHECK(identity_residual(g, 0, r, 100, rng) < 1e-9);
  poly::VarLayout lay({3, 3});
  auto f1 = poly::parse_expression("x1_1^2 + x1_2*x1_3 + x1_1", lay);
  std::vector<double> pt{0.5, 0.25, -0.4, 0.1, 0.2, -0.3};
  double e2 = pt[3] + pt[4] + pt[5];
  double want = -(pt[0] * f1.derivative(0).eval(pt) + pt[1] * f1.derivative(1).eval(pt) +
                  pt[2] * f1.derivative(2).eval(pt)) /
                (3 * (1 + e2 * e2));
  CHECK(r.tau[0].eval(pt) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("annulus template") {
  model::Gnep g = model::parse_problem(
      "players 2\ndims 2 2\n"
      "positive: x1_1^2 + 1\n"
      "objective[1] = (x2_2*x1_1^2 + x2_1*x1_2^2 + x1_1*x1_2) / (x1_1^2 + 1)\n"
      "objective[2] = x2_1\n"
      "constraint[1]: x1_1^2 + x1_2^2 - (1 - x2_1 - x2_2)^2 >= 0\n"
      "constraint[1]: 1 - x1_1^2 - x1_2^2 >= 0\n");
  auto r = lme_ball(g, 0);
  std::mt19937_64 rng(19);
  CHECK(identity_residual(g, 0, r, 200, rng) < 1e-8);
  auto pairs = brute_force_pairs(g, 0, 80, rng);
  int checked = 0;
  check_tau_against_pairs(g, 0, r, pairs, &checked);
  CHECK(checked > 6);
}

TEST_CASE("explicit (T, q) for the degenerate game passes the identity check") {
  // the convex game with a degenerate first player
  model::Gnep g = model::parse_problem(
      "players 2\ndims 2 2\n"
      "objective[1] = 2*x1_1 + x1_2\n"
      "objective[2] = (x1_1 + x2_1)^2 + (x1_2 + x2_2)^2\n"
      "constraint[1]: x1_1*x2_1 + x1_2*x2_2 >= 0\n"
      "constraint[1]: x1_1*x1_2 >= 0\n"
      "constraint[2]: x2_1 - 1 >= 0\n"
      "constraint[2]: x2_2 - 1 >= 0\n"
      "lme[1] = explicit(-x1_1*x1_2, 0, x1_2, x1_2, x1_1*x2_1 + x1_2*x2_2, 0, -x2_1, -x2_1, "
      "x1_2^2*x2_2)\n"
      "lme[2] = explicit(1, 0, 0, 0, 0, 1, 0, 0, 1)\n");
  auto r1 = lme_explicit(g, 0);
  CHECK(r1.q.approx_equal(P("x1_2^2*x2_2", poly::VarLayout({2, 2}))));
  std::mt19937_64 rng(23);
  CHECK(identity_residual(g, 0, r1, 100, rng) < 1e-9);
  auto r2 = lme_explicit(g, 1);
  CHECK(identity_residual(g, 1, r2, 100, rng) < 1e-9);
}

TEST_CASE("auto agrees with the template on the kkt variety") {
  model::Gnep g = model::parse_problem(
      "players 2\ndims 1 1\n"
      "objective[1] = x1_1\nobjective[2] = x1_1*x2_1 + x2_1^2\n"
      "constraint[2]: 1 - x1_1 - x2_1 >= 0\nconstraint[2]: x2_1 >= 0\n");
  std::mt19937_64 rng(29);
  auto rt = lme_simplex(g, 1);
  auto ra = lme_auto(g, 1, 2, rng);
  auto pairs = brute_force_pairs(g, 1, 60, rng);
  int against_template = 0, against_auto = 0;
  check_tau_against_pairs(g, 1, rt, pairs, &against_template);
  check_tau_against_pairs(g, 1, ra, pairs, &against_auto);
  CHECK(against_template > 10);
  CHECK(against_auto > 10);
}

TEST_CASE("random instances: auto lme reproduces brute-force multipliers") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gd(0.0, 1.0);
  int instances_done = 0, checked_total = 0;
  for (int inst = 0; inst < 80 && instances_done < 50; ++inst) {
    // random polynomial objective with simple affine constraints
    poly::VarLayout lay({2, 1});
    std::ostringstream spec;
    spec << "players 2\ndims 2 1\n";
    spec << "objective[1] = " << poly::format_double(gd(rng)) << "*x1_1^2 + "
         << poly::format_double(gd(rng)) << "*x1_2^2 + " << poly::format_double(gd(rng))
         << "*x1_1*x1_2 + " << poly::format_double(gd(rng)) << "*x1_1*x2_1 + "
         << poly::format_double(gd(rng)) << "*x1_2\n";
    spec << "objective[2] = x2_1^2\n";
    spec << "constraint[1]: " << poly::format_double(1.0 + std::abs(gd(rng)))
         << " - x1_1 - x1_2 >= 0\n";
    spec << "constraint[1]: x1_1 - " << poly::format_double(-1.0 - std::abs(gd(rng)))
         << " >= 0\n";
    model::Gnep g;
    try {
      g = model::parse_problem(spec.str());
    } catch (...) {
      continue;
    }
    LmeResult r;
    try {
      r = lme_auto(g, 0, 2, rng);
    } catch (const LmeNotFound&) {
      continue;
    }
    auto pairs = brute_force_pairs(g, 0, 20, rng);
    if (pairs.empty()) continue;
    int checked = 0;
    check_tau_against_pairs(g, 0, r, pairs, &checked);
    checked_total += checked;
    ++instances_done;
  }
  CHECK(instances_done >= 50);
  CHECK(checked_total > 200);
}
