#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gne/model.hpp"

using namespace gne;
using namespace gne::model;

namespace {

// the 2-player fractional quadratic game with a ball and a box player
const char* kQuad1 = R"(
# fractional quadratic game
players 2
dims 2 2
positive: x1_2*x2_2 + 1
objective[1] = (-x1_1^2 - x2_1*x1_1) / (x1_2*x2_2 + 1)
objective[2] = (3*x2_1*x2_2 - 2*x2_2) / (x1_2*x2_2 + 1)
constraint[1]: x2_1^2 - x1_1^2 - x1_2^2 >= 0
constraint[2]: x2_1 - 0.5 >= 0
constraint[2]: 1 - x2_1 >= 0
constraint[2]: x2_2 >= 0
constraint[2]: x1_1 - x2_2 >= 0
lme[1] = ball
lme[2] = box
extension[2] = box
)";

}  // namespace

TEST_CASE("parse counts for the quad game") {
  Gnep g = parse_problem(kQuad1);
  CHECK(g.layout.players() == 2);
  CHECK(g.layout.dim(0) == 2);
  CHECK(g.layout.dim(1) == 2);
  CHECK(g.players[0].m() == 1);
  CHECK(g.players[1].m() == 4);
  CHECK(g.declared_positive.size() == 1);
  auto diags = validate(g);
  for (const auto& d : diags) CHECK(d.severity != Diagnostic::Severity::Error);
}

TEST_CASE("empty constraint list is a valid unconstrained player") {
  Gnep g = parse_problem(
      "players 1\ndims 2\nobjective[1] = x1_1^2 + x1_2^2\n");
  CHECK(g.players[0].m() == 0);
  CHECK(validate(g).empty());
}

TEST_CASE("undeclared objective denominator raises DanglingDenominator") {
  CHECK_THROWS_AS(
      parse_problem("players 2\ndims 1 1\nobjective[1] = (x1_1)/(x2_1)\nobjective[2] = x2_1\n"),
      DanglingDenominator);
  // declaring it fixes the parse
  Gnep g = parse_problem(
      "players 2\ndims 1 1\npositive: x2_1\nobjective[1] = (x1_1)/(x2_1)\nobjective[2] = "
      "x2_1\n");
  CHECK(g.players[0].objective.den_positive());
  // a strict inequality guard works too
  Gnep g2 = parse_problem(
      "players 2\ndims 1 1\nobjective[1] = (x1_1)/(x2_1)\nobjective[2] = x2_1\n"
      "constraint[2]: x2_1 > 0\n");
  CHECK(g2.players[0].objective.den_positive());
}

TEST_CASE("rational constraints are cleared against declared denominators") {
  Gnep g = parse_problem(
      "players 2\ndims 2 2\n"
      "objective[1] = x1_1\nobjective[2] = x2_1\n"
      "constraint[1]: x1_1 - (x2_1)/(x1_2) >= 0\n"
      "constraint[1]: x1_2 > 0\n");
  const auto& c = g.players[0].constraints[0];
  CHECK(!c.squared);
  poly::VarLayout lay({2, 2});
  auto want = poly::parse_expression("x1_1*x1_2 - x2_1", lay).num();
  CHECK(c.cleared.approx_equal(want));
}

TEST_CASE("template validation flags mismatches") {
  // ball lme requested for box constraints
  Gnep g = parse_problem(
      "players 1\ndims 1\nobjective[1] = x1_1^2\n"
      "constraint[1]: x1_1 >= 0\nconstraint[1]: 1 - x1_1 >= 0\n"
      "lme[1] = ball\n");
  auto diags = validate(g);
  bool has_error = false;
  for (const auto& d : diags)
    if (d.severity == Diagnostic::Severity::Error) has_error = true;
  CHECK(has_error);
}

TEST_CASE("duplicate declarations are rejected") {
  CHECK_THROWS_AS(parse_problem("players 1\nplayers 1\ndims 1\nobjective[1] = x1_1\n"),
                  SyntaxError);
  CHECK_THROWS_AS(parse_problem("players 1\ndims 1\ndims 1\nobjective[1] = x1_1\n"),
                  SyntaxError);
}

TEST_CASE("round trip parse(print(g))") {
  Gnep g = parse_problem(kQuad1);
  std::string printed = print_problem(g);
  Gnep g2 = parse_problem(printed);
  REQUIRE(g2.layout == g.layout);
  REQUIRE(g2.players.size() == g.players.size());
  for (std::size_t i = 0; i < g.players.size(); ++i) {
    CHECK(g2.players[i].objective.num().approx_equal(g.players[i].objective.num()));
    CHECK(g2.players[i].objective.den().approx_equal(g.players[i].objective.den()));
    REQUIRE(g2.players[i].constraints.size() == g.players[i].constraints.size());
    for (std::size_t c = 0; c < g.players[i].constraints.size(); ++c) {
      CHECK(g2.players[i].constraints[c].kind == g.players[i].constraints[c].kind);
      CHECK(g2.players[i].constraints[c].cleared.approx_equal(
          g.players[i].constraints[c].cleared));
    }
    CHECK(g2.players[i].lme.kind == g.players[i].lme.kind);
    CHECK(g2.players[i].extension.kind == g.players[i].extension.kind);
  }
}

TEST_CASE("validation is order independent over constraints") {
  const char* a =
      "players 1\ndims 1\nobjective[1] = x1_1\n"
      "constraint[1]: x1_1 >= 0\nconstraint[1]: 1 - x1_1 >= 0\n";
  const char* b =
      "players 1\ndims 1\nobjective[1] = x1_1\n"
      "constraint[1]: 1 - x1_1 >= 0\nconstraint[1]: x1_1 >= 0\n";
  auto da = validate(parse_problem(a));
  auto db = validate(parse_problem(b));
  REQUIRE(da.size() == db.size());
  for (std::size_t i = 0; i < da.size(); ++i) CHECK(da[i].message == db[i].message);
}

TEST_CASE("shape matchers") {
  Gnep g = parse_problem(kQuad1);
  auto ball = match_ball(g, 0);
  REQUIRE(ball.has_value());
  CHECK(ball->euclidean);
  CHECK(ball->hom_degree == 2);
  CHECK(!ball->annulus);
  auto sqrtR = linear_sqrt(ball->R);
  REQUIRE(sqrtR.has_value());

  auto box = match_box(g, 1);
  REQUIRE(box.has_value());
  // coordinate 1: [0.5, 1]; coordinate 2: [0, x1_1]
  poly::VarLayout lay({2, 2});
  CHECK(box->lower[0].num().approx_equal(poly::parse_expression("0.5", lay).num()));
  CHECK(box->upper[1].num().approx_equal(poly::parse_expression("x1_1", lay).num()));

  // simplex: x_i >= L, B - e'x >= 0 per player
  Gnep gs = parse_problem(
      "players 2\ndims 1 1\n"
      "objective[1] = x1_1^2\nobjective[2] = x2_1^2\n"
      "constraint[1]: x1_1 - 0.1 >= 0\nconstraint[1]: 2.5 - x1_1 - x2_1 >= 0\n"
      "constraint[2]: x2_1 - 0.2 >= 0\nconstraint[2]: 2.5 - x1_1 - x2_1 >= 0\n");
  poly::VarLayout lay11({1, 1});
  auto sim = match_simplex(gs, 0);
  REQUIRE(sim.has_value());
  CHECK(sim->cap_u.num().approx_equal(poly::parse_expression("2.5 - x2_1", lay11).num()));
  CHECK(is_nep(gs) == false);
}
