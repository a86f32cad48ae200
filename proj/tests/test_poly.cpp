#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gne/expr.hpp"
#include "gne/poly.hpp"

using namespace gne::poly;

namespace {

Polynomial random_poly(int n, int deg, std::mt19937_64& rng, int terms = 6) {
  std::uniform_int_distribution<int> ed(0, deg);
  std::normal_distribution<double> g(0.0, 1.0);
  Polynomial p(n);
  for (int t = 0; t < terms; ++t) {
    Mono m(n, 0);
    int budget = ed(rng);
    for (int v = 0; v < n && budget > 0; ++v) {
      int e = std::uniform_int_distribution<int>(0, budget)(rng);
      m[v] = static_cast<std::uint16_t>(e);
      budget -= e;
    }
    p.add_term(m, g(rng));
  }
  return p;
}

std::vector<double> random_point(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

}  // namespace

TEST_CASE("eval examples") {
  VarLayout lay({2});
  // x1^2 + 2 x2 at (1,3) -> 7
  auto f = parse_expression("x1_1^2 + 2*x1_2", lay);
  std::vector<double> pt{1.0, 3.0};
  CHECK(eval(f, pt) == doctest::Approx(7.0));
  auto one = parse_expression("1", lay);
  CHECK(eval(one, pt) == doctest::Approx(1.0));
  auto r = parse_expression("(x1_1*x1_2 - 1) / (x1_2)", lay);
  std::vector<double> pt2{2.0, 1.0};
  CHECK(eval(r, pt2) == doctest::Approx(1.0));
  std::vector<double> bad{2.0, 0.0};
  CHECK_THROWS_AS(eval(r, bad), DenominatorZero);
}

TEST_CASE("arithmetic is compatible with evaluation") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    int n = 3;
    Polynomial p = random_poly(n, 3, rng), q = random_poly(n, 3, rng);
    auto z = random_point(n, rng);
    double lhs = (p * q).eval(z);
    double rhs = p.eval(z) * q.eval(z);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK((p + q).eval(z) == doctest::Approx(p.eval(z) + q.eval(z)).epsilon(1e-12));
  }
}

TEST_CASE("gradient_block matches examples and finite differences") {
  VarLayout lay({2, 1});
  auto f1 = parse_expression("x1_1^2 * x1_2", lay);
  auto g1 = gradient_block(f1, lay, 0);
  std::vector<double> pt{1.5, -2.0, 0.7};
  CHECK(g1[0].eval(pt) == doctest::Approx(2.0 * 1.5 * -2.0));
  // d/dx2 of x1 is 0
  auto f2 = parse_expression("x1_1", lay);
  auto g2 = gradient_block(f2, lay, 1);
  CHECK(g2[0].is_zero());
  // quotient rule: d/dx2 (x1/x2) = -x1/x2^2
  VarLayout lay2({1, 1});
  auto f3 = parse_expression("(x1_1) / (x2_1)", lay2);
  auto g3 = gradient_block(f3, lay2, 1);
  std::vector<double> pt2{3.0, 2.0};
  CHECK(g3[0].eval(pt2) == doctest::Approx(-3.0 / 4.0));

  // central finite differences at 100 random points
  std::mt19937_64 rng(5);
  VarLayout lay3({2, 2});
  Polynomial num = random_poly(4, 3, rng);
  Polynomial den = random_poly(4, 2, rng);
  den.add_term(Mono(4, 0), 8.0);  // keep den away from zero near samples
  RationalFunction f(num, den);
  auto grad = gradient_block(f, lay3, 0);
  const double h = 1e-5;
  int checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto z = random_point(4, rng);
    for (int j = 0; j < 2; ++j) {
      auto zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      double fd, an;
      try {
        fd = (f.eval(zp) - f.eval(zm)) / (2 * h);
        an = grad[j].eval(z);
      } catch (const DenominatorZero&) {
        continue;
      }
      CHECK(an == doctest::Approx(fd).epsilon(1e-6));
      ++checked;
    }
  }
  CHECK(checked > 150);
}

TEST_CASE("substitute_player agrees with eval composition") {
  VarLayout lay({1, 1});
  auto f = parse_expression("x1_1 * x2_1", lay);
  std::vector<RationalFunction> img{parse_expression("x2_1", lay)};
  auto sub = substitute_player(f, lay, 0, img);
  // f(x2, x2) = x2^2
  std::vector<double> pt{9.9, 3.0};
  CHECK(sub.eval(pt) == doctest::Approx(9.0));

  // identity substitution leaves f unchanged
  std::vector<RationalFunction> id{parse_expression("x1_1", lay)};
  auto same = substitute_player(f, lay, 0, id);
  CHECK(same.num().approx_equal(f.num()));

  std::mt19937_64 rng(17);
  VarLayout lay2({2, 2});
  for (int rep = 0; rep < 20; ++rep) {
    Polynomial num = random_poly(4, 3, rng);
    Polynomial den = Polynomial::constant(4, 6.0) + random_poly(4, 1, rng);
    RationalFunction f2(num, den);
    std::vector<RationalFunction> p;
    for (int j = 0; j < 2; ++j) {
      Polynomial pn = random_poly(4, 2, rng);
      Polynomial pd = Polynomial::constant(4, 5.0) + random_poly(4, 1, rng);
      p.emplace_back(pn, pd);
    }
    RationalFunction comp = substitute_player(f2, lay2, 0, p);
    for (int k = 0; k < 5; ++k) {
      auto z = random_point(4, rng);
      std::vector<double> zi = z;
      try {
        zi[0] = p[0].eval(z);
        zi[1] = p[1].eval(z);
        double direct = f2.eval(zi);
        double sub2 = comp.eval(z);
        CHECK(sub2 == doctest::Approx(direct).epsilon(1e-10));
      } catch (const DenominatorZero&) {
        continue;
      }
    }
  }
}

TEST_CASE("monomial table counts and order") {
  const auto& t = MonomialTable::get(3, 4);
  CHECK(t.size() == binomial(3 + 4, 4));
  const auto& t2 = MonomialTable::get(2, 2);
  // 1, z1, z2, z1^2, z1 z2, z2^2
  CHECK(t2.size() == 6);
  CHECK(t2.mono(1) == Mono{1, 0});
  CHECK(t2.mono(2) == Mono{0, 1});
  CHECK(t2.mono(3) == Mono{2, 0});
  CHECK(t2.mono(4) == Mono{1, 1});
  CHECK(t2.mono(5) == Mono{0, 2});
}

TEST_CASE("clear_denominators") {
  VarLayout lay({1, 1});
  std::vector<Polynomial> declared{parse_expression("x2_1", lay).num()};
  // x1/x2 >= 0 with x2 declared positive -> x1 >= 0
  auto c = parse_expression("(x1_1)/(x2_1)", lay);
  auto cc = clear_denominators(c, Relation::Ge, declared);
  CHECK(!cc.squared);
  CHECK(cc.poly.approx_equal(parse_expression("x1_1", lay).num()));

  // same without declaration: x1*x2 >= 0 via squaring, flagged
  auto cc2 = clear_denominators(c, Relation::Ge, {});
  CHECK(cc2.squared);
  CHECK(cc2.poly.approx_equal(parse_expression("x1_1*x2_1", lay).num()));

  // a/b + c/d = 0 -> ad + cb = 0
  VarLayout lay4({4});
  auto s = parse_expression("(x1_1)/(x1_2) + (x1_3)/(x1_4)", lay4);
  auto cc3 = clear_denominators(s, Relation::Eq, {});
  CHECK(cc3.poly.approx_equal(parse_expression("x1_1*x1_4 + x1_3*x1_2", lay4).num()));
}

TEST_CASE("exact division") {
  VarLayout lay({3});
  auto a = parse_expression("x1_1^2 - x1_2^2", lay).num();
  auto b = parse_expression("x1_1 - x1_2", lay).num();
  Polynomial q;
  REQUIRE(a.try_divide_exact(b, &q));
  CHECK(q.approx_equal(parse_expression("x1_1 + x1_2", lay).num()));
  auto c = parse_expression("x1_1^2 + x1_3", lay).num();
  CHECK(!c.try_divide_exact(b, &q));
}

TEST_CASE("expression printer round trips") {
  VarLayout lay({2, 2});
  auto f = parse_expression("3.25*x1_1^2*x2_1 - x1_2 + 0.5", lay);
  auto g = parse_expression(f.num().str(&lay), lay);
  CHECK(g.num().approx_equal(f.num(), 1e-15));
}

TEST_CASE("parser rejects bad input with position") {
  VarLayout lay({1});
  CHECK_THROWS_AS(parse_expression("x1_1 + ", lay), ParseError);
  CHECK_THROWS_AS(parse_expression("x9_1", lay), ParseError);
  CHECK_THROWS_AS(parse_expression("x1_1 ** 2", lay), ParseError);
}
