#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gne/expr.hpp"
#include "gne/momsos.hpp"

using namespace gne;
using namespace gne::momsos;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
poly::Polynomial P(const std::string& s, const poly::VarLayout& lay) {
  return poly::parse_expression(s, lay).num();
}
}  // namespace

TEST_CASE("moment matrix of a point mass") {
  // n=1, k=1, y = (1, a, a^2): [[1, a], [a, a^2]], rank 1
  double a = 0.37;
  VectorXd z(1);
  z << a;
  Tms y = moments_of_atoms(1, 1, {z}, {1.0});
  MatrixXd M = moment_matrix(y, 1);
  CHECK(M(0, 0) == doctest::Approx(1.0));
  CHECK(M(0, 1) == doctest::Approx(a));
  CHECK(M(1, 1) == doctest::Approx(a * a));
  CHECK(numeric_rank(M, 1e-6) == 1);
}

TEST_CASE("moment matrix sizes and two-atom rank") {
  Tms y;
  y.n = 2;
  y.half_order = 1;
  y.vals.setZero(y.table().size());
  y.vals[0] = 1.0;
  MatrixXd M = moment_matrix(y, 1);
  CHECK(M.rows() == 3);  // {1, x1, x2}

  VectorXd z0(1), z1(1);
  z0 << 0.0;
  z1 << 1.0;
  Tms y2 = moments_of_atoms(1, 1, {z0, z1}, {0.5, 0.5});
  MatrixXd M2 = moment_matrix(y2, 1);
  CHECK(M2(0, 0) == doctest::Approx(1.0));
  CHECK(M2(0, 1) == doctest::Approx(0.5));
  CHECK(M2(1, 1) == doctest::Approx(0.5));
  CHECK(numeric_rank(M2, 1e-6) == 2);
}

TEST_CASE("localizing matrix basics") {
  poly::VarLayout lay({1});
  std::mt19937_64 rng(3);
  // q = 1 equals the moment matrix
  VectorXd z(1);
  z << -0.8;
  Tms y = moments_of_atoms(1, 2, {z}, {2.0});
  auto one = P("1", lay);
  CHECK((localizing_matrix(one, y, 2) - moment_matrix(y, 2)).norm() == doctest::Approx(0.0));

  // n=1, k=1, q = 1 - x^2, y = (1,0,0) -> 1x1 matrix [1]
  Tms y2;
  y2.n = 1;
  y2.half_order = 1;
  y2.vals.setZero(3);
  y2.vals[0] = 1.0;
  auto q = P("1 - x1_1^2", lay);
  MatrixXd L = localizing_matrix(q, y2, 1);
  CHECK(L.rows() == 1);
  CHECK(L(0, 0) == doctest::Approx(1.0));

  // bilinearity on random data
  std::normal_distribution<double> g(0.0, 1.0);
  Tms yr;
  yr.n = 1;
  yr.half_order = 2;
  yr.vals.setZero(yr.table().size());
  for (int i = 0; i < yr.vals.size(); ++i) yr.vals[i] = g(rng);
  auto q1 = P("1 + x1_1", lay), q2 = P("x1_1^2 - 2", lay);
  MatrixXd L12 = localizing_matrix(q1 + q2, yr, 2);
  CHECK((L12 - localizing_matrix(q1, yr, 2) - localizing_matrix(q2, yr, 2)).norm() <
        1e-12);
  // <f,y> bilinear
  double a = 2.5;
  CHECK(apply(q1 * a + q2, yr) ==
        doctest::Approx(a * apply(q1, yr) + apply(q2, yr)).epsilon(1e-12));
}

TEST_CASE("psd of localizing matrices for feasible atomic measures") {
  poly::VarLayout lay({2});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SemialgebraicSet K;
  K.n = 2;
  K.ineqs = {P("1 - x1_1^2 - x1_2^2", lay), P("x1_1 + 1", lay)};
  // atoms inside the unit disk with x1 >= -1
  std::vector<VectorXd> atoms;
  std::vector<double> w;
  while (atoms.size() < 4) {
    VectorXd z(2);
    z << u(rng) * 0.7, u(rng) * 0.7;
    atoms.push_back(z);
    w.push_back(0.1 + std::abs(u(rng)));
  }
  Tms y = moments_of_atoms(2, 3, atoms, w);
  for (const auto& q : K.ineqs) {
    MatrixXd L = localizing_matrix(q, y, 3);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(L, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("assemble_relaxation: min x on [0,1] solves to 0") {
  poly::VarLayout lay({1});
  SemialgebraicSet K;
  K.n = 1;
  K.ineqs = {P("x1_1", lay), P("1 - x1_1", lay)};
  auto a1 = P("x1_1", lay);
  auto a2 = P("1", lay);
  auto rel = assemble_relaxation(K, a1, a2, 1);
  auto sol = sdp::solve_sdp(rel.sdp);
  REQUIRE(sol.status == sdp::SdpStatus::Optimal);
  CHECK(sol.primal_obj == doctest::Approx(0.0).epsilon(1e-6));
  // normalizer with a2 = 1 forces y_0 = 1
  CHECK(sol.x[0] == doctest::Approx(1.0));
}

TEST_CASE("assemble_relaxation: equality constrained quadratic") {
  // min x1^2 + x2^2 s.t. x1 + x2 = 1 -> 0.5 at (0.5, 0.5)
  poly::VarLayout lay({2});
  SemialgebraicSet K;
  K.n = 2;
  K.eqs = {P("x1_1 + x1_2 - 1", lay)};
  auto a1 = P("x1_1^2 + x1_2^2", lay);
  auto a2 = P("1", lay);
  auto rel = assemble_relaxation(K, a1, a2, 1);
  auto sol = sdp::solve_sdp(rel.sdp);
  REQUIRE(sol.status == sdp::SdpStatus::Optimal);
  CHECK(sol.primal_obj == doctest::Approx(0.5).epsilon(1e-6));
  Tms y;
  y.n = 2;
  y.half_order = 1;
  y.vals = sol.x;
  CHECK(y.vals[1] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(y.vals[2] == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("flat truncation") {
  VectorXd z(2);
  z << 0.5, 2.0;
  Tms y = moments_of_atoms(2, 2, {z}, {1.0});
  auto ft = flat_truncation(y, 2, 1, 1e-6);
  REQUIRE(ft.holds);
  CHECK(ft.rank == 1);

  VectorXd z2(2);
  z2 << -1.0, 0.3;
  Tms y2 = moments_of_atoms(2, 2, {z, z2}, {0.4, 0.6});
  auto ft2 = flat_truncation(y2, 2, 1, 1e-6);
  REQUIRE(ft2.holds);
  CHECK(ft2.rank == 2);

  // random perturbation destroys flatness
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1e-2);
  Tms y3 = y2;
  for (int i = 0; i < y3.vals.size(); ++i) y3.vals[i] += g(rng);
  auto ft3 = flat_truncation(y3, 2, 1, 1e-6);
  CHECK(!ft3.holds);
}

TEST_CASE("atom extraction") {
  std::mt19937_64 rng(11);
  // single point mass
  VectorXd z(2);
  z << 0.5, 2.0;
  Tms y = moments_of_atoms(2, 2, {z}, {1.0});
  auto am = extract_atoms(y, 2, 1, rng);
  REQUIRE(am.atoms.size() == 1);
  CHECK((am.atoms[0] - z).norm() < 1e-8);
  CHECK(am.weights[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(am.residual < 1e-9);

  // 0.3 delta_(0,1) + 0.7 delta_(1,0)
  VectorXd a(2), b(2);
  a << 0.0, 1.0;
  b << 1.0, 0.0;
  Tms y2 = moments_of_atoms(2, 2, {a, b}, {0.3, 0.7});
  auto am2 = extract_atoms(y2, 2, 2, rng);
  REQUIRE(am2.atoms.size() == 2);
  int ia = (am2.atoms[0] - a).norm() < (am2.atoms[1] - a).norm() ? 0 : 1;
  CHECK((am2.atoms[ia] - a).norm() < 1e-6);
  CHECK((am2.atoms[1 - ia] - b).norm() < 1e-6);
  CHECK(am2.weights[ia] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(am2.weights[1 - ia] == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("extraction round trip on random atom sets") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int rep = 0; rep < 12; ++rep) {
    int n = 2 + static_cast<int>(rng() % 3);   // up to 4
    int r = 1 + static_cast<int>(rng() % 4);   // up to 4
    int t = std::max(2, (r + 1) / 2 + 1);
    if (t > 3) t = 3;
    std::vector<VectorXd> atoms;
    std::vector<double> w;
    for (int i = 0; i < r; ++i) {
      VectorXd z(n);
      for (int v = 0; v < n; ++v) z[v] = u(rng);
      atoms.push_back(z);
      w.push_back(0.2 + std::abs(u(rng)));
    }
    Tms y = moments_of_atoms(n, t, atoms, w);
    MatrixXd Mt = moment_matrix(y, t);
    if (numeric_rank(Mt, 1e-8) != r) continue;  // atoms too close, skip
    AtomicMeasure am;
    try {
      am = extract_atoms(y, t, r, rng, 1e-8);
    } catch (const ExtractionFailed&) {
      continue;
    }
    REQUIRE(am.atoms.size() == static_cast<std::size_t>(r));
    // match up to permutation
    std::vector<bool> used(r, false);
    for (int i = 0; i < r; ++i) {
      int best = -1;
      double bd = 1e18;
      for (int j = 0; j < r; ++j) {
        if (used[j]) continue;
        double d = (am.atoms[j] - atoms[i]).norm();
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      used[best] = true;
      CHECK(bd < 1e-6 * (1.0 + atoms[i].norm()));
      CHECK(am.weights[best] == doctest::Approx(w[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("qmod membership certificates") {
  poly::VarLayout lay({1});
  // 1 + x^2 is sos
  auto f = P("1 + x1_1^2", lay);
  auto cert = qmod_membership(f, {}, {}, 2);
  REQUIRE(cert.has_value());
  CHECK(cert->residual < 1e-7);

  // x in Qmod[{x}]: x = 0 + 1 * x
  auto x = P("x1_1", lay);
  auto cert2 = qmod_membership(x, {}, {x}, 2);
  REQUIRE(cert2.has_value());

  // -1 - x^2 is certainly not sos
  auto bad = P("-1 - x1_1^2", lay);
  auto cert3 = qmod_membership(bad, {}, {}, 2);
  CHECK(!cert3.has_value());

  // paper-style certificate: 0.25 + 0.25*(2 x y - 1) in Qmod[{2xy - 1}]
  poly::VarLayout lay2({2});
  auto gen = P("2*x1_1*x1_2 - 1", lay2);
  auto f2 = P("0.25 + 0.25*(2*x1_1*x1_2 - 1)", lay2);
  auto cert4 = qmod_membership(f2, {}, {gen}, 4);
  REQUIRE(cert4.has_value());
  CHECK(cert4->residual < 1e-7);
}

TEST_CASE("relaxation bound monotone in order") {
  poly::VarLayout lay({1});
  SemialgebraicSet K;
  K.n = 1;
  K.ineqs = {P("1 - x1_1^2", lay)};
  // nonconvex objective on [-1, 1]
  auto a1 = P("x1_1^4 - x1_1^2 + 0.3*x1_1", lay);
  auto a2 = P("1", lay);
  double prev = -1e18;
  for (int k = 2; k <= 4; ++k) {
    auto rel = assemble_relaxation(K, a1, a2, k);
    auto sol = sdp::solve_sdp(rel.sdp);
    REQUIRE(sol.status == sdp::SdpStatus::Optimal);
    CHECK(sol.primal_obj >= prev - 1e-8);
    prev = sol.primal_obj;
  }
}
