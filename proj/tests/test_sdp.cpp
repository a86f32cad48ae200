#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>
#include <sstream>

#include "gne/sdp.hpp"

using namespace gne::sdp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void add_entry(BlockLMI& b, int var, int r, int c, double v) {
  b.coef[var].push_back({r, c, v});
  if (r != c) b.coef[var].push_back({c, r, v});
}

void add_const(BlockLMI& b, int r, int c, double v) {
  b.constant.push_back({r, c, v});
  if (r != c) b.constant.push_back({c, r, v});
}

}  // namespace

TEST_CASE("min x with [[x,1],[1,x]] psd gives 1") {
  SdpProblem p;
  p.nvars = 1;
  p.c = VectorXd::Ones(1);
  BlockLMI b;
  b.side = 2;
  b.coef.resize(1);
  add_entry(b, 0, 0, 0, 1.0);
  add_entry(b, 0, 1, 1, 1.0);
  add_const(b, 0, 1, 1.0);
  p.blocks.push_back(b);
  auto sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.primal_obj == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("min x with diag(x, 1-x) psd gives 0") {
  SdpProblem p;
  p.nvars = 1;
  p.c = VectorXd::Ones(1);
  BlockLMI b;
  b.side = 2;
  b.coef.resize(1);
  add_entry(b, 0, 0, 0, 1.0);
  add_entry(b, 0, 1, 1, -1.0);
  add_const(b, 1, 1, 1.0);
  p.blocks.push_back(b);
  auto sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("contradictory equalities certified primal infeasible") {
  SdpProblem p;
  p.nvars = 1;
  p.c = VectorXd::Zero(1);
  BlockLMI b;
  b.side = 1;
  b.coef.resize(1);
  add_entry(b, 0, 0, 0, 1.0);  // x >= 0 to keep a cone present
  p.blocks.push_back(b);
  p.eq_rows.resize(2);
  p.eq_rows[0].terms = {{0, 1.0}};
  p.eq_rows[1].terms = {{0, 1.0}};
  p.eq_rhs = VectorXd(2);
  p.eq_rhs << 1.0, 2.0;
  auto sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::PrimalInfeasible);
  // certificate: E'y + adj(Z) = 0, f'y - <C,Z> = 1
  double lin = sol.eq_dual[0] + sol.eq_dual[1] + sol.Z[0](0, 0);
  double val = sol.eq_dual[0] + 2.0 * sol.eq_dual[1];
  CHECK(std::abs(lin) < 1e-6);
  CHECK(val == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("equality constrained least norm style problem") {
  // min x1 + x2 s.t. x1 + x2 + x3 = 1 and diag(x1, x2, x3) >= 0
  SdpProblem p;
  p.nvars = 3;
  p.c = VectorXd::Zero(3);
  p.c[0] = 1.0;
  p.c[1] = 1.0;
  BlockLMI b;
  b.side = 3;
  b.coef.resize(3);
  for (int j = 0; j < 3; ++j) add_entry(b, j, j, j, 1.0);
  p.blocks.push_back(b);
  p.eq_rows.resize(1);
  p.eq_rows[0].terms = {{0, 1.0}, {1, 1.0}, {2, 1.0}};
  p.eq_rhs = VectorXd::Ones(1);
  auto sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::Optimal);
  CHECK(sol.primal_obj == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(sol.x[2] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("unbounded problem certified dual infeasible") {
  // min -x with x >= 0 only
  SdpProblem p;
  p.nvars = 1;
  p.c = VectorXd::Constant(1, -1.0);
  BlockLMI b;
  b.side = 1;
  b.coef.resize(1);
  add_entry(b, 0, 0, 0, 1.0);
  p.blocks.push_back(b);
  auto sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::DualInfeasible);
  CHECK(sol.x[0] > 0.0);
}

TEST_CASE("random feasible instances solve to high accuracy") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int inst = 0; inst < 100; ++inst) {
    int side = 2 + static_cast<int>(rng() % 6);
    int nv = 2 + static_cast<int>(rng() % 5);
    // S(x) = C + sum x_j A_j with C = I so x = 0 strictly feasible
    SdpProblem p;
    p.nvars = nv;
    p.c = VectorXd::Zero(nv);
    for (int j = 0; j < nv; ++j) p.c[j] = g(rng);
    BlockLMI b;
    b.side = side;
    b.coef.resize(nv);
    for (int j = 0; j < nv; ++j) {
      MatrixXd A = MatrixXd::Zero(side, side);
      for (int r = 0; r < side; ++r)
        for (int c2 = r; c2 < side; ++c2) {
          double v = g(rng);
          A(r, c2) = v;
          A(c2, r) = v;
        }
      for (int r = 0; r < side; ++r)
        for (int c2 = 0; c2 < side; ++c2)
          if (A(r, c2) != 0.0) b.coef[j].push_back({r, c2, A(r, c2)});
    }
    for (int r = 0; r < side; ++r) b.constant.push_back({r, r, 1.0});
    p.blocks.push_back(b);
    // bound the feasible set: add -x_j in a diagonal second block plus box
    BlockLMI box;
    box.side = 2 * nv;
    box.coef.resize(nv);
    for (int j = 0; j < nv; ++j) {
      box.coef[j].push_back({2 * j, 2 * j, 1.0});
      box.coef[j].push_back({2 * j + 1, 2 * j + 1, -1.0});
    }
    for (int j = 0; j < 2 * nv; ++j) box.constant.push_back({j, j, 10.0});
    p.blocks.push_back(box);
    auto sol = solve_sdp(p);
    REQUIRE_MESSAGE(sol.status == SdpStatus::Optimal, "instance ", inst);
    CHECK(sol.gap <= 1e-6 * (1.0 + std::abs(sol.primal_obj)));
    // primal PSD check
    MatrixXd S = MatrixXd::Identity(side, side);
    for (int j = 0; j < nv; ++j)
      for (const auto& e : p.blocks[0].coef[j]) S(e.row, e.col) += sol.x[j] * e.val;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9 * std::max(1.0, S.norm()));
  }
}

TEST_CASE("determinism: identical inputs give identical output") {
  SdpProblem p;
  p.nvars = 2;
  p.c = VectorXd(2);
  p.c << 1.0, 0.5;
  BlockLMI b;
  b.side = 2;
  b.coef.resize(2);
  add_entry(b, 0, 0, 0, 1.0);
  add_entry(b, 1, 1, 1, 1.0);
  add_entry(b, 0, 0, 1, 0.3);
  add_const(b, 0, 1, 0.7);
  p.blocks.push_back(b);
  auto s1 = solve_sdp(p);
  auto s2 = solve_sdp(p);
  REQUIRE(s1.status == s2.status);
  CHECK(s1.x == s2.x);  // bitwise
  CHECK(s1.primal_obj == s2.primal_obj);
}

TEST_CASE("sdpa dump is well formed") {
  SdpProblem p;
  p.nvars = 1;
  p.c = VectorXd::Ones(1);
  BlockLMI b;
  b.side = 2;
  b.coef.resize(1);
  add_entry(b, 0, 0, 0, 1.0);
  add_const(b, 0, 1, 1.0);
  p.blocks.push_back(b);
  p.eq_rows.resize(1);
  p.eq_rows[0].terms = {{0, 2.0}};
  p.eq_rhs = VectorXd::Ones(1);
  std::ostringstream os;
  write_sdpa(p, os);
  std::string s = os.str();
  CHECK(s.find("1 = mDIM") != std::string::npos);
  CHECK(s.find("bLOCKsTRUCT") != std::string::npos);
}
