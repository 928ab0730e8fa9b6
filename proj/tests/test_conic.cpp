#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "secbeam/conic/program.hpp"
#include "secbeam/conic/solver.hpp"

using namespace secbeam;
using namespace secbeam::conic;

TEST_CASE("one-constraint LP: min t s.t. t >= 5") {
  ConicProgram p;
  const Index t = p.add_scalar(VarKind::Free, "t");
  p.add_ge(var_expr(t), 5.0, "bound");
  p.set_objective(var_expr(t));
  auto r = solve(p, 1e-9);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.scalars[t] == Catch::Approx(5.0).margin(1e-8));
  CHECK(r.primal_obj == Catch::Approx(5.0).margin(1e-8));
  CHECK(r.dual_obj <= r.primal_obj + 1e-9);
}

TEST_CASE("micro SDP: min Tr X s.t. <I/2, X> = 1, X psd") {
  ConicProgram p;
  const Index X = p.add_psd_block(2, "X");
  Expr tr;
  tr.add_trace(X, Eigen::MatrixXd::Identity(2, 2));
  Expr half;
  half.add_trace(X, 0.5 * Eigen::MatrixXd::Identity(2, 2));
  p.add_eq(half, 1.0, "norm");
  p.set_objective(tr);
  auto r = solve(p, 1e-9);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.primal_obj == Catch::Approx(2.0).margin(1e-8));
  // returned block is PSD within tolerance
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.blocks[X]);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  CHECK(r.dual_obj <= r.primal_obj + 1e-9);
}

TEST_CASE("contradictory bounds are infeasible with a certificate") {
  ConicProgram p;
  const Index x = p.add_scalar(VarKind::Nonneg, "x");
  p.add_le(var_expr(x), -1.0, "upper");
  p.set_objective(var_expr(x));
  auto r = solve(p, 1e-8);
  REQUIRE(r.status == SolveStatus::Infeasible);
  CHECK(r.has_certificate);
  // the dual ray must price the impossible row: y < 0 and <b,y> = -y > 0
  CHECK(r.row_duals[0] < -1e-10);
}

TEST_CASE("unbounded LP carries a primal ray") {
  ConicProgram p;
  const Index x = p.add_scalar(VarKind::Nonneg, "x");
  p.set_objective(var_expr(x, -1.0));
  auto r = solve(p, 1e-8);
  REQUIRE(r.status == SolveStatus::Unbounded);
  CHECK(r.has_certificate);
  CHECK(r.scalars[x] > 0.0);
}

TEST_CASE("second-order cone: min t s.t. t >= ||(3,4)||") {
  ConicProgram p;
  const Index t = p.add_scalar(VarKind::Nonneg, "t");
  p.add_soc(var_expr(t), {Expr(3.0), Expr(4.0)}, "soc");
  p.set_objective(var_expr(t));
  auto r = solve(p, 1e-9);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.scalars[t] == Catch::Approx(5.0).margin(1e-7));
}

TEST_CASE("rotated cone: min u s.t. 2*u*0.5 >= 3^2") {
  ConicProgram p;
  const Index u = p.add_scalar(VarKind::Nonneg, "u");
  p.add_rsoc(var_expr(u), Expr(0.5), {Expr(3.0)}, "rsoc");
  p.set_objective(var_expr(u));
  auto r = solve(p, 1e-9);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.scalars[u] == Catch::Approx(9.0).margin(1e-6));
}

TEST_CASE("rotated cone with variable w") {
  // min u s.t. 2*u >= w^2, w >= 3  ->  u = 4.5
  ConicProgram p;
  const Index u = p.add_scalar(VarKind::Nonneg, "u");
  const Index w = p.add_scalar(VarKind::Free, "w");
  p.add_rsoc(var_expr(u), Expr(1.0), {var_expr(w)}, "rsoc");
  p.add_ge(var_expr(w), 3.0, "wmin");
  p.set_objective(var_expr(u));
  auto r = solve(p, 1e-9);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.primal_obj == Catch::Approx(4.5).margin(1e-6));
  CHECK(r.scalars[w] == Catch::Approx(3.0).margin(1e-6));
}

TEST_CASE("psd expression constraint via schur block") {
  // [[x, 2],[2, 1]] psd  <=>  x >= 4; minimize x
  ConicProgram p;
  const Index x = p.add_scalar(VarKind::Nonneg, "x");
  p.add_psd(2, {var_expr(x), Expr(2.0), Expr(1.0)}, "schur");
  p.set_objective(var_expr(x));
  auto r = solve(p, 1e-9);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.scalars[x] == Catch::Approx(4.0).margin(1e-6));
}

TEST_CASE("log hypograph solved to the exact nonlinear constraint") {
  // max t s.t. t <= ln(1+x), x <= e-1  ->  t = 1
  ConicProgram p;
  const Index t = p.add_scalar(VarKind::Nonneg, "t");
  const Index x = p.add_scalar(VarKind::Nonneg, "x");
  p.add_le(var_expr(x), std::exp(1.0) - 1.0, "xcap");
  p.add_log_hypograph(var_expr(t), x, 1.0, {1.0}, "log");
  p.set_objective(var_expr(t, -1.0));
  auto r = solve(p, 1e-8);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.scalars[t] == Catch::Approx(1.0).margin(1e-6));
  // the exact hypograph holds at the returned point
  CHECK(r.scalars[t] <= std::log1p(r.scalars[x]) + 1e-7);
  CHECK(r.cut_rounds >= 1);
}

TEST_CASE("weighted log hypograph") {
  // max 3*t - x s.t. t <= 2 ln(1+x): optimum where 6/(1+x) = 1 -> x = 5
  ConicProgram p;
  const Index t = p.add_scalar(VarKind::Free, "t");
  const Index x = p.add_scalar(VarKind::Nonneg, "x");
  p.add_log_hypograph(var_expr(t), x, 2.0, {2.0}, "log");
  Expr obj;
  obj.add(t, -3.0).add(x, 1.0);
  p.set_objective(obj);
  auto r = solve(p, 1e-8);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.scalars[x] == Catch::Approx(5.0).margin(1e-4));
  CHECK(r.scalars[t] == Catch::Approx(2.0 * std::log1p(5.0)).margin(1e-5));
}

TEST_CASE("zero-trace psd block is presolved to zero") {
  ConicProgram p;
  const Index X = p.add_psd_block(2, "X");
  const Index s = p.add_scalar(VarKind::Nonneg, "s");
  Expr tr;
  tr.add_trace(X, Eigen::MatrixXd::Identity(2, 2));
  p.add_eq(tr, 0.0, "pin");
  p.add_ge(var_expr(s), 1.0, "smin");
  Expr obj = var_expr(s);
  obj.add_trace(X, Eigen::MatrixXd::Identity(2, 2));
  p.set_objective(obj);
  auto r = solve(p, 1e-9);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.blocks[X].norm() == 0.0);
  CHECK(r.primal_obj == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("weak duality and psd feasibility on a mixed program") {
  ConicProgram p;
  const Index X = p.add_psd_block(3, "X");
  const Index t = p.add_scalar(VarKind::Nonneg, "t");
  Eigen::MatrixXd A(3, 3);
  A << 2, 1, 0, 1, 2, 1, 0, 1, 2;
  Expr ax;
  ax.add_trace(X, A);
  p.add_ge(ax, 4.0, "lb");
  Expr tr;
  tr.add_trace(X, Eigen::MatrixXd::Identity(3, 3));
  tr.add(t, 2.0);
  p.add_le(var_expr(t, 1.0), 7.0, "tcap");
  p.set_objective(tr);
  auto r = solve(p, 1e-9);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.dual_obj <= r.primal_obj + 1e-8);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.blocks[X]);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  CHECK(std::max({r.primal_residual, r.dual_residual, r.gap}) <= 1e-9);
}

TEST_CASE("determinism: identical program solves identically") {
  auto build = [] {
    ConicProgram p;
    const Index X = p.add_psd_block(4, "X");
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4, 4);
    for (int i = 0; i < 4; ++i) A(i, i) = 1.0 + i;
    Expr ax;
    ax.add_trace(X, A);
    p.add_eq(ax, 3.0, "eq");
    Expr tr;
    tr.add_trace(X, Eigen::MatrixXd::Identity(4, 4));
    p.set_objective(tr);
    return p;
  };
  auto r1 = solve(build(), 1e-8);
  auto r2 = solve(build(), 1e-8);
  REQUIRE(r1.status == SolveStatus::Optimal);
  REQUIRE(r2.status == r1.status);
  CHECK(r1.primal_obj == Catch::Approx(r2.primal_obj).margin(1e-9));
  CHECK(r1.iterations == r2.iterations);
}

TEST_CASE("validate: empty program") {
  ConicProgram p;
  CHECK(validate(p).empty());
}

TEST_CASE("validate: dangling variable reference") {
  ConicProgram p;
  p.add_le(var_expr(3, 1.0), 0.0, "bad");
  const auto diags = validate(p);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].message.find("dangling") != std::string::npos);
}

TEST_CASE("malformed program raises usage error in solve") {
  ConicProgram p;
  p.add_le(var_expr(3, 1.0), 0.0, "bad");
  CHECK_THROWS_AS(solve(p), UsageError);
}

TEST_CASE("dump emits a self-describing text form") {
  ConicProgram p;
  const Index x = p.add_scalar(VarKind::Nonneg, "x");
  const Index X = p.add_psd_block(2, "W");
  Expr tr;
  tr.add_trace(X, Eigen::MatrixXd::Identity(2, 2));
  tr.add(x, 1.0);
  p.add_ge(tr, 1.0, "C1");
  p.set_objective(var_expr(x));
  std::ostringstream os;
  dump(p, os);
  const std::string s = os.str();
  CHECK(s.find("conic-program") != std::string::npos);
  CHECK(s.find("psd-blocks 1") != std::string::npos);
  CHECK(s.find("C1") != std::string::npos);
}
