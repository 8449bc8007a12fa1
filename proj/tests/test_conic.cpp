#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "constructed.hpp"
#include "helpers.hpp"
#include "twtoa/conic_program.hpp"
#include "twtoa/conic_solver.hpp"

using namespace twtoa;

namespace
{

double rel_err(double a, double b)
{
  return std::abs(a - b) / (1.0 + std::abs(b));
}

}  // namespace

TEST(Svec, InnerProductIsTrace)
{
  Rng rng(1);
  for (int order = 1; order <= 6; ++order)
  {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(order, order);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(order, order);
    for (int i = 0; i < order; ++i)
    {
      for (int j = 0; j <= i; ++j)
      {
        a(i, j) = a(j, i) = rng.uniform(-1, 1);
        b(i, j) = b(j, i) = rng.uniform(-1, 1);
      }
    }
    EXPECT_NEAR(svec(a).dot(svec(b)), (a * b).trace(), 1e-12);
    EXPECT_LE((smat(svec(a), order) - a).norm(), 1e-15);
    ASSERT_EQ(svec(a).size(), svec_size(order));
  }
}

TEST(ConicSolve, ScalarPsd)
{
  // minimize x s.t. x = 1, x in S^1_+
  ConicProgram p(ConeLayout{0, 0, {1}});
  p.add_equality({{p.psd_term(0, 0, 0, 1.0)}, 1.0, "x = 1"});
  p.add_objective(p.psd_index(0, 0, 0), 1.0);
  const IpmResult r = solve(p);
  ASSERT_EQ(r.status, IpmStatus::Optimal);
  EXPECT_NEAR(r.primal_objective, 1.0, 1e-7);
  EXPECT_LT(r.rel_gap, 1e-7);
}

TEST(ConicSolve, TraceLowerBound)
{
  // minimize tr(X) s.t. X11 = X22 = 1: optimum 2 with X12 anywhere in [-1, 1]
  ConicProgram p(ConeLayout{0, 0, {2}});
  p.add_equality({{p.psd_term(0, 0, 0, 1.0)}, 1.0, "X11"});
  p.add_equality({{p.psd_term(0, 1, 1, 1.0)}, 1.0, "X22"});
  p.add_objective(p.psd_index(0, 0, 0), 1.0);
  p.add_objective(p.psd_index(0, 1, 1), 1.0);
  const IpmResult r = solve(p);
  ASSERT_EQ(r.status, IpmStatus::Optimal);
  EXPECT_NEAR(r.primal_objective, 2.0, 1e-6);
  const Eigen::MatrixXd x = p.psd_block(r.x, 0);
  EXPECT_LE(std::abs(x(0, 1)), 1.0 + 1e-6);
}

TEST(ConicSolve, ConstructedOptimaAreRecovered)
{
  for (int k = 0; k < 50; ++k)
  {
    const test::Constructed c = test::constructed_program(500 + k);
    const IpmResult r = solve(c.program);
    ASSERT_EQ(r.status, IpmStatus::Optimal) << "instance " << k;
    EXPECT_LE(r.rel_gap, 1e-6) << "instance " << k;
    EXPECT_LE(rel_err(r.primal_objective, c.optimum), 1e-6) << "instance " << k;
  }
}

TEST(ConicSolve, IteratesStayInteriorWithNonnegativeComplementarity)
{
  for (int k = 0; k < 50; ++k)
  {
    const test::Constructed c = test::constructed_program(500 + k);
    const IpmResult r = solve(c.program);
    const double scale = 1.0 + c.program.objective().norm() + c.program.equality_rhs().norm();
    for (const IpmIterate& it : r.trace)
    {
      EXPECT_GT(it.min_primal_eig, 0.0) << "instance " << k << " iter " << it.iter;
      EXPECT_GT(it.min_dual_eig, 0.0) << "instance " << k << " iter " << it.iter;
      EXPECT_GE(it.complementarity, 0.0);
      // c^T x - b^T y = x^T s only on feasible iterates; before that the gap is unsigned
      if (it.primal_infeas <= 1e-7 && it.dual_infeas <= 1e-7)
      {
        EXPECT_GE(it.primal_objective - it.dual_objective, -1e-8 * scale) << "instance " << k << " iter " << it.iter;
      }
    }
  }
}

TEST(ConicSolve, Deterministic)
{
  const test::Constructed c = test::constructed_program(77);
  const IpmResult a = solve(c.program);
  const IpmResult b = solve(c.program);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i)
  {
    EXPECT_EQ(a.trace[i].primal_objective, b.trace[i].primal_objective);
    EXPECT_EQ(a.trace[i].dual_objective, b.trace[i].dual_objective);
    EXPECT_EQ(a.trace[i].step_primal, b.trace[i].step_primal);
  }
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
}

TEST(ConicSolve, RedundantRowIsRemoved)
{
  test::Constructed c = test::constructed_program(78);
  LinearRow copy = c.program.equalities().front();
  for (Term& t : copy.terms)
  {
    t.coeff *= 2.0;
  }
  copy.rhs *= 2.0;
  c.program.add_equality(copy);
  const IpmResult r = solve(c.program);
  EXPECT_EQ(r.removed_rows, 1);
  ASSERT_EQ(r.status, IpmStatus::Optimal);
  EXPECT_LE(rel_err(r.primal_objective, c.optimum), 1e-6);
}

TEST(ConicSolve, DetectsInfeasibility)
{
  // x >= 0 with x = -1
  ConicProgram p(ConeLayout{0, 1, {}});
  p.add_equality({{{p.nonneg_index(0), 1.0}}, -1.0, "x = -1"});
  p.add_objective(p.nonneg_index(0), 1.0);
  EXPECT_EQ(solve(p).status, IpmStatus::Infeasible);
}

TEST(ConicSolve, FreeVariablesAndMaxIter)
{
  // minimize x1 + t s.t. x1 - x0 = 1, x0 = t - 2 with free x0, x1 and t >= 0: optimum at t = 0
  ConicProgram p(ConeLayout{2, 1, {}});
  p.add_equality({{{0, -1.0}, {1, 1.0}}, 1.0, "link"});
  p.add_equality({{{0, 1.0}, {2, -1.0}}, -2.0, "shift"});
  p.add_objective(1, 1.0);
  p.add_objective(2, 1.0);
  const IpmResult r = solve(p);
  ASSERT_EQ(r.status, IpmStatus::Optimal);
  EXPECT_NEAR(r.primal_objective, -1.0, 1e-6);

  IpmSettings tight;
  tight.max_iter = 1;
  EXPECT_EQ(solve(test::constructed_program(79).program, tight).status, IpmStatus::MaxIter);
}

TEST(ConicSolve, ReturnedPointIsInTheCone)
{
  for (int k = 0; k < 10; ++k)
  {
    const test::Constructed c = test::constructed_program(600 + k);
    IpmSettings loose;
    loose.max_iter = 3;  // stop early, far from the boundary and from optimality
    for (const IpmResult& r : {solve(c.program), solve(c.program, loose)})
    {
      const ConeLayout& l = c.program.layout();
      EXPECT_GE(r.x.segment(l.n_free, l.n_nonneg).minCoeff(), -1e-8);
      for (int b = 0; b < static_cast<int>(l.psd_orders.size()); ++b)
      {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.program.psd_block(r.x, b));
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-8);
      }
    }
  }
}

TEST(ConicSolve, SettingsAreValidated)
{
  IpmSettings s;
  s.tol_gap = 0.0;
  EXPECT_THROW(validate(s), std::invalid_argument);
  s = {};
  s.tol_feas = 0.5;
  EXPECT_THROW(validate(s), std::invalid_argument);
  s = {};
  s.step_fraction = 1.0;
  EXPECT_THROW(validate(s), std::invalid_argument);
  EXPECT_NO_THROW(validate(IpmSettings{}));
}

TEST(Residuals, ConstructedPairIsOptimal)
{
  for (int k = 0; k < 20; ++k)
  {
    const test::Constructed c = test::constructed_program(700 + k);
    const KktResiduals r = residuals(c.program, c.x, c.y, c.s);
    EXPECT_LE(r.primal, 1e-10);
    EXPECT_LE(r.dual, 1e-10);
    EXPECT_LE(std::abs(r.gap), 1e-10);
  }
}

TEST(Residuals, GapIsLinearInThePrimalPoint)
{
  const test::Constructed c = test::constructed_program(720);
  const Eigen::VectorXd y0 = Eigen::VectorXd::Zero(c.y.size());
  const KktResiduals one = residuals(c.program, c.x, y0, c.s);
  const KktResiduals two = residuals(c.program, 2.0 * c.x, y0, c.s);
  EXPECT_NEAR(two.gap, 2.0 * one.gap, 1e-12 * (1.0 + std::abs(one.gap)));
}

TEST(Residuals, MatchLoopRecomputation)
{
  Rng rng(21);
  for (int k = 0; k < 20; ++k)
  {
    const test::Constructed c = test::constructed_program(740 + k);
    const ConicProgram& p = c.program;
    const int n = p.num_vars();
    const int m = p.num_equalities();
    const Eigen::VectorXd x = test::random_vector(rng, n, -1, 1);
    const Eigen::VectorXd y = test::random_vector(rng, m, -1, 1);
    const Eigen::VectorXd s = test::random_vector(rng, n, -1, 1);

    double b2 = 0.0;
    double c2 = 0.0;
    double rp2 = 0.0;
    double by = 0.0;
    double cx = 0.0;
    std::vector<double> aty(n, 0.0);
    for (int i = 0; i < m; ++i)
    {
      const LinearRow& row = p.equalities()[i];
      double ax = 0.0;
      for (const Term& t : row.terms)
      {
        ax += t.coeff * x(t.index);
        aty[t.index] += t.coeff * y(i);
      }
      rp2 += (ax - row.rhs) * (ax - row.rhs);
      b2 += row.rhs * row.rhs;
      by += row.rhs * y(i);
    }
    double rd2 = 0.0;
    for (int j = 0; j < n; ++j)
    {
      const double cj = p.objective()(j);
      const double sj = j < p.layout().n_free ? 0.0 : s(j);
      rd2 += (cj - aty[j] - sj) * (cj - aty[j] - sj);
      c2 += cj * cj;
      cx += cj * x(j);
    }
    const KktResiduals r = residuals(p, x, y, s);
    EXPECT_LE(test::rel_diff(r.primal, std::sqrt(rp2) / (1.0 + std::sqrt(b2))), 1e-12);
    EXPECT_LE(test::rel_diff(r.dual, std::sqrt(rd2) / (1.0 + std::sqrt(c2))), 1e-12);
    EXPECT_LE(test::rel_diff(r.gap, (cx - by) / (1.0 + std::sqrt(b2) + std::sqrt(c2))), 1e-12);
  }
}

TEST(ProgramText, RoundTrip)
{
  const test::Constructed c = test::constructed_program(800);
  std::stringstream ss;
  write_program(ss, c.program);
  const ConicProgram back = read_program(ss);
  EXPECT_EQ(back.layout().n_free, c.program.layout().n_free);
  EXPECT_EQ(back.layout().n_nonneg, c.program.layout().n_nonneg);
  EXPECT_EQ(back.layout().psd_orders, c.program.layout().psd_orders);
  EXPECT_EQ(back.objective(), c.program.objective());
  EXPECT_EQ(back.equality_matrix(), c.program.equality_matrix());
  EXPECT_EQ(back.equality_rhs(), c.program.equality_rhs());
}
