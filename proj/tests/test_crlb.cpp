#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "twtoa/crlb.hpp"
#include "twtoa/errors.hpp"
#include "twtoa/measurement.hpp"

using namespace twtoa;

namespace
{

// J^T W J with a central-difference Jacobian of eval_h
Eigen::MatrixXd fd_fim(const Scenario& s)
{
  const Eigen::VectorXd x0 = flatten(s.ud);
  const int n = s.dim();
  const int m = s.num_anchors();
  Eigen::MatrixXd jac(2 * m, x0.size());
  for (int k = 0; k < x0.size(); ++k)
  {
    const double h = 1e-5 * std::max(1.0, std::abs(x0(k)));
    Eigen::VectorXd up = x0;
    Eigen::VectorXd dn = x0;
    up(k) += h;
    dn(k) -= h;
    jac.col(k) = (eval_h(unflatten(up, n), s.anchors, s.schedule.delays) -
                  eval_h(unflatten(dn, n), s.anchors, s.schedule.delays)) /
                 (2.0 * h);
  }
  Eigen::MatrixXd fim = Eigen::MatrixXd::Zero(x0.size(), x0.size());
  for (int i = 0; i < 2 * m; ++i)
  {
    const double sigma = i < m ? s.sigma_an(i) : s.sigma_ud;
    fim += jac.row(i).transpose() * jac.row(i) / (sigma * sigma);
  }
  return fim;
}

}  // namespace

TEST(Crlb, MatchesFiniteDifferenceFisherInformation)
{
  for (int seed = 0; seed < 20; ++seed)
  {
    const Scenario s = test::table_scene(seed, 0.46);
    const CrlbReport r = compute_crlb(s);
    const Eigen::MatrixXd fd = fd_fim(s);
    EXPECT_LE((r.fim - fd).norm() / fd.norm(), 1e-6);
    const Eigen::MatrixXd eye = r.fim * r.covariance;
    EXPECT_LE((eye - Eigen::MatrixXd::Identity(eye.rows(), eye.cols())).norm(), 1e-6);
  }
}

TEST(Crlb, BoundScalesWithSigma)
{
  for (int seed = 0; seed < 10; ++seed)
  {
    Scenario s = test::table_scene(seed, 0.1);
    const double base = compute_crlb(s).pos_rmse_bound;
    s.sigma_an *= 2.0;
    s.sigma_ud *= 2.0;
    const CrlbReport doubled = compute_crlb(s);
    EXPECT_LE(test::rel_diff(doubled.pos_rmse_bound, 2.0 * base), 1e-9);
    EXPECT_DOUBLE_EQ(doubled.threshold, kSuccessFactor * doubled.pos_rmse_bound);
  }
}

TEST(Crlb, BoundGrowsWithAnyNoiseLevel)
{
  const Scenario s = test::table_scene(3, 0.1);
  double last = compute_crlb(s).pos_rmse_bound;
  for (int k = 0; k < 8; ++k)
  {
    Scenario worse = s;
    worse.sigma_an(k) *= 3.0;
    const double b = compute_crlb(worse).pos_rmse_bound;
    EXPECT_GE(b, last * (1.0 - 1e-12));
  }
  Scenario worse = s;
  worse.sigma_ud *= 3.0;
  EXPECT_GE(compute_crlb(worse).pos_rmse_bound, last * (1.0 - 1e-12));
}

TEST(Crlb, TranslationInvariant)
{
  const Eigen::Vector3d shift(1200.0, -800.0, 40.0);
  for (int seed = 0; seed < 10; ++seed)
  {
    const Scenario s = test::table_scene(seed, 2.15);
    Scenario moved = s;
    for (Anchor& a : moved.anchors)
    {
      a.q += shift;
    }
    moved.ud.p += shift;
    EXPECT_LE(test::rel_diff(compute_crlb(moved).pos_rmse_bound, compute_crlb(s).pos_rmse_bound), 1e-9);
  }
}

TEST(Crlb, MoreAnchorsNeverHurt)
{
  for (int seed = 0; seed < 10; ++seed)
  {
    const Scenario full = test::table_scene(seed, 0.46);
    Scenario fewer = full;
    fewer.anchors.pop_back();
    fewer.schedule.delays.conservativeResize(7);
    fewer.sigma_an.conservativeResize(7);
    const CrlbReport a = compute_crlb(fewer);
    const CrlbReport b = compute_crlb(full);
    // Loewner order: cov_fewer - cov_full is positive semidefinite
    const Eigen::MatrixXd diff = a.covariance - b.covariance;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (diff + diff.transpose()));
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9 * a.covariance.norm());
    EXPECT_GE(a.pos_rmse_bound, b.pos_rmse_bound);
  }
}

TEST(Crlb, TooFewAnchorsAreUnobservable)
{
  Scenario s = test::table_scene(1, 0.1);
  s.anchors.resize(3);
  s.schedule.delays.conservativeResize(3);
  s.sigma_an.conservativeResize(3);
  EXPECT_THROW(compute_crlb(s), UnobservableGeometry);
}

TEST(Crlb, SuccessBoundaryIsInclusive)
{
  const Eigen::Vector3d p(0, 0, 0);
  EXPECT_TRUE(is_success(Eigen::Vector3d(3, 4, 0), p, 5.0));
  EXPECT_FALSE(is_success(Eigen::Vector3d(3, 4, 0.001), p, 5.0));
  EXPECT_TRUE(is_success(p, p, 0.0));
}
