#include "twtoa/crlb.hpp"

#include <cmath>
#include <string>

#include "twtoa/errors.hpp"
#include "twtoa/measurement.hpp"

namespace twtoa
{

CrlbReport compute_crlb(const Scenario& scenario)
{
  const int n = scenario.dim();
  const int m = scenario.num_anchors();
  if (2 * m < 2 * n + 2)
  {
    throw UnobservableGeometry(std::to_string(2 * m) + " measurements for " + std::to_string(2 * n + 2) +
                               " unknowns");
  }
  const WeightMatrix w = build_weights(scenario.sigma_an, scenario.sigma_ud);
  const Eigen::MatrixXd jac = jacobian_h(scenario.ud, scenario.anchors, scenario.schedule.delays);

  CrlbReport report;
  report.fim = jac.transpose() * w.diag.asDiagonal() * jac;
  report.fim = 0.5 * (report.fim + report.fim.transpose());

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(report.fim, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxFimCondition)
  {
    throw UnobservableGeometry("Fisher information condition number " + std::to_string(hi / lo));
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(report.fim);
  if (llt.info() != Eigen::Success)
  {
    throw UnobservableGeometry("Fisher information not positive definite");
  }
  report.covariance = llt.solve(Eigen::MatrixXd::Identity(2 * n + 2, 2 * n + 2));
  report.pos_rmse_bound = std::sqrt(report.covariance.topLeftCorner(n, n).trace());
  report.threshold = kSuccessFactor * report.pos_rmse_bound;
  return report;
}

bool is_success(const Eigen::VectorXd& p_hat, const Eigen::VectorXd& p_true, double threshold)
{
  return (p_hat - p_true).norm() <= threshold;
}

}  // namespace twtoa
