#pragma once

#include <Eigen/Dense>

#include "twtoa/model.hpp"

namespace twtoa
{

inline constexpr double kMaxFimCondition = 1e12;
inline constexpr double kSuccessFactor = 3.0;

struct CrlbReport
{
  Eigen::MatrixXd fim;         // (2N+2)^2, columns in [p, B, Omega, v] order
  Eigen::MatrixXd covariance;  // fim^-1
  double pos_rmse_bound = 0.0;  // sqrt(trace of the position block), meters
  double threshold = 0.0;       // kSuccessFactor * pos_rmse_bound, meters
};

/// Gaussian Fisher information J^T W J at the true state of the scenario.
/// Throws UnobservableGeometry when the FIM is singular or its condition number
/// exceeds kMaxFimCondition.
CrlbReport compute_crlb(const Scenario& scenario);

/// ||p_hat - p_true|| <= threshold (inclusive).
bool is_success(const Eigen::VectorXd& p_hat, const Eigen::VectorXd& p_true, double threshold);

}  // namespace twtoa
