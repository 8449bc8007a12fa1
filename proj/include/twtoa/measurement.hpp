#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "twtoa/model.hpp"

namespace twtoa
{

/// One round of two-way TOA in range units. Stacking order is [rho; tau].
struct TwoWayMeasurements
{
  Eigen::VectorXd rho;       // request-TOA at each anchor, meters
  Eigen::VectorXd tau;       // response-TOA at the UD, meters
  Eigen::VectorXd delays;    // seconds
  Eigen::VectorXd sigma_an;  // meters
  double sigma_ud = 0.0;     // meters

  int size() const { return static_cast<int>(rho.size()); }
  Eigen::VectorXd stacked() const;
};

/// Diagonal of W: [1/sigma_1^2 ... 1/sigma_M^2, 1/sigma^2 ... 1/sigma^2].
struct WeightMatrix
{
  Eigen::VectorXd diag;

  int size() const { return static_cast<int>(diag.size()); }
  Eigen::Ref<const Eigen::VectorXd> request() const { return diag.head(diag.size() / 2); }
  Eigen::Ref<const Eigen::VectorXd> response() const { return diag.tail(diag.size() / 2); }
};

/// ||q - p|| - B
double request_toa_clean(const Eigen::VectorXd& q, const UdState& state);

/// ||q - p - v*delay|| + B + Omega*delay
double response_toa_clean(const Eigen::VectorXd& q, const UdState& state, double delay);

/// Forward model h(theta), length 2M.
Eigen::VectorXd eval_h(const StateVector& theta, const std::vector<Anchor>& anchors, const Eigen::VectorXd& delays);

/// Analytic 2M x (2N+2) Jacobian of eval_h, columns in [p, B, Omega, v] order.
Eigen::MatrixXd jacobian_h(const StateVector& theta, const std::vector<Anchor>& anchors,
                           const Eigen::VectorXd& delays);

/// Noise-free measurements of the scenario (noise levels are kept for weighting).
TwoWayMeasurements simulate_clean(const Scenario& scenario);

/// Clean model plus independent zero-mean Gaussian noise: sigma_an[i] on rho_i,
/// sigma_ud on every tau_i (one independent draw per response). Draw order is
/// rho_1..rho_M then tau_1..tau_M from Rng(rng_seed).
TwoWayMeasurements simulate(const Scenario& scenario, std::uint64_t rng_seed);

WeightMatrix build_weights(const Eigen::VectorXd& sigma_an, double sigma_ud);
WeightMatrix build_weights(const TwoWayMeasurements& measurements);

}  // namespace twtoa
