#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "twtoa/measurement.hpp"
#include "twtoa/model.hpp"

namespace twtoa
{

/// (gamma - h(theta))^T W (gamma - h(theta))
double wls_cost(const StateVector& theta, const TwoWayMeasurements& measurements, const WeightMatrix& weights,
                const std::vector<Anchor>& anchors);

struct GnSettings
{
  int max_iter = 10;
  double tol = 1e-6;  // on the update norm, mixed state units
  /// Off for every reproduction run; the baseline is plain undamped Gauss-Newton.
  bool levenberg_marquardt = false;
  double lm_lambda = 1e-3;
  double max_condition = 1e12;
};

enum class GnStatus
{
  Converged,
  MaxIter,
  SingularNormalMatrix,
  CoincidentGeometry,
  Diverged,
};

const char* to_string(GnStatus status);

struct GnReport
{
  StateVector estimate;
  int iterations = 0;
  bool converged = false;
  GnStatus status = GnStatus::MaxIter;
  double final_cost = 0.0;
  double step_norm = 0.0;
  std::vector<double> cost_history;  // cost at init followed by cost after each update
};

GnReport gauss_newton(const TwoWayMeasurements& measurements, const WeightMatrix& weights,
                      const std::vector<Anchor>& anchors, const StateVector& init, const GnSettings& settings = {});

/// Axis-aligned cube, used for the random position initializer.
struct Cube
{
  Eigen::VectorXd center;
  double edge = 0.0;
};

/// Position uniform in the cube; clock offset, drift and velocity zero.
StateVector random_init(const Cube& bounds, std::uint64_t rng_seed);

}  // namespace twtoa
