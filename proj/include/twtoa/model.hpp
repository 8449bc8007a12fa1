#pragma once

#include <Eigen/Dense>
#include <vector>

namespace twtoa
{

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kDefaultMaxSpeed = 1000.0;
inline constexpr double kCoincidenceThreshold = 1e-9;

// All timing quantities are carried in range units: a clock offset b (seconds) is
// stored as B = c*b (meters) and a drift w (s/s) as Omega = c*w (meters/second).

struct Anchor
{
  int id = 0;
  Eigen::VectorXd q;  // meters
};

/// Kinematic and clock state of the user device at the request epoch.
struct UdState
{
  Eigen::VectorXd p;          // meters
  Eigen::VectorXd v;          // meters/second
  double clock_offset = 0.0;  // B, meters
  double clock_drift = 0.0;   // Omega, meters/second

  int dim() const { return static_cast<int>(p.size()); }
};

/// The estimation unknown. Flattened layout is [p, B, Omega, v] (length 2N+2);
/// jacobian_h and the Fisher information use the same column order.
using StateVector = UdState;

Eigen::VectorXd flatten(const StateVector& state);
StateVector unflatten(const Eigen::VectorXd& flat, int dim);

struct Schedule
{
  double t_tx = 0.0;       // seconds
  Eigen::VectorXd delays;  // reply delay of each anchor relative to t_tx, seconds
};

struct Scenario
{
  std::vector<Anchor> anchors;
  UdState ud;
  Schedule schedule;
  Eigen::VectorXd sigma_an;  // request-side noise std dev per anchor, meters
  double sigma_ud = 0.0;     // response-side noise std dev, meters
  double c = kSpeedOfLight;

  int dim() const { return ud.dim(); }
  int num_anchors() const { return static_cast<int>(anchors.size()); }
};

Eigen::VectorXd propagate_position(const Eigen::VectorXd& p, const Eigen::VectorXd& v, double dt);
double propagate_clock(double offset, double drift, double dt);

/// Throws InvalidScenario on any violated invariant. Zero noise levels are
/// accepted here (noise-free simulation); weighting requires them positive.
void validate(const Scenario& scenario, double max_speed = kDefaultMaxSpeed);

/// Anchor positions stacked column-wise (N x M).
Eigen::MatrixXd anchor_matrix(const std::vector<Anchor>& anchors);

}  // namespace twtoa
