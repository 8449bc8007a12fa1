#pragma once

#include <Eigen/Dense>
#include <vector>

#include "twtoa/conic_program.hpp"
#include "twtoa/conic_solver.hpp"
#include "twtoa/measurement.hpp"
#include "twtoa/model.hpp"

namespace twtoa
{

enum class MotionModel
{
  Moving,
  Stationary,  // velocity and motion-linked variables pinned to zero
};

struct SdpOptions
{
  MotionModel motion = MotionModel::Moving;
  /// Sign constraints on all 2M range entries of g; false restricts them to the
  /// M request ranges only.
  bool nonneg_all_ranges = true;
  /// Lengths are divided by this inside the program (meters).
  double length_scale = 1e3;
  /// Upper bounds y <= y_max and f <= f_max. The relaxed cost is flat along the
  /// offset/drift directions of S1 (y, f and psi absorb them), so without a
  /// bound the optimal face is unbounded and the dual has no interior point.
  /// y_max = (bound_factor * max_i(|q_i| + rho_i))^2, f_max = (bound_factor *
  /// max_speed)^2; both are far above any state the measurements allow.
  bool bound_lifted = true;
  double bound_factor = 2.0;
  double max_speed = kDefaultMaxSpeed;  // m/s
  /// Express positions relative to the anchor centroid. The relaxation is
  /// translation covariant, so this only affects conditioning.
  bool center_on_anchors = true;
};

/// Where each lifted quantity lives in the conic variable vector.
///
/// Free block: p (N), v (N), y, f, psi, z (M), B, Omega.
/// Nonnegative block: copies of the range entries of g, then the slacks of the
/// y and f bounds.
/// PSD blocks: S1 = [G g; g^T 1] (order 2M+3), [I p; p^T y], [I v; v^T f],
/// [I p+v; (p+v)^T y+f+psi] (order N+1 each; the last two only for Moving).
/// All lengths are divided by SdpOptions::length_scale. S1 is held in the
/// residual basis of SdpProblem::lifted_basis.
struct SdpVariables
{
  int dim = 0;
  int num_anchors = 0;
  std::vector<int> p;
  std::vector<int> v;
  std::vector<int> z;
  int y = -1;
  int f = -1;
  int psi = -1;
  int clock_offset = -1;
  int clock_drift = -1;
  std::vector<int> range_nonneg;  // nonnegative copies of g_0 .. g_{R-1}
  int y_slack = -1;               // y_max - y
  int f_slack = -1;               // f_max - f
  int lifted_block = 0;
  int position_block = 1;
  int velocity_block = -1;
  int cross_block = -1;

  int lifted_order() const { return 2 * num_anchors + 3; }
  int g_size() const { return 2 * num_anchors + 2; }
};

struct SdpProblem
{
  ConicProgram program;
  SdpVariables vars;
  SdpOptions options;
  Eigen::VectorXd origin;  // meters, subtracted from all positions
  Eigen::MatrixXd lifted_basis;  // T: [G g; g^T 1] = T S1 T^T (scaled units)
  Eigen::VectorXd delays;
  // scaled units: lengths / length_scale, weights * length_scale^2 / weight_unit
  Eigen::VectorXd gamma;
  Eigen::VectorXd scaled_weights;
  // largest weight; the estimator is invariant to a common weight factor, so the program
  // uses W / weight_unit and costs are multiplied back
  double weight_unit = 1.0;
  double gamma_weighted_norm = 0.0;  // gamma^T W gamma, original weights
  double y_max = 0.0;
  double f_max = 0.0;

  /// [G g; g^T 1] = T S1 T^T in scaled units.
  Eigen::MatrixXd lifted_matrix(const Eigen::VectorXd& x) const;
  /// Value of g_k (meters) in a program point.
  double g_value(const Eigen::VectorXd& x, int k) const;
  /// tr(W (A G A^T - 2 A g gamma^T)), the estimator's objective with the
  /// constant gamma^T W gamma dropped.
  double objective_value(const Eigen::VectorXd& x) const;
  /// Relaxed weighted least-squares cost, objective_value + gamma^T W gamma.
  /// This is what the program minimizes.
  double lifted_cost(const Eigen::VectorXd& x) const;
};

enum class SolveStatus
{
  Optimal,
  MaxIter,
  NumericalFailure,
  Infeasible,
};

const char* to_string(SolveStatus status);

struct SolveReport
{
  StateVector estimate;
  SolveStatus status = SolveStatus::NumericalFailure;
  double duality_gap = 0.0;  // primal minus dual objective of the normalized program
  double rel_gap = 0.0;
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  double tightness = 1.0;    // second / first eigenvalue of the solved [G g; g^T 1] block
  int iterations = 0;
  double wall_time = 0.0;    // seconds, solver only
};

/// A = [I_M, O_M, -1_M, 0_M; O_M, I_M, 1_M, delays] (2M x (2M+2)).
Eigen::MatrixXd build_A(const Eigen::VectorXd& delays);

/// One linear equality over g: coeffs^T g = rhs.
struct GLinearRow
{
  Eigen::VectorXd coeffs;
  double rhs = 0.0;
};

/// Zero partial derivatives of the weighted cost with respect to the clock
/// offset and drift, written as two linear rows over g:
///   (A_rho g - rho)^T W_rho 1 + (tau - A_tau g)^T W_tau 1 = 0
///   (A_tau g - tau)^T W_tau lambda = 0
std::pair<GLinearRow, GLinearRow> stationarity_constraints(const TwoWayMeasurements& measurements,
                                                           const WeightMatrix& weights, const Eigen::MatrixXd& a);

SdpProblem build_sdp(const TwoWayMeasurements& measurements, const WeightMatrix& weights,
                     const std::vector<Anchor>& anchors, const SdpOptions& options = {});

/// Lifts a state into a full program point (g, G = g g^T, y = p^T p, ...).
/// Satisfies every equality of the program by construction.
Eigen::VectorXd lifted_assignment(const SdpProblem& problem, const StateVector& state,
                                  const std::vector<Anchor>& anchors);

SolveReport extract_solution(const SdpProblem& problem, const IpmResult& result);

/// build_sdp + solve + extract_solution.
SolveReport solve_sdp(const TwoWayMeasurements& measurements, const WeightMatrix& weights,
                      const std::vector<Anchor>& anchors, const SdpOptions& options = {},
                      const IpmSettings& settings = {});

}  // namespace twtoa
