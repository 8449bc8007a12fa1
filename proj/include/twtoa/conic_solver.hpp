#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "twtoa/conic_program.hpp"

namespace twtoa
{

struct IpmSettings
{
  int max_iter = 50;
  double tol_gap = 1e-7;   // relative duality gap
  double tol_feas = 1e-7;  // relative primal / dual infeasibility
  double step_fraction = 0.98;
  /// Per-iteration trace lines go here when set.
  std::ostream* trace = nullptr;
};

/// Throws std::invalid_argument on out-of-range settings.
void validate(const IpmSettings& settings);

enum class IpmStatus
{
  Optimal,
  MaxIter,
  NumericalFailure,
  Infeasible,
};

const char* to_string(IpmStatus status);

struct IpmIterate
{
  int iter = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double complementarity = 0.0;  // <x, s> over the cone part
  double rel_gap = 0.0;
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  double min_primal_eig = 0.0;   // smallest eigenvalue over all cone blocks of x (LP entries count as 1x1)
  double min_dual_eig = 0.0;
  double step_primal = 0.0;      // step taken to reach the next iterate
  double step_dual = 0.0;
  double sigma = 0.0;
};

struct IpmResult
{
  Eigen::VectorXd x;  // primal point, full variable vector
  Eigen::VectorXd y;  // equality multipliers, one per original row (zero for removed rows)
  Eigen::VectorXd s;  // dual slack, zero on free variables
  IpmStatus status = IpmStatus::NumericalFailure;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double rel_gap = 0.0;
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  int iterations = 0;
  int removed_rows = 0;
  double wall_time = 0.0;  // seconds
  std::vector<IpmIterate> trace;
};

struct KktResiduals
{
  double primal = 0.0;  // ||b - A x|| / (1 + ||b||)
  double dual = 0.0;    // ||c - A^T y - s|| / (1 + ||c||), s taken as zero on free variables
  double gap = 0.0;     // (c^T x - b^T y) / (1 + ||b|| + ||c||), signed
};

KktResiduals residuals(const ConicProgram& program, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& s);

/// Primal-dual path-following interior-point method with Nesterov-Todd
/// scaling and Mehrotra predictor-corrector steps. Dense linear algebra;
/// intended for programs with a few hundred variables.
IpmResult solve(const ConicProgram& program, const IpmSettings& settings = {});

}  // namespace twtoa
