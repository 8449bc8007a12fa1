#include "twtoa/gauss_newton.hpp"

#include <cmath>
#include <limits>

#include "twtoa/errors.hpp"
#include "twtoa/random.hpp"

namespace twtoa
{

double wls_cost(const StateVector& theta, const TwoWayMeasurements& measurements, const WeightMatrix& weights,
                const std::vector<Anchor>& anchors)
{
  const Eigen::VectorXd residual = measurements.stacked() - eval_h(theta, anchors, measurements.delays);
  if (weights.size() != residual.size())
  {
    throw DimensionMismatch("weight matrix size does not match measurement count");
  }
  return residual.dot(weights.diag.cwiseProduct(residual));
}

const char* to_string(GnStatus status)
{
  switch (status)
  {
    case GnStatus::Converged:
      return "converged";
    case GnStatus::MaxIter:
      return "max_iter";
    case GnStatus::SingularNormalMatrix:
      return "singular_normal_matrix";
    case GnStatus::CoincidentGeometry:
      return "coincident_geometry";
    case GnStatus::Diverged:
      return "diverged";
  }
  return "unknown";
}

GnReport gauss_newton(const TwoWayMeasurements& measurements, const WeightMatrix& weights,
                      const std::vector<Anchor>& anchors, const StateVector& init, const GnSettings& settings)
{
  const int n = init.dim();
  const int m = measurements.size();
  if (2 * m < 2 * n + 2)
  {
    throw DimensionMismatch("fewer measurements than unknowns");
  }
  if (!flatten(init).allFinite())
  {
    throw DimensionMismatch("non-finite initial state");
  }

  const Eigen::VectorXd gamma = measurements.stacked();
  GnReport report;
  Eigen::VectorXd theta = flatten(init);
  bool perturbed = false;

  // Evaluates residual and Jacobian at theta; on coincident geometry nudges the
  // iterate by 1e-6 m once before giving up.
  auto linearize = [&](Eigen::VectorXd& residual, Eigen::MatrixXd& jac) -> bool {
    for (;;)
    {
      try
      {
        const StateVector state = unflatten(theta, n);
        residual = gamma - eval_h(state, anchors, measurements.delays);
        jac = jacobian_h(state, anchors, measurements.delays);
        return true;
      }
      catch (const CoincidentGeometry&)
      {
        if (perturbed)
        {
          return false;
        }
        perturbed = true;
        theta.head(n).array() += 1e-6;
      }
    }
  };

  Eigen::VectorXd residual;
  Eigen::MatrixXd jac;
  if (!linearize(residual, jac))
  {
    report.estimate = unflatten(theta, n);
    report.status = GnStatus::CoincidentGeometry;
    report.final_cost = std::numeric_limits<double>::infinity();
    return report;
  }
  double cost = residual.dot(weights.diag.cwiseProduct(residual));
  report.cost_history.push_back(cost);
  report.status = GnStatus::MaxIter;

  for (int iter = 0; iter < settings.max_iter; ++iter)
  {
    const Eigen::MatrixXd jtw = jac.transpose() * weights.diag.asDiagonal();
    Eigen::MatrixXd normal = jtw * jac;
    const Eigen::VectorXd rhs = jtw * residual;

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin > settings.max_condition)
    {
      report.status = GnStatus::SingularNormalMatrix;
      break;
    }
    if (settings.levenberg_marquardt)
    {
      normal.diagonal() *= 1.0 + settings.lm_lambda;
    }
    const Eigen::VectorXd step = normal.ldlt().solve(rhs);
    theta += step;
    report.iterations = iter + 1;
    report.step_norm = step.norm();

    if (!theta.allFinite())
    {
      theta -= step;
      report.status = GnStatus::Diverged;
      break;
    }
    if (!linearize(residual, jac))
    {
      report.status = GnStatus::CoincidentGeometry;
      break;
    }
    cost = residual.dot(weights.diag.cwiseProduct(residual));
    report.cost_history.push_back(cost);
    if (report.step_norm < settings.tol)
    {
      report.status = GnStatus::Converged;
      report.converged = true;
      break;
    }
  }

  report.estimate = unflatten(theta, n);
  report.final_cost = report.cost_history.back();
  if (report.status == GnStatus::CoincidentGeometry)
  {
    report.final_cost = std::numeric_limits<double>::infinity();
  }
  return report;
}

StateVector random_init(const Cube& bounds, std::uint64_t rng_seed)
{
  const Eigen::Index n = bounds.center.size();
  Rng rng(rng_seed);
  StateVector init;
  init.p.resize(n);
  for (Eigen::Index k = 0; k < n; ++k)
  {
    init.p(k) = bounds.center(k) + rng.uniform(-0.5, 0.5) * bounds.edge;
  }
  init.v = Eigen::VectorXd::Zero(n);
  return init;
}

}  // namespace twtoa
