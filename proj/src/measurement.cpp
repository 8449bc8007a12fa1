#include "twtoa/measurement.hpp"

#include <cmath>
#include <string>

#include "twtoa/errors.hpp"
#include "twtoa/random.hpp"

namespace twtoa
{
namespace
{

double checked_range(const Eigen::VectorXd& diff, const char* what)
{
  const double range = diff.norm();
  if (!(range >= kCoincidenceThreshold))
  {
    throw CoincidentGeometry(std::string(what) + ": anchor coincides with UD position");
  }
  return range;
}

void check_sizes(const StateVector& theta, const std::vector<Anchor>& anchors, const Eigen::VectorXd& delays)
{
  if (anchors.empty())
  {
    throw DimensionMismatch("no anchors");
  }
  if (delays.size() != static_cast<Eigen::Index>(anchors.size()))
  {
    throw DimensionMismatch("delay count does not match anchor count");
  }
  for (const auto& a : anchors)
  {
    if (a.q.size() != theta.p.size())
    {
      throw DimensionMismatch("anchor dimension does not match state dimension");
    }
  }
  if (theta.v.size() != theta.p.size())
  {
    throw DimensionMismatch("velocity dimension does not match position dimension");
  }
}

}  // namespace

Eigen::VectorXd TwoWayMeasurements::stacked() const
{
  Eigen::VectorXd gamma(2 * rho.size());
  gamma << rho, tau;
  return gamma;
}

double request_toa_clean(const Eigen::VectorXd& q, const UdState& state)
{
  return checked_range(q - state.p, "request TOA") - state.clock_offset;
}

double response_toa_clean(const Eigen::VectorXd& q, const UdState& state, double delay)
{
  const Eigen::VectorXd displaced = propagate_position(state.p, state.v, delay);
  return checked_range(q - displaced, "response TOA") + propagate_clock(state.clock_offset, state.clock_drift, delay);
}

Eigen::VectorXd eval_h(const StateVector& theta, const std::vector<Anchor>& anchors, const Eigen::VectorXd& delays)
{
  check_sizes(theta, anchors, delays);
  const auto m = static_cast<Eigen::Index>(anchors.size());
  Eigen::VectorXd h(2 * m);
  for (Eigen::Index i = 0; i < m; ++i)
  {
    h(i) = request_toa_clean(anchors[i].q, theta);
    h(m + i) = response_toa_clean(anchors[i].q, theta, delays(i));
  }
  return h;
}

Eigen::MatrixXd jacobian_h(const StateVector& theta, const std::vector<Anchor>& anchors,
                           const Eigen::VectorXd& delays)
{
  check_sizes(theta, anchors, delays);
  const auto m = static_cast<Eigen::Index>(anchors.size());
  const Eigen::Index n = theta.p.size();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * m, 2 * n + 2);
  for (Eigen::Index i = 0; i < m; ++i)
  {
    const Eigen::VectorXd to_anchor = anchors[i].q - theta.p;
    const Eigen::VectorXd u = to_anchor / checked_range(to_anchor, "jacobian");
    jac.block(i, 0, 1, n) = -u.transpose();
    jac(i, n) = -1.0;

    const double dt = delays(i);
    const Eigen::VectorXd to_anchor_displaced = anchors[i].q - propagate_position(theta.p, theta.v, dt);
    const Eigen::VectorXd ud = to_anchor_displaced / checked_range(to_anchor_displaced, "jacobian");
    jac.block(m + i, 0, 1, n) = -ud.transpose();
    jac(m + i, n) = 1.0;
    jac(m + i, n + 1) = dt;
    jac.block(m + i, n + 2, 1, n) = -dt * ud.transpose();
  }
  return jac;
}

TwoWayMeasurements simulate_clean(const Scenario& scenario)
{
  validate(scenario);
  TwoWayMeasurements out;
  const Eigen::VectorXd h = eval_h(scenario.ud, scenario.anchors, scenario.schedule.delays);
  const Eigen::Index m = scenario.num_anchors();
  out.rho = h.head(m);
  out.tau = h.tail(m);
  out.delays = scenario.schedule.delays;
  out.sigma_an = scenario.sigma_an;
  out.sigma_ud = scenario.sigma_ud;
  return out;
}

TwoWayMeasurements simulate(const Scenario& scenario, std::uint64_t rng_seed)
{
  TwoWayMeasurements out = simulate_clean(scenario);
  Rng rng(rng_seed);
  for (Eigen::Index i = 0; i < out.rho.size(); ++i)
  {
    out.rho(i) += scenario.sigma_an(i) * rng.gaussian();
  }
  for (Eigen::Index i = 0; i < out.tau.size(); ++i)
  {
    out.tau(i) += scenario.sigma_ud * rng.gaussian();
  }
  return out;
}

WeightMatrix build_weights(const Eigen::VectorXd& sigma_an, double sigma_ud)
{
  if (sigma_an.size() == 0)
  {
    throw DimensionMismatch("empty sigma vector");
  }
  if (!(sigma_an.array() > 0.0).all() || !(sigma_ud > 0.0) || !sigma_an.allFinite() || !std::isfinite(sigma_ud))
  {
    throw NonPositiveSigma("all noise standard deviations must be positive and finite");
  }
  const Eigen::Index m = sigma_an.size();
  WeightMatrix w;
  w.diag.resize(2 * m);
  w.diag.head(m) = sigma_an.array().square().inverse();
  w.diag.tail(m).setConstant(1.0 / (sigma_ud * sigma_ud));
  return w;
}

WeightMatrix build_weights(const TwoWayMeasurements& measurements)
{
  return build_weights(measurements.sigma_an, measurements.sigma_ud);
}

}  // namespace twtoa
