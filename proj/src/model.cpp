#include "twtoa/model.hpp"

#include <cmath>
#include <set>
#include <string>

#include "twtoa/errors.hpp"

namespace twtoa
{

Eigen::VectorXd flatten(const StateVector& state)
{
  const int n = state.dim();
  Eigen::VectorXd flat(2 * n + 2);
  flat.head(n) = state.p;
  flat(n) = state.clock_offset;
  flat(n + 1) = state.clock_drift;
  flat.tail(n) = state.v;
  return flat;
}

StateVector unflatten(const Eigen::VectorXd& flat, int dim)
{
  if (flat.size() != 2 * dim + 2)
  {
    throw DimensionMismatch("state vector length " + std::to_string(flat.size()) + " does not match dimension " +
                            std::to_string(dim));
  }
  StateVector state;
  state.p = flat.head(dim);
  state.clock_offset = flat(dim);
  state.clock_drift = flat(dim + 1);
  state.v = flat.tail(dim);
  return state;
}

Eigen::VectorXd propagate_position(const Eigen::VectorXd& p, const Eigen::VectorXd& v, double dt)
{
  return p + v * dt;
}

double propagate_clock(double offset, double drift, double dt)
{
  return offset + drift * dt;
}

void validate(const Scenario& scenario, double max_speed)
{
  const int n = scenario.dim();
  if (n != 2 && n != 3)
  {
    throw InvalidScenario("dimension must be 2 or 3, got " + std::to_string(n));
  }
  if (scenario.ud.v.size() != n)
  {
    throw InvalidScenario("velocity dimension does not match position dimension");
  }
  if (!scenario.ud.p.allFinite() || !scenario.ud.v.allFinite() || !std::isfinite(scenario.ud.clock_offset) ||
      !std::isfinite(scenario.ud.clock_drift))
  {
    throw InvalidScenario("UD state has non-finite components");
  }
  if (scenario.ud.v.norm() > max_speed)
  {
    throw InvalidScenario("UD speed " + std::to_string(scenario.ud.v.norm()) + " m/s exceeds configured maximum " +
                          std::to_string(max_speed) + " m/s (unit mistake?)");
  }
  const int m = scenario.num_anchors();
  if (2 * m < 2 * n + 2)
  {
    throw InvalidScenario("need at least " + std::to_string(n + 1) + " anchors in " + std::to_string(n) + "-D, got " +
                          std::to_string(m));
  }
  for (const auto& anchor : scenario.anchors)
  {
    if (anchor.q.size() != n || !anchor.q.allFinite())
    {
      throw InvalidScenario("anchor " + std::to_string(anchor.id) + " has bad coordinates");
    }
  }
  const auto& delays = scenario.schedule.delays;
  if (delays.size() != m)
  {
    throw InvalidScenario("schedule has " + std::to_string(delays.size()) + " delays for " + std::to_string(m) +
                          " anchors");
  }
  if (!delays.allFinite() || (delays.array() <= 0.0).any())
  {
    throw InvalidScenario("reply delays must be finite and positive");
  }
  if (std::set<double>(delays.data(), delays.data() + delays.size()).size() < 2)
  {
    throw InvalidScenario("at least two distinct reply delays are needed to observe clock drift");
  }
  if (scenario.sigma_an.size() != m)
  {
    throw InvalidScenario("sigma_an must have one entry per anchor");
  }
  if (!scenario.sigma_an.allFinite() || (scenario.sigma_an.array() < 0.0).any() || !std::isfinite(scenario.sigma_ud) ||
      scenario.sigma_ud < 0.0)
  {
    throw InvalidScenario("noise levels must be finite and non-negative");
  }
  if (!(scenario.c > 0.0) || !std::isfinite(scenario.c))
  {
    throw InvalidScenario("propagation speed must be positive");
  }
}

Eigen::MatrixXd anchor_matrix(const std::vector<Anchor>& anchors)
{
  if (anchors.empty())
  {
    return {};
  }
  Eigen::MatrixXd out(anchors.front().q.size(), static_cast<Eigen::Index>(anchors.size()));
  for (std::size_t i = 0; i < anchors.size(); ++i)
  {
    out.col(static_cast<Eigen::Index>(i)) = anchors[i].q;
  }
  return out;
}

}  // namespace twtoa
