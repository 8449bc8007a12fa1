#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "twtoa/campaign.hpp"
#include "twtoa/model.hpp"
#include "twtoa/random.hpp"

namespace twtoa::test
{

/// Benchmark scene (8 cube-vertex anchors, UD in the 700 m cube) for one seed.
inline Scenario table_scene(std::uint64_t seed, double sigma, std::optional<double> speed = std::nullopt)
{
  return sample_scenario(CampaignConfig{}, sigma, seed, speed);
}

inline Eigen::VectorXd random_vector(Rng& rng, int n, double lo, double hi)
{
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i)
  {
    v(i) = rng.uniform(lo, hi);
  }
  return v;
}

inline double rel_diff(double a, double b)
{
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace twtoa::test
