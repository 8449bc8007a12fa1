#include <gtest/gtest.h>

#include "helpers.hpp"
#include "twtoa/errors.hpp"
#include "twtoa/model.hpp"

using namespace twtoa;

namespace
{

Eigen::VectorXd v3(double x, double y, double z)
{
  return Eigen::Vector3d(x, y, z);
}

}  // namespace

TEST(PropagatePosition, Examples)
{
  EXPECT_EQ(propagate_position(v3(0, 0, 0), v3(1, 2, 3), 2.0), v3(2, 4, 6));
  EXPECT_EQ(propagate_position(v3(5, 5, 5), v3(0, 0, 0), 10.0), v3(5, 5, 5));
  EXPECT_EQ(propagate_position(v3(1, 0, 0), v3(-1, 0, 0), 1.0), v3(0, 0, 0));
}

TEST(PropagateClock, Examples)
{
  EXPECT_DOUBLE_EQ(propagate_clock(0.0, 3.0, 0.01), 0.03);
  EXPECT_DOUBLE_EQ(propagate_clock(6000.0, 0.0, 1.0), 6000.0);
  EXPECT_NEAR(propagate_clock(1.0, -100.0, 0.01), 0.0, 1e-15);
}

TEST(PropagatePosition, CompositionLaw)
{
  Rng rng(7);
  for (int k = 0; k < 1000; ++k)
  {
    const Eigen::VectorXd p = test::random_vector(rng, 3, -500, 500);
    const Eigen::VectorXd v = test::random_vector(rng, 3, -60, 60);
    const double a = rng.uniform(-1, 1);
    const double b = rng.uniform(-1, 1);
    const Eigen::VectorXd two = propagate_position(propagate_position(p, v, a), v, b);
    const Eigen::VectorXd one = propagate_position(p, v, a + b);
    EXPECT_LE((two - one).norm(), 1e-12 * (1.0 + p.norm()));
  }
}

TEST(PropagateClock, AffineInDt)
{
  Rng rng(8);
  for (int k = 0; k < 1000; ++k)
  {
    const double b = rng.uniform(0, 6000);
    const double w = rng.uniform(-3000, 3000);
    const double d1 = rng.uniform(0, 0.1);
    const double d2 = rng.uniform(0, 0.1);
    EXPECT_NEAR(propagate_clock(b, w, d1) + propagate_clock(b, w, d2) - b, propagate_clock(b, w, d1 + d2),
                1e-12 * 6000);
  }
}

TEST(StateVector, FlattenLayoutAndRoundTrip)
{
  StateVector s;
  s.p = v3(1, 2, 3);
  s.v = v3(7, 8, 9);
  s.clock_offset = 4;
  s.clock_drift = 5;
  Eigen::VectorXd expected(8);
  expected << 1, 2, 3, 4, 5, 7, 8, 9;
  EXPECT_EQ(flatten(s), expected);
  const StateVector back = unflatten(expected, 3);
  EXPECT_EQ(back.p, s.p);
  EXPECT_EQ(back.v, s.v);
  EXPECT_EQ(back.clock_offset, 4);
  EXPECT_EQ(back.clock_drift, 5);
  EXPECT_THROW(unflatten(Eigen::VectorXd::Zero(7), 3), DimensionMismatch);
}

TEST(Scenario, ValidateRejectsBadInput)
{
  const Scenario good = test::table_scene(1, 0.1);
  EXPECT_NO_THROW(validate(good));

  Scenario fast = good;
  fast.ud.v = v3(2000, 0, 0);
  EXPECT_THROW(validate(fast), InvalidScenario);

  Scenario nan = good;
  nan.ud.p(0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(validate(nan), InvalidScenario);

  Scenario few = good;
  few.anchors.resize(3);
  few.schedule.delays.conservativeResize(3);
  few.sigma_an.conservativeResize(3);
  EXPECT_THROW(validate(few), InvalidScenario);
}
