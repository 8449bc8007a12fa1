#pragma once

#include <cstdint>
#include <random>

namespace twtoa
{

/// Reproducible random stream.
///
/// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. The distribution transforms are implemented here instead of
/// using <random> distributions (those are implementation-defined):
///   uniform01: top 53 bits of one draw times 2^-53, in [0, 1)
///   gaussian:  Box-Muller, cos branch then sin branch of the same pair
/// so a given seed yields bit-identical draws on every conforming platform.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01();
  double uniform(double lo, double hi);
  double gaussian();

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derives an independent sub-stream seed (splitmix64 finalizer of seed and stream id).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace twtoa
