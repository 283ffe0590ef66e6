#pragma once

#include <cstdint>
#include <random>

namespace deconv {

//! One splitmix64 step; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

//! Seed for an independent stream keyed by (seed, stream).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

class Rng
{
public:
  explicit Rng(std::uint64_t seed);

  //! Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double gamma(double shape, double rate);
  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

} // namespace deconv
