#include "deconv/random.hpp"

namespace deconv {

std::uint64_t splitmix64(std::uint64_t& state)
{
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream)
{
  std::uint64_t state = seed;
  std::uint64_t a = splitmix64(state);
  state = a ^ (stream * 0xd1b54a32d192ed03ULL);
  splitmix64(state);
  return splitmix64(state);
}

Rng::Rng(std::uint64_t seed)
{
  std::uint64_t state = seed;
  std::seed_seq seq{ static_cast<std::uint32_t>(splitmix64(state)),
                     static_cast<std::uint32_t>(splitmix64(state)),
                     static_cast<std::uint32_t>(splitmix64(state)),
                     static_cast<std::uint32_t>(splitmix64(state)) };
  engine_.seed(seq);
}

double Rng::uniform()
{
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gamma(double shape, double rate)
{
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(engine_);
}

} // namespace deconv
