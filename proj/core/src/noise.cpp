#include "mef/noise.hpp"

#include <cmath>

namespace mef {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t CounterRng::bits(NoiseStream stream, std::uint64_t counter) const {
  const std::uint64_t key = splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(stream)));
  return splitmix64(key ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

double CounterRng::uniform(NoiseStream stream, std::uint64_t counter) const {
  // 53 random bits, shifted by half an ulp to exclude 0.
  return (static_cast<double>(bits(stream, counter) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(NoiseStream stream, std::uint64_t index) const {
  const double u1 = uniform(stream, 2 * index);
  const double u2 = uniform(stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace mef
