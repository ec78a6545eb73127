#include "moelab/rng.hpp"

namespace moelab::rng {

double uniform_symmetric(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                         double bound) noexcept {
  const double u = to_unit(bits(stream_key(seed, stream), counter));
  return (2.0 * u - 1.0) * bound;
}

}  // namespace moelab::rng
