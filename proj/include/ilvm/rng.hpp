#pragma once

#include <cstdint>
#include <vector>

namespace ilvm {

// Well-known stream ids. Every random draw in the library is a pure function
// of (seed, stream, counter), so independent streams never collide and a
// saved counter is enough to resume a run exactly.
namespace stream_id {
inline constexpr std::uint64_t data_batch = 1;
inline constexpr std::uint64_t prior_batch = 2;
inline constexpr std::uint64_t posterior_noise = 3;
inline constexpr std::uint64_t likelihood_noise = 4;
inline constexpr std::uint64_t init = 5;
inline constexpr std::uint64_t split = 6;
inline constexpr std::uint64_t eval = 7;
inline constexpr std::uint64_t bank = 8;
inline constexpr std::uint64_t synthetic = 9;
}  // namespace stream_id

// Stateless mix of (seed, stream, counter) into one 64-bit word.
std::uint64_t rng_word(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

// Counter-based generator. Copyable; the counter is the only mutable state.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t counter = 0;

  RngStream() = default;
  RngStream(std::uint64_t seed_, std::uint64_t stream_, std::uint64_t counter_ = 0)
      : seed(seed_), stream(stream_), counter(counter_) {}

  std::uint64_t next_u64() { return rng_word(seed, stream, counter++); }

  // Uniform on [0, 1).
  double next_uniform();
  // Uniform on (0, 1].
  double next_uniform_pos();
  // Standard normal via Box-Muller; consumes exactly two words per draw.
  double next_normal();
  // Standard Laplace (scale 1) via inverse CDF; one word per draw.
  double next_laplace();
  // Uniform integer in [0, n).
  std::uint64_t next_index(std::uint64_t n);

  std::vector<double> normal_vector(std::size_t n);
  std::vector<double> laplace_vector(std::size_t n);
  std::vector<double> uniform_vector(std::size_t n);
};

}  // namespace ilvm
