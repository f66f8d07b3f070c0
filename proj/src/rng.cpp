#include "ilvm/rng.hpp"

#include <cmath>

#include "ilvm/errors.hpp"

namespace ilvm {

namespace {

// splitmix64 finalizer; bijective on 64 bits.
inline std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53

}  // namespace

std::uint64_t rng_word(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  std::uint64_t h = mix(seed + kGolden);
  h = mix(h ^ (stream + 2 * kGolden));
  h = mix(h ^ (counter + 3 * kGolden));
  return h;
}

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * kInv53;
}

double RngStream::next_uniform_pos() {
  return static_cast<double>((next_u64() >> 11) + 1) * kInv53;
}

double RngStream::next_normal() {
  const double u1 = next_uniform_pos();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double RngStream::next_laplace() {
  const double u = next_uniform() - 0.5;
  const double a = std::abs(u);
  const double mag = -std::log1p(-2.0 * a);  // a < 0.5 always
  return u < 0 ? -mag : mag;
}

std::uint64_t RngStream::next_index(std::uint64_t n) {
  if (n == 0) throw ContractError("next_index: n must be positive");
  const double u = next_uniform();
  auto idx = static_cast<std::uint64_t>(u * static_cast<double>(n));
  return idx >= n ? n - 1 : idx;
}

std::vector<double> RngStream::normal_vector(std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = next_normal();
  return out;
}

std::vector<double> RngStream::laplace_vector(std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = next_laplace();
  return out;
}

std::vector<double> RngStream::uniform_vector(std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = next_uniform();
  return out;
}

}  // namespace ilvm
