#include "prefgen/hashing.h"

namespace prefgen {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept {
  constexpr std::uint64_t kPrime = 0x00000100000001b3ULL;
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kPrime;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return mix64(seed ^ mix64(value));
}

std::uint64_t hash_combine(std::uint64_t seed, std::string_view bytes) noexcept {
  return mix64(seed ^ fnv1a64(bytes));
}

double unit_interval(std::uint64_t h) noexcept {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::uint64_t derive_problem_seed(std::uint64_t global_seed,
                                  std::string_view problem_id) noexcept {
  return hash_combine(mix64(global_seed), problem_id);
}

}  // namespace prefgen
