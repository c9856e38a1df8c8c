#pragma once

// Stable, platform-independent hashing used to derive per-problem seeds and
// to key the mock world. std::hash is not used because its values are not
// portable across standard libraries.

#include <cstdint>
#include <string_view>

namespace prefgen {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;

std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = kFnvOffsetBasis) noexcept;

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept;
std::uint64_t hash_combine(std::uint64_t seed, std::string_view bytes) noexcept;

// Maps a hash to [0, 1) using its top 53 bits.
double unit_interval(std::uint64_t h) noexcept;

// seed_i = hash(global_seed, problem_id)
std::uint64_t derive_problem_seed(std::uint64_t global_seed,
                                  std::string_view problem_id) noexcept;

}  // namespace prefgen
