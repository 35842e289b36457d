#pragma once

#include <cstdint>
#include <initializer_list>

namespace relkin {

/// SplitMix64 finaliser.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Derives an independent stream seed from a master seed and a path of
/// indices (experiment, sweep point, trial, ...). Each index is folded in as
///   s <- splitmix64(s ^ (index + 0x9E3779B97F4A7C15))
/// starting from s = splitmix64(master). The result depends only on the
/// inputs, so serial and threaded runs draw identical numbers.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept;

}  // namespace relkin
