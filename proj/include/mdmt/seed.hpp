#pragma once

#include <cstdint>

namespace mdmt {

/// SplitMix64 finaliser: a stable, platform-independent 64-bit mix.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t combine_seed(std::uint64_t h, std::uint64_t v)
{
    return splitmix64(h ^ splitmix64(v));
}

} // namespace mdmt
