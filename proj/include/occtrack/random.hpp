#pragma once

#include <cstdint>
#include <random>

namespace occtrack
{
using Rng = std::mt19937_64;

/// Stream tags keep differently-purposed draws from one seed independent.
enum class StreamTag : std::uint32_t
{
    initialization = 1,
    propagation = 2,
    resampling = 3,
    simulation = 4,
};

namespace detail
{
/// splitmix64 finalizer: a bijective 64-bit mix.
inline std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

/**
 * Independent generator for (seed, tag, a, b). Each particle of each frame
 * gets its own stream, so the draws do not depend on evaluation order or on
 * the number of worker threads.
 */
inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0)
{
    std::uint64_t h = detail::mix64(seed);
    h = detail::mix64(h ^ static_cast<std::uint64_t>(tag));
    h = detail::mix64(h ^ a);
    h = detail::mix64(h ^ b);
    return Rng(h);
}

}  // namespace occtrack
