#pragma once

#include <cstdint>
#include <random>

namespace xeno {

/// SplitMix64 finalizer. Maps (seed, stream) pairs to well-separated
/// engine seeds so that draw i of a batch never depends on how the batch
/// was partitioned across workers.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Thin wrapper over mt19937_64 with a portable uniform draw (the standard
/// distributions are implementation-defined, which would break
/// byte-identical reports across toolchains).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace xeno
