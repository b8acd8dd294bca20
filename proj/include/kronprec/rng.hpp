#pragma once

// Reproducible random streams. The generator is xoshiro256** seeded through
// splitmix64; normal variates come from the Box-Muller transform, so a given
// seed yields the same stream on every platform and in every language that
// implements the same three published algorithms.

#include <array>
#include <cstdint>
#include <initializer_list>

namespace kronprec {

/// One step of splitmix64 (Steele, Lea, Flood); advances `state`.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Mixes a base seed with coordinates (cell indices, replicate index...) into
/// an independent child seed. Order of the coordinates matters.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords) noexcept;

/// xoshiro256** 1.0 (Blackman, Vigna).
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept;

    std::uint64_t operator()() noexcept;
    static constexpr std::uint64_t min() noexcept { return 0; }
    static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept;

private:
    std::array<std::uint64_t, 4> s_{};
};

/// Stream of standard normal variates (Box-Muller, both outputs used:
/// cos branch first, then sin branch).
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) noexcept : rng_(seed) {}

    double next() noexcept;
    Xoshiro256& engine() noexcept { return rng_; }

private:
    Xoshiro256 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline NormalStream standard_normal_stream(std::uint64_t seed) { return NormalStream(seed); }

}  // namespace kronprec
