#pragma once

#include <array>
#include <cstdint>

namespace esd {

// xoshiro256** seeded through splitmix64. Owned by a single run; never global.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed = 0) noexcept {
        std::uint64_t x = seed;
        for (auto& s : state_) s = splitmix64(x);
    }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform integer on {0, ..., max_inclusive}; rejection sampling, no modulo bias.
    std::uint64_t uniform_int(std::uint64_t max_inclusive) noexcept {
        if (max_inclusive == UINT64_MAX) return next();
        const std::uint64_t range = max_inclusive + 1;
        // Largest multiple of range representable in [0, 2^64).
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range + 1) % range;
        std::uint64_t x;
        do {
            x = next();
        } while (x > limit);
        return x % range;
    }

    const std::array<std::uint64_t, 4>& state() const noexcept { return state_; }

    friend bool operator==(const Xoshiro256&, const Xoshiro256&) = default;

private:
    static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace esd
