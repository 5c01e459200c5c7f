#ifndef CONFOR_RNG_HPP
#define CONFOR_RNG_HPP

#include <cstdint>
#include <random>
#include <span>

#include "confor/math.hpp"

namespace confor {

// All sampling goes through explicit seeded streams so that results are
// reproducible bit-for-bit and sample blocks can be generated independently:
// block b of a run with master seed s always uses stream_seed(s, b),
// regardless of how many threads or passes produced the other blocks.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t block) {
    return splitmix64(splitmix64(master) ^ splitmix64(block + 0x51ed270b76b7d1e5ull));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in (0,1), 53-bit resolution, endpoints excluded.
    double next_uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal by inverse-CDF transform; avoids the
    // implementation-defined std::normal_distribution.
    double next_normal() { return normal_quantile(next_uniform()); }

private:
    std::mt19937_64 engine_;
};

inline constexpr std::size_t kSampleBlock = 8192;

// Invokes fn(block_index, first_row, row_count) covering rows [0, count).
template <typename Fn>
void for_each_block(std::size_t count, Fn&& fn) {
    std::size_t start = 0, block = 0;
    while (start < count) {
        const std::size_t len = std::min(kSampleBlock, count - start);
        fn(block, start, len);
        start += len;
        ++block;
    }
}

}  // namespace confor

#endif
