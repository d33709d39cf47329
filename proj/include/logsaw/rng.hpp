#ifndef LOGSAW_RNG_HPP
#define LOGSAW_RNG_HPP

#include <cmath>
#include <cstdint>

namespace logsaw {

// Small self-contained generator (splitmix64 core). The standard library
// distributions are implementation-defined, so everything that must be
// reproducible bit-for-bit across toolchains draws from this instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // inclusive integer range
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) return lo;
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Box-Muller; one value per call keeps draw order trivially reproducible.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Derives an independent stream, e.g. one per pipeline stage.
    static std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed ^ (0xd1b54a32d192ed03ull * (stream + 1)));
        return r.next_u64();
    }

private:
    std::uint64_t state_;
};

} // namespace logsaw

#endif
