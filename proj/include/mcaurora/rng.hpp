#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mcaurora {

/// Portable random stream: a 64-bit Mersenne twister plus distribution code
/// written here, so that draws do not depend on the standard library's
/// implementation-defined distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : _engine(seed) {}

    std::uint64_t next_u64() { return _engine(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(_engine() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    std::mt19937_64& engine() { return _engine; }

private:
    std::mt19937_64 _engine;
    bool _has_spare = false;
    double _spare = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for the named substream `name` (and optional index) of a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view name, std::uint64_t index = 0);

inline Rng substream(std::uint64_t master, std::string_view name, std::uint64_t index = 0)
{
    return Rng(derive_seed(master, name, index));
}

} // namespace mcaurora
