#include <mcaurora/rng.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace mcaurora {

std::size_t Rng::index(std::size_t n)
{
    if (n <= 1)
        return 0;
    // rejection sampling keeps the draw exactly uniform
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = _engine();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

double Rng::normal()
{
    if (_has_spare) {
        _has_spare = false;
        return _spare;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    _spare = r * std::sin(a);
    _has_spare = true;
    return r * std::cos(a);
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view name, std::uint64_t index)
{
    // FNV-1a over the name, then mixed with the master seed and index
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(master ^ h) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

} // namespace mcaurora
