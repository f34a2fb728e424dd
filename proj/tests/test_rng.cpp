#include <mcaurora/rng.hpp>

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

using namespace mcaurora;

TEST_CASE("same seed, same stream")
{
    Rng a(99), b(99);
    for (int i = 0; i < 100; ++i)
        CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("named substreams are distinct and reproducible")
{
    CHECK(derive_seed(1, "mutation") == derive_seed(1, "mutation"));
    CHECK(derive_seed(1, "mutation") != derive_seed(1, "selection"));
    CHECK(derive_seed(1, "eval", 0) != derive_seed(1, "eval", 1));
    CHECK(derive_seed(1, "eval", 0) != derive_seed(2, "eval", 0));
    std::set<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 1000; ++i)
        seeds.insert(derive_seed(7, "eval", i));
    CHECK(seeds.size() == 1000);
}

TEST_CASE("uniform and index ranges")
{
    Rng r(5);
    double sum = 0.0;
    const int n = 100000;
    std::vector<int> counts(7, 0);
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        ++counts[r.index(7)];
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
    for (int c : counts)
        CHECK(std::abs(c - n / 7.0) < 5 * std::sqrt(n / 7.0));
}

TEST_CASE("normal moments")
{
    Rng r(8);
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
    }
    CHECK(std::abs(s / n) < 0.02);
    CHECK(std::abs(s2 / n - 1.0) < 0.03);
}
