#include "helpers.hpp"

#include <mcaurora/quantile.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace mcaurora;

namespace {

std::vector<std::vector<double>> sample(Rng& rng, std::size_t n, const std::function<double(Rng&)>& draw)
{
    std::vector<std::vector<double>> out(n);
    for (auto& z : out)
        z = {draw(rng), draw(rng)};
    return out;
}

} // namespace

TEST_CASE("transformed sample is close to uniform")
{
    Rng rng(1);
    // skewed latents squashed toward one corner
    auto train = sample(rng, 5000, [](Rng& r) { return std::pow(r.uniform(), 4.0); });
    const auto qt = QuantileTransform::fit(train, 1000);
    auto fresh = sample(rng, 5000, [](Rng& r) { return std::pow(r.uniform(), 4.0); });
    for (std::size_t d = 0; d < 2; ++d) {
        std::vector<double> mapped;
        for (const auto& z : fresh)
            mapped.push_back(qt.apply(d, z[d]));
        CHECK(testing::ks_distance(mapped, [](double u) { return std::clamp(u, 0.0, 1.0); }) <= 0.03);
    }
    // on the training sample itself the map is the empirical CDF
    std::vector<double> own;
    for (const auto& z : train)
        own.push_back(qt.apply(0, z[0]));
    CHECK(testing::ks_distance(own, [](double u) { return std::clamp(u, 0.0, 1.0); }) <= 0.02);
}

TEST_CASE("map is monotone and stays in the unit interval")
{
    Rng rng(2);
    auto train = sample(rng, 800, [](Rng& r) { return r.normal(); });
    const auto qt = QuantileTransform::fit(train, 1000);
    CHECK(qt.n_quantiles() == 800);
    double prev = -1.0;
    for (double v = -6.0; v <= 6.0; v += 0.001) {
        const double u = qt.apply(1, v);
        CHECK(u >= 0.0);
        CHECK(u <= 1.0);
        CHECK(u >= prev);
        prev = u;
    }
    CHECK(qt.apply(0, -100.0) == 0.0);
    CHECK(qt.apply(0, 100.0) == 1.0);
}

TEST_CASE("map agrees with the brute-force empirical CDF")
{
    Rng rng(3);
    auto train = sample(rng, 3000, [](Rng& r) { return r.uniform() * r.uniform(); });
    const std::size_t nq = 200;
    const auto qt = QuantileTransform::fit(train, nq);
    std::vector<double> col;
    for (const auto& z : train)
        col.push_back(z[0]);
    std::sort(col.begin(), col.end());
    for (int k = 0; k < 300; ++k) {
        const double v = rng.uniform() * 0.9;
        const double ecdf = static_cast<double>(std::upper_bound(col.begin(), col.end(), v) - col.begin()) /
                            static_cast<double>(col.size());
        CHECK(std::abs(qt.apply(0, v) - ecdf) <= 1.0 / static_cast<double>(nq) + 1e-3);
    }
}

TEST_CASE("degenerate dimension maps to one half")
{
    std::vector<std::vector<double>> train(50, {0.3, 0.0});
    for (std::size_t i = 0; i < train.size(); ++i)
        train[i][1] = static_cast<double>(i);
    const auto qt = QuantileTransform::fit(train, 1000);
    CHECK(qt.apply(0, 0.3) == 0.5);
    CHECK(qt.apply(0, -7.0) == 0.5);
    CHECK(qt.apply(1, 0.0) == 0.0);
    CHECK(qt.apply(1, 49.0) == 1.0);
}

TEST_CASE("a plateau maps to the middle of its probability range")
{
    // landmarks 0, 1, 1, 1, 2 at probabilities 0, .25, .5, .75, 1
    QuantileTransform qt({{0.0, 1.0, 1.0, 1.0, 2.0}});
    CHECK(qt.apply(0, 1.0) == doctest::Approx(0.5));
    CHECK(qt.apply(0, 0.5) == doctest::Approx(0.125));
    CHECK(qt.apply(0, 1.5) == doctest::Approx(0.875));
}

TEST_CASE("fit rejects ragged or empty input")
{
    std::vector<std::vector<double>> ragged{{0.1, 0.2}, {0.3}};
    CHECK_THROWS_AS(QuantileTransform::fit(ragged), StructuralError);
    std::vector<std::vector<double>> none;
    CHECK_THROWS_AS(QuantileTransform::fit(none), StructuralError);
}

TEST_CASE("quantile transform spreads concentrated latents over a grid")
{
    Rng rng(4);
    // sigmoid-saturated latents piled near the corners
    auto draw = [](Rng& r) {
        const double s = 1.0 / (1.0 + std::exp(-6.0 * r.normal()));
        return s;
    };
    auto train = sample(rng, 2000, draw);
    const auto qt = QuantileTransform::fit(train, 1000);
    auto cells = [&](bool transformed) {
        std::set<std::pair<int, int>> used;
        for (const auto& z : train) {
            const auto u = transformed ? qt.apply(z) : z;
            used.emplace(std::min(24, static_cast<int>(u[0] * 25)), std::min(24, static_cast<int>(u[1] * 25)));
        }
        return used.size();
    };
    CHECK(cells(true) > cells(false));
    CHECK(cells(true) >= 0.9 * 625);
}
