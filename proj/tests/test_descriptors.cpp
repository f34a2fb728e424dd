#include <mcaurora/descriptors.hpp>
#include <mcaurora/tasks.hpp>

#include <doctest.h>

using namespace mcaurora;

TEST_CASE("reductions against hand values")
{
    const std::vector<double> series{0.0, 2.0, -4.0, 6.0};
    const Bounds b{-10.0, 10.0};
    CHECK(reduce(series, {0, Reduction::MeanOverTime, b}) == doctest::Approx(0.55));
    CHECK(reduce(series, {0, Reduction::FinalValue, b}) == doctest::Approx(0.8));
    CHECK(reduce(series, {0, Reduction::MeanAbsolute, b}) == doctest::Approx(0.65));
    CHECK(reduce(series, {0, Reduction::FractionAbove, {0.0, 1.0}, 1.0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(reduce(std::vector<double>{}, {}), StructuralError);
}

TEST_CASE("hardcoded values at and beyond the bounds clamp into the unit interval")
{
    const Bounds b{-1.0, 1.0};
    CHECK(reduce(std::vector<double>{-1.0}, {0, Reduction::FinalValue, b}) == 0.0);
    CHECK(reduce(std::vector<double>{1.0}, {0, Reduction::FinalValue, b}) == 1.0);
    CHECK(reduce(std::vector<double>{-3.0}, {0, Reduction::FinalValue, b}) == 0.0);
    CHECK(reduce(std::vector<double>{3.0}, {0, Reduction::FinalValue, b}) == 1.0);
    // an FD of exactly 1 still lands in the last bin
    const std::vector<int> shape{10};
    const std::vector<Bounds> unit{{0.0, 1.0}};
    CHECK(bin_index(std::vector<double>{1.0}, shape, unit)[0] == 9);
}

TEST_CASE("hardcoded extractor reads the configured channels")
{
    HardcodedSpec spec{"pair", {{1, Reduction::FinalValue, {0.0, 4.0}}, {0, Reduction::MeanOverTime, {0.0, 2.0}}}};
    DescriptorExtractor ex(spec);
    CHECK(ex.out_dim() == 2);
    CHECK_FALSE(ex.learned());
    ObservationMatrix obs(2, 2, std::vector<double>{1.0, 1.0, 0.0, 2.0});
    const auto fd = ex.extract(obs);
    REQUIRE(fd.size() == 2);
    CHECK(fd[0] == doctest::Approx(0.5));
    CHECK(fd[1] == doctest::Approx(0.5));
    CHECK_THROWS_AS(ex.extract(ObservationMatrix(1, 2)), StructuralError);
    CHECK_THROWS_AS(ex.latents(std::span<const ObservationMatrix>(&obs, 1)), StructuralError);
    CHECK_THROWS_AS(DescriptorExtractor(HardcodedSpec{"empty", {}}), StructuralError);
}

TEST_CASE("zero-weight encoder maps every input to the centre")
{
    EnsembleTopology t;
    t.input_dim = 8;
    t.modules = 2;
    auto e = std::make_shared<ModularAutoEncoderEnsemble>(t, DiversityConfig{});
    e->set_scaling(InputScaling::identity(2, 4));
    DescriptorExtractor ex(LearnedDescriptor{e, 1, std::nullopt});
    CHECK(ex.learned());
    CHECK(ex.out_dim() == 2);
    ObservationMatrix obs(2, 4, 0.7);
    const auto fd = ex.extract(obs);
    CHECK(fd == FeatureVector{0.5, 0.5});
    CHECK_THROWS_AS(DescriptorExtractor(LearnedDescriptor{e, 2, std::nullopt}), StructuralError);
    CHECK_THROWS_AS(DescriptorExtractor(LearnedDescriptor{e, 0, QuantileTransform({{0.0, 1.0}})}), StructuralError);
}

TEST_CASE("learned extractor applies the quantile transform to the latents")
{
    EnsembleTopology t;
    t.input_dim = 4;
    t.modules = 1;
    auto e = std::make_shared<ModularAutoEncoderEnsemble>(t, DiversityConfig{});
    e->set_scaling(InputScaling::identity(1, 4));
    // all latents are 0.5; landmarks placing 0.5 at probability 0.25
    QuantileTransform qt({{0.0, 0.5, 1.0, 2.0, 3.0}, {0.0, 0.5, 1.0, 2.0, 3.0}});
    DescriptorExtractor ex(LearnedDescriptor{e, 0, qt});
    const auto fd = ex.extract(ObservationMatrix(1, 4, 0.1));
    CHECK(fd[0] == doctest::Approx(0.25));
    const std::vector<ObservationMatrix> batch(3, ObservationMatrix(1, 4, 0.1));
    const auto raw = ex.latents(batch);
    REQUIRE(raw.size() == 3);
    CHECK(raw[2][1] == 0.5);
}

TEST_CASE("a descriptor does not depend on the batch it is extracted in")
{
    EnsembleTopology t;
    t.input_dim = 30;
    t.modules = 1;
    auto e = std::make_shared<ModularAutoEncoderEnsemble>(t, DiversityConfig{});
    Rng rng(8);
    e->xavier_uniform_init(rng);
    std::vector<ObservationMatrix> batch;
    for (int i = 0; i < 37; ++i) {
        ObservationMatrix o(3, 10);
        for (double& v : o.flat())
            v = rng.normal();
        batch.push_back(o);
    }
    e->set_scaling(InputScaling::fit(batch));
    DescriptorExtractor ex(LearnedDescriptor{e, 0, std::nullopt});
    const auto all = ex.extract(batch);
    for (std::size_t n : {1u, 2u, 5u, 16u})
        for (std::size_t i = 0; i + n <= batch.size(); i += n) {
            const auto part = ex.extract(std::span<const ObservationMatrix>(batch.data() + i, n));
            for (std::size_t k = 0; k < n; ++k)
                CHECK(part[k] == all[i + k]);
        }
}

TEST_CASE("default descriptor pairs for the walker")
{
    auto task = make_task("walker");
    const auto pairs = fd_pairs_default(task->definition());
    REQUIRE(pairs.size() == 4);
    for (const auto& p : pairs) {
        CHECK(p.reductions.size() == 2);
        for (const auto& r : p.reductions)
            CHECK(r.channel < task->definition().n_obs_channels());
    }
    CHECK(pairs[0].reductions[0].reduction == Reduction::FinalValue);
    // the toy task lacks the named channels
    CHECK_THROWS_AS(fd_pairs_default(make_task("toy")->definition()), StructuralError);
}

TEST_CASE("reduction names round trip")
{
    for (auto r : {Reduction::MeanOverTime, Reduction::FinalValue, Reduction::MeanAbsolute, Reduction::FractionAbove})
        CHECK(reduction_from_string(to_string(r)) == r);
    CHECK_THROWS(reduction_from_string("median"));
}
