#include <mcaurora/nn.hpp>

#include <doctest.h>

#include <cmath>

using namespace mcaurora;
using namespace mcaurora::nn;

namespace {
DenseNet small_net(double dropout = 0.0)
{
    const std::vector<int> sizes{3, 4, 2};
    const std::vector<Activation> act{Activation::Elu, Activation::Sigmoid};
    const std::vector<double> drop{dropout, 0.0};
    return DenseNet(sizes, act, drop);
}
}

TEST_CASE("xavier uniform bounds on a 4 -> 2 layer")
{
    const std::vector<int> sizes{4, 2};
    const std::vector<Activation> act{Activation::Linear};
    const std::vector<double> drop{0.0};
    DenseNet net(sizes, act, drop);
    Rng rng(1);
    net.xavier_uniform_init(rng);
    const auto& l = net.layers().front();
    CHECK(l.weight.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(l.weight.cwiseAbs().maxCoeff() > 0.0);
    CHECK(l.bias.isZero(0.0));
}

TEST_CASE("xavier uniform mean is near zero")
{
    // 100 -> 1000 layer: 1e5 weights uniform in +-a
    const std::vector<int> sizes{100, 1000};
    const std::vector<Activation> act{Activation::Linear};
    const std::vector<double> drop{0.0};
    DenseNet net(sizes, act, drop);
    Rng rng(2);
    net.xavier_uniform_init(rng);
    const auto& w = net.layers().front().weight;
    const double a = std::sqrt(6.0 / 1100.0);
    const double sigma_mean = a / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
    CHECK(std::abs(w.mean()) < 3.0 * sigma_mean);
    CHECK(w.cwiseAbs().maxCoeff() <= a);
}

TEST_CASE("zero network with sigmoid head outputs one half")
{
    DenseNet net = small_net();
    Matrix x = Matrix::Random(5, 3);
    Matrix y = net.forward(x);
    CHECK(y.rows() == 5);
    CHECK(y.cols() == 2);
    for (Eigen::Index i = 0; i < y.size(); ++i)
        CHECK(y.data()[i] == 0.5);
}

TEST_CASE("forward matches a hand computation")
{
    DenseNet net = small_net();
    auto& l0 = net.layers()[0];
    auto& l1 = net.layers()[1];
    l0.weight.setZero();
    l0.weight(0, 0) = 1.0;  // h0 = elu(x0)
    l0.weight(1, 1) = -2.0; // h1 = elu(-2 x1 + 0.5)
    l0.bias(1) = 0.5;
    l1.weight.setZero();
    l1.weight(0, 0) = 1.0;
    l1.weight(1, 1) = 1.0;
    Matrix x(1, 3);
    x << -1.0, 1.0, 7.0;
    Matrix y = net.forward(x);
    const double h0 = std::expm1(-1.0);
    const double h1 = std::expm1(-1.5);
    CHECK(y(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-h0))).epsilon(1e-14));
    CHECK(y(0, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-h1))).epsilon(1e-14));
}

TEST_CASE("backward matches finite differences")
{
    for (int seed = 0; seed < 10; ++seed) {
        DenseNet net = small_net();
        Rng rng(100 + seed);
        net.xavier_uniform_init(rng);
        for (auto block : net.parameters())
            for (double& v : block)
                v += 0.3 * rng.normal();
        Matrix x = Matrix::NullaryExpr(4, 3, [&] { return rng.normal(); });
        Matrix target = Matrix::NullaryExpr(4, 2, [&] { return rng.uniform(); });
        auto loss = [&](const DenseNet& n) { return 0.5 * (n.forward(x) - target).squaredNorm(); };

        ForwardCache cache;
        Matrix y = net.forward(x, &cache);
        Gradients g = net.zero_gradients();
        Matrix dx = net.backward(cache, y - target, g);

        auto params = net.parameters();
        auto grads = gradient_blocks(g);
        const double h = 1e-6;
        for (std::size_t b = 0; b < params.size(); ++b)
            for (std::size_t i = 0; i < params[b].size(); ++i) {
                const double keep = params[b][i];
                params[b][i] = keep + h;
                const double up = loss(net);
                params[b][i] = keep - h;
                const double down = loss(net);
                params[b][i] = keep;
                const double fd = (up - down) / (2 * h);
                CHECK(std::abs(grads[b][i] - fd) <= 1e-6 * (std::abs(fd) + 1e-3));
            }
        // gradient with respect to the input as well
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                const double keep = x(r, c);
                x(r, c) = keep + h;
                const double up = loss(net);
                x(r, c) = keep - h;
                const double down = loss(net);
                x(r, c) = keep;
                CHECK(std::abs(dx(r, c) - (up - down) / (2 * h)) <= 1e-6);
            }
    }
}

TEST_CASE("dropout only in training mode and uses inverted scaling")
{
    DenseNet net = small_net(0.5);
    Rng init(4);
    net.xavier_uniform_init(init);
    Matrix x = Matrix::Ones(2000, 3);
    CHECK(net.forward(x) == net.forward(x));

    ForwardCache cache;
    Rng drop(5);
    net.forward(x, &cache, &drop);
    REQUIRE(cache.masks.size() == 2);
    const Matrix& mask = cache.masks[0];
    REQUIRE(mask.size() == 2000 * 4);
    double kept = 0.0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        const double m = mask.data()[i];
        CHECK((m == 0.0 || m == 2.0));
        kept += m > 0.0;
    }
    CHECK(std::abs(kept / static_cast<double>(mask.size()) - 0.5) < 0.02);
    CHECK(cache.masks[1].size() == 0);
}

TEST_CASE("adam with zero learning rate leaves parameters unchanged")
{
    DenseNet net = small_net();
    Rng rng(6);
    net.xavier_uniform_init(rng);
    const auto before = net.layers()[0].weight;
    Gradients g = net.zero_gradients();
    for (auto& w : g.weight)
        w.setOnes();
    Adam adam(0.0);
    auto p = net.parameters();
    auto gb = gradient_blocks(g);
    adam.step(p, gb);
    CHECK(net.layers()[0].weight == before);
}

TEST_CASE("adam first step moves each parameter by the learning rate")
{
    // with bias correction the first update is lr * g / (|g| + eps')
    std::vector<double> param{1.0, -1.0, 0.0};
    std::vector<double> grad{0.5, -2.0, 0.0};
    std::vector<std::span<double>> p{param};
    std::vector<std::span<double>> g{grad};
    Adam adam(0.1);
    adam.step(p, g);
    CHECK(param[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(param[1] == doctest::Approx(-0.9).epsilon(1e-6));
    CHECK(param[2] == 0.0);
}
