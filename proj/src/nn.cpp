#include <mcaurora/core.hpp>
#include <mcaurora/nn.hpp>

#include <cmath>

namespace mcaurora::nn {

const char* to_string(Activation a)
{
    switch (a) {
    case Activation::Elu:
        return "elu";
    case Activation::Sigmoid:
        return "sigmoid";
    case Activation::Linear:
        return "linear";
    }
    return "?";
}

Activation activation_from_string(const std::string& s)
{
    if (s == "elu")
        return Activation::Elu;
    if (s == "sigmoid")
        return Activation::Sigmoid;
    if (s == "linear")
        return Activation::Linear;
    throw StructuralError("unknown activation '" + s + "'");
}

namespace {

    void apply_activation(Activation a, Matrix& m)
    {
        switch (a) {
        case Activation::Elu:
            m = m.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
            break;
        case Activation::Sigmoid:
            m = m.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
            break;
        case Activation::Linear:
            break;
        }
    }

    // derivative of the activation evaluated at the pre-activation values
    Matrix activation_derivative(Activation a, const Matrix& pre)
    {
        switch (a) {
        case Activation::Elu:
            return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
        case Activation::Sigmoid:
            return pre.unaryExpr([](double v) {
                const double s = 1.0 / (1.0 + std::exp(-v));
                return s * (1.0 - s);
            });
        case Activation::Linear:
            return Matrix::Ones(pre.rows(), pre.cols());
        }
        return {};
    }

} // namespace

void Gradients::set_zero()
{
    for (auto& w : weight)
        w.setZero();
    for (auto& b : bias)
        b.setZero();
}

DenseNet::DenseNet(std::span<const int> sizes, std::span<const Activation> activations, std::span<const double> dropout)
{
    if (sizes.size() < 2 || activations.size() != sizes.size() - 1 || dropout.size() != activations.size())
        throw StructuralError("dense net needs n+1 sizes for n activations and dropout rates");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        if (dropout[l] < 0.0 || dropout[l] >= 1.0)
            throw StructuralError("dropout rate must lie in [0, 1)");
        DenseLayer layer;
        layer.weight = Matrix::Zero(sizes[l + 1], sizes[l]);
        layer.bias = Vector::Zero(sizes[l + 1]);
        layer.activation = activations[l];
        layer.dropout = dropout[l];
        _layers.push_back(std::move(layer));
    }
}

namespace {
    // x * w^T with one fixed summation order per output entry. The blocked
    // product picks its kernel from the batch shape, which changes the last
    // bits of a row's result depending on what else is in the batch.
    Matrix rowwise_product(const Matrix& x, const Matrix& w)
    {
        Matrix out(x.rows(), w.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < w.rows(); ++j) {
                double s = 0.0;
                for (Eigen::Index k = 0; k < x.cols(); ++k)
                    s += x(i, k) * w(j, k);
                out(i, j) = s;
            }
        return out;
    }
}

Matrix DenseNet::forward(const Matrix& x, ForwardCache* cache, Rng* dropout_rng) const
{
    if (static_cast<std::size_t>(x.cols()) != input_dim())
        throw StructuralError("dense net input has " + std::to_string(x.cols()) + " columns, expected " + std::to_string(input_dim()));
    if (cache) {
        cache->inputs.clear();
        cache->pre_activations.clear();
        cache->masks.clear();
    }
    // inference results must not depend on the batch a sample arrives in
    const bool inference = !cache && !dropout_rng;
    Matrix h = x;
    for (const auto& layer : _layers) {
        Matrix pre = inference ? rowwise_product(h, layer.weight) : Matrix(h * layer.weight.transpose());
        pre.rowwise() += layer.bias.transpose();
        Matrix out = pre;
        apply_activation(layer.activation, out);
        Matrix mask;
        if (dropout_rng && layer.dropout > 0.0) {
            const double keep = 1.0 - layer.dropout;
            mask.resize(out.rows(), out.cols());
            for (Eigen::Index j = 0; j < mask.cols(); ++j)
                for (Eigen::Index i = 0; i < mask.rows(); ++i)
                    mask(i, j) = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
            out = out.cwiseProduct(mask);
        }
        if (cache) {
            cache->inputs.push_back(std::move(h));
            cache->pre_activations.push_back(std::move(pre));
            cache->masks.push_back(std::move(mask));
        }
        h = std::move(out);
    }
    return h;
}

Matrix DenseNet::backward(const ForwardCache& cache, const Matrix& grad_out, Gradients& grads) const
{
    Matrix g = grad_out;
    for (std::size_t l = _layers.size(); l-- > 0;) {
        const auto& layer = _layers[l];
        if (cache.masks[l].size() > 0)
            g = g.cwiseProduct(cache.masks[l]);
        g = g.cwiseProduct(activation_derivative(layer.activation, cache.pre_activations[l]));
        grads.weight[l].noalias() += g.transpose() * cache.inputs[l];
        grads.bias[l].noalias() += g.colwise().sum().transpose();
        g = g * layer.weight;
    }
    return g;
}

Gradients DenseNet::zero_gradients() const
{
    Gradients g;
    for (const auto& layer : _layers) {
        g.weight.push_back(Matrix::Zero(layer.weight.rows(), layer.weight.cols()));
        g.bias.push_back(Vector::Zero(layer.bias.size()));
    }
    return g;
}

void DenseNet::xavier_uniform_init(Rng& rng)
{
    for (auto& layer : _layers) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
            for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
                layer.weight(i, j) = rng.uniform(-limit, limit);
        layer.bias.setZero();
    }
}

std::vector<std::span<double>> DenseNet::parameters()
{
    std::vector<std::span<double>> out;
    for (auto& layer : _layers) {
        out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
        out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    }
    return out;
}

std::size_t DenseNet::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& layer : _layers)
        n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    return n;
}

std::vector<std::span<double>> gradient_blocks(Gradients& grads)
{
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < grads.weight.size(); ++l) {
        out.emplace_back(grads.weight[l].data(), static_cast<std::size_t>(grads.weight[l].size()));
        out.emplace_back(grads.bias[l].data(), static_cast<std::size_t>(grads.bias[l].size()));
    }
    return out;
}

void Adam::step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads)
{
    if (params.size() != grads.size())
        throw StructuralError("adam: parameter and gradient block counts differ");
    if (_m.empty()) {
        for (const auto& p : params) {
            _m.emplace_back(p.size(), 0.0);
            _v.emplace_back(p.size(), 0.0);
        }
    }
    if (_m.size() != params.size())
        throw StructuralError("adam: parameter layout changed between steps");
    ++_t;
    const double c1 = 1.0 - std::pow(_beta1, static_cast<double>(_t));
    const double c2 = 1.0 - std::pow(_beta2, static_cast<double>(_t));
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b];
        auto g = grads[b];
        auto& m = _m[b];
        auto& v = _v[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = _beta1 * m[i] + (1.0 - _beta1) * g[i];
            v[i] = _beta2 * v[i] + (1.0 - _beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= _lr * m_hat / (std::sqrt(v_hat) + _eps);
        }
    }
}

} // namespace mcaurora::nn
