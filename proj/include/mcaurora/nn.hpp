#pragma once

#include <mcaurora/rng.hpp>

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace mcaurora::nn {

/// Batches are row-major in the sense of one sample per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Elu, Sigmoid, Linear };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
    Matrix weight; // (out, in)
    Vector bias;   // (out)
    Activation activation = Activation::Linear;
    double dropout = 0.0; // applied to this layer's output at train time
};

struct ForwardCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre_activations;
    std::vector<Matrix> masks; // empty matrix when dropout was not applied
};

struct Gradients {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;

    void set_zero();
};

class DenseNet {
public:
    DenseNet() = default;
    /// `sizes` has one more entry than `activations` and `dropout`.
    DenseNet(std::span<const int> sizes, std::span<const Activation> activations, std::span<const double> dropout);

    std::size_t input_dim() const { return _layers.empty() ? 0 : static_cast<std::size_t>(_layers.front().weight.cols()); }
    std::size_t output_dim() const { return _layers.empty() ? 0 : static_cast<std::size_t>(_layers.back().weight.rows()); }
    const std::vector<DenseLayer>& layers() const { return _layers; }
    std::vector<DenseLayer>& layers() { return _layers; }

    /// Dropout is active only when `dropout_rng` is non-null (training mode).
    /// Without cache and dropout each output row is bit-identical to the
    /// result of forwarding that row alone.
    Matrix forward(const Matrix& x, ForwardCache* cache = nullptr, Rng* dropout_rng = nullptr) const;

    /// Accumulates parameter gradients into `grads`, returns d loss / d input.
    Matrix backward(const ForwardCache& cache, const Matrix& grad_out, Gradients& grads) const;

    Gradients zero_gradients() const;

    /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    void xavier_uniform_init(Rng& rng);

    /// One contiguous block per weight matrix and bias vector, in layer order.
    std::vector<std::span<double>> parameters();
    std::size_t parameter_count() const;

private:
    std::vector<DenseLayer> _layers;
};

std::vector<std::span<double>> gradient_blocks(Gradients& grads);

/// Adam over a fixed list of parameter blocks.
class Adam {
public:
    Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : _lr(learning_rate), _beta1(beta1), _beta2(beta2), _eps(epsilon) {}

    void step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads);
    long steps() const { return _t; }

private:
    double _lr, _beta1, _beta2, _eps;
    long _t = 0;
    std::vector<std::vector<double>> _m, _v;
};

} // namespace mcaurora::nn
