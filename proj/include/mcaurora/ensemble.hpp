#pragma once

#include <mcaurora/core.hpp>
#include <mcaurora/nn.hpp>

#include <span>
#include <string>
#include <vector>

namespace mcaurora {

using nn::Matrix;

enum class DiversityKind { None, Outputs, Cov, Cmd };

const char* to_string(DiversityKind kind);
DiversityKind diversity_kind_from_string(const std::string& s);

struct EnsembleTopology {
    int input_dim = 0;
    int latent_dim = 2;
    int modules = 1;
    std::vector<int> hidden{16, 5};
    double dropout = 0.2;

    bool operator==(const EnsembleTopology&) const = default;
};

/// Combined loss is recons + sign * lambda * diversity.
struct DiversityConfig {
    DiversityKind kind = DiversityKind::None;
    double lambda = 1.0;
    int sign = 1;

    bool operator==(const DiversityConfig&) const = default;
};

/// Per-channel min-max scaling of observation matrices, flattened
/// channel-major into one row per observation.
struct InputScaling {
    std::size_t channels = 0;
    std::size_t timepoints = 0;
    std::vector<double> lo;
    std::vector<double> hi;

    static InputScaling fit(std::span<const ObservationMatrix> corpus);
    static InputScaling identity(std::size_t channels, std::size_t timepoints);

    Matrix apply(std::span<const ObservationMatrix> observations) const;
    Matrix apply(const ObservationMatrix& observation) const;
    bool empty() const { return channels == 0; }
    bool operator==(const InputScaling&) const = default;
};

// Loss terms over per-module batch outputs. `ys[m]` and `zs[m]` hold one row
// per batch sample.

/// Mean over modules of the per-module mean squared reconstruction norm.
double loss_recons(std::span<const Matrix> ys, const Matrix& x);
/// Mean over samples and modules of the squared distance between each
/// module's output and the ensemble-mean output for the same input.
double loss_outputs(std::span<const Matrix> ys);
/// Sum of absolute off-diagonal sample covariances of the concatenated latents.
double loss_cov(std::span<const Matrix> zs);
/// Pearson correlation matrix of the columns of `z`; standard deviations are
/// floored at 1e-8.
Matrix correlation_matrix(const Matrix& z);
/// Correlation matrix distance 1 - tr(H1 H2) / (|H1|_F |H2|_F), clamped to [0, 1].
double d_corr(const Matrix& h1, const Matrix& h2);
/// Sum over ordered module pairs i != j of d_corr(R_i, R_j).
double loss_cmd(std::span<const Matrix> zs);

// Gradient accumulators: add `scale` times the loss gradient.
void add_loss_recons_grad(std::span<const Matrix> ys, const Matrix& x, double scale, std::span<Matrix> dys);
void add_loss_outputs_grad(std::span<const Matrix> ys, double scale, std::span<Matrix> dys);
void add_loss_cov_grad(std::span<const Matrix> zs, double scale, std::span<Matrix> dzs);
void add_loss_cmd_grad(std::span<const Matrix> zs, double scale, std::span<Matrix> dzs);

struct LossBreakdown {
    double recons = 0.0;
    double diversity = 0.0;
    double combined = 0.0;
};

struct AutoEncoderModule {
    nn::DenseNet encoder;
    nn::DenseNet decoder;
};

class ModularAutoEncoderEnsemble {
public:
    ModularAutoEncoderEnsemble() = default;
    /// Builds zero-initialised modules: encoder in -> hidden... (ELU) -> latent
    /// (sigmoid), decoder mirrored and ending in a sigmoid.
    ModularAutoEncoderEnsemble(EnsembleTopology topology, DiversityConfig diversity);

    void xavier_uniform_init(Rng& rng);

    const EnsembleTopology& topology() const { return _topology; }
    const DiversityConfig& diversity() const { return _diversity; }
    void set_diversity(DiversityConfig d) { _diversity = d; }
    std::size_t size() const { return _modules.size(); }
    std::size_t latent_dim() const { return static_cast<std::size_t>(_topology.latent_dim); }
    std::size_t input_dim() const { return static_cast<std::size_t>(_topology.input_dim); }

    AutoEncoderModule& module(std::size_t m) { return _modules.at(m); }
    const AutoEncoderModule& module(std::size_t m) const { return _modules.at(m); }

    const InputScaling& scaling() const { return _scaling; }
    void set_scaling(InputScaling s) { _scaling = std::move(s); }

    struct Pass {
        std::vector<Matrix> z;
        std::vector<Matrix> y;
        std::vector<nn::ForwardCache> encoder_cache;
        std::vector<nn::ForwardCache> decoder_cache;
    };

    /// Runs every module on the (already scaled) batch. Dropout is active
    /// only when `dropout_rng` is given.
    Pass forward(const Matrix& x, Rng* dropout_rng = nullptr, bool keep_cache = false) const;

    /// Inference-mode (latent, reconstruction) of one module for one sample.
    std::pair<nn::Vector, nn::Vector> forward_one(std::size_t m, std::span<const double> x) const;

    /// Inference-mode latent codes of module `m` for a scaled batch.
    Matrix encode(std::size_t m, const Matrix& x) const;

    LossBreakdown losses(const Matrix& x) const;
    double combined_loss(const Matrix& x) const { return losses(x).combined; }

    struct GradientResult {
        LossBreakdown loss;
        std::vector<nn::Gradients> encoder;
        std::vector<nn::Gradients> decoder;

        std::vector<std::span<double>> blocks();
    };

    /// Loss and its gradient w.r.t. every parameter on a scaled batch.
    GradientResult gradients(const Matrix& x, Rng* dropout_rng = nullptr) const;

    /// Parameter blocks in the same order as GradientResult::blocks().
    std::vector<std::span<double>> parameters();

private:
    LossBreakdown combine(double recons, double diversity) const;

    EnsembleTopology _topology;
    DiversityConfig _diversity;
    InputScaling _scaling;
    std::vector<AutoEncoderModule> _modules;
};

// Ensemble-level loss entry points on a scaled batch (inference mode).
double loss_recons(const ModularAutoEncoderEnsemble& ensemble, const Matrix& batch);
double loss_outputs(const ModularAutoEncoderEnsemble& ensemble, const Matrix& batch);
double loss_cov(const ModularAutoEncoderEnsemble& ensemble, const Matrix& batch);
double loss_cmd(const ModularAutoEncoderEnsemble& ensemble, const Matrix& batch);

struct TrainingConfig {
    int epochs = 200;
    double learning_rate = 0.01;
    int batch_size = 1024;
    double validation_split = 0.25;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const TrainingConfig&) const = default;
};

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    int epochs_completed = 0;
    bool diverged = false;
    std::string message;
};

/// Mini-batch Adam on the combined loss over already scaled inputs.
TrainReport train_ensemble(ModularAutoEncoderEnsemble& ensemble, const Matrix& inputs, const TrainingConfig& cfg, Rng& rng);

/// Fits the input scaling on `corpus`, stores it in the ensemble, then trains.
TrainReport train_ensemble(ModularAutoEncoderEnsemble& ensemble, std::span<const ObservationMatrix> corpus,
                           const TrainingConfig& cfg, Rng& rng);

} // namespace mcaurora
