#pragma once

#include <mcaurora/core.hpp>
#include <mcaurora/ensemble.hpp>
#include <mcaurora/quantile.hpp>

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mcaurora {

struct TaskDefinition;

enum class Reduction { MeanOverTime, FinalValue, MeanAbsolute, FractionAbove };

const char* to_string(Reduction r);
Reduction reduction_from_string(const std::string& s);

struct ChannelReduction {
    std::size_t channel = 0;
    Reduction reduction = Reduction::MeanOverTime;
    Bounds bounds;
    // only used by FractionAbove
    double threshold = 0.5;

    bool operator==(const ChannelReduction&) const = default;
};

/// One reduction per descriptor dimension; each is min-max normalised with
/// its static bounds and clamped into [0, 1].
struct HardcodedSpec {
    std::string name;
    std::vector<ChannelReduction> reductions;

    bool operator==(const HardcodedSpec&) const = default;
};

/// Encoder `module` of a shared ensemble, optionally followed by a quantile
/// transform.
struct LearnedDescriptor {
    std::shared_ptr<const ModularAutoEncoderEnsemble> ensemble;
    std::size_t module = 0;
    std::optional<QuantileTransform> quantiles;
};

class DescriptorExtractor {
public:
    explicit DescriptorExtractor(HardcodedSpec spec);
    explicit DescriptorExtractor(LearnedDescriptor learned);

    std::size_t out_dim() const;
    bool learned() const { return std::holds_alternative<LearnedDescriptor>(_kind); }
    const HardcodedSpec* hardcoded_spec() const { return std::get_if<HardcodedSpec>(&_kind); }
    const LearnedDescriptor* learned_descriptor() const { return std::get_if<LearnedDescriptor>(&_kind); }

    FeatureVector extract(const ObservationMatrix& observations) const;
    /// Batched extraction, one descriptor per observation.
    std::vector<FeatureVector> extract(std::span<const ObservationMatrix> observations) const;

    /// Raw encoder outputs (before any quantile transform) for a batch.
    std::vector<std::vector<double>> latents(std::span<const ObservationMatrix> observations) const;

private:
    std::variant<HardcodedSpec, LearnedDescriptor> _kind;
};

double reduce(std::span<const double> series, const ChannelReduction& r);

/// The four 2-D hand-designed descriptor pairs: distance vs hull angle,
/// torque vs jump, then hip vs knee angle for each leg.
std::vector<HardcodedSpec> fd_pairs_default(const TaskDefinition& task);

} // namespace mcaurora
