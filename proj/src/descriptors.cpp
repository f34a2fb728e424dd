#include <mcaurora/descriptors.hpp>
#include <mcaurora/tasks.hpp>

#include <algorithm>
#include <cmath>

namespace mcaurora {

const char* to_string(Reduction r)
{
    switch (r) {
    case Reduction::MeanOverTime:
        return "mean";
    case Reduction::FinalValue:
        return "final";
    case Reduction::MeanAbsolute:
        return "mean_abs";
    case Reduction::FractionAbove:
        return "fraction_above";
    }
    return "?";
}

Reduction reduction_from_string(const std::string& s)
{
    if (s == "mean")
        return Reduction::MeanOverTime;
    if (s == "final")
        return Reduction::FinalValue;
    if (s == "mean_abs")
        return Reduction::MeanAbsolute;
    if (s == "fraction_above")
        return Reduction::FractionAbove;
    throw StructuralError("unknown reduction '" + s + "'");
}

double reduce(std::span<const double> series, const ChannelReduction& r)
{
    if (series.empty())
        throw StructuralError("cannot reduce an empty series");
    double raw = 0.0;
    switch (r.reduction) {
    case Reduction::MeanOverTime:
        for (double v : series)
            raw += v;
        raw /= static_cast<double>(series.size());
        break;
    case Reduction::FinalValue:
        raw = series.back();
        break;
    case Reduction::MeanAbsolute:
        for (double v : series)
            raw += std::abs(v);
        raw /= static_cast<double>(series.size());
        break;
    case Reduction::FractionAbove:
        for (double v : series)
            raw += v > r.threshold ? 1.0 : 0.0;
        raw /= static_cast<double>(series.size());
        break;
    }
    if (!std::isfinite(raw))
        throw InvalidEvaluationError("non-finite descriptor reduction");
    return std::clamp((raw - r.bounds.lo) / r.bounds.width(), 0.0, 1.0);
}

DescriptorExtractor::DescriptorExtractor(HardcodedSpec spec) : _kind(std::move(spec))
{
    const auto& s = std::get<HardcodedSpec>(_kind);
    if (s.reductions.empty())
        throw StructuralError("hardcoded descriptor needs at least one reduction");
    for (const auto& r : s.reductions)
        if (!(r.bounds.hi > r.bounds.lo))
            throw StructuralError("hardcoded descriptor bounds must be non-degenerate");
}

DescriptorExtractor::DescriptorExtractor(LearnedDescriptor learned) : _kind(std::move(learned))
{
    const auto& l = std::get<LearnedDescriptor>(_kind);
    if (!l.ensemble || l.module >= l.ensemble->size())
        throw StructuralError("learned descriptor refers to a missing ensemble module");
    if (l.quantiles && l.quantiles->dimensions() != l.ensemble->latent_dim())
        throw StructuralError("quantile transform dimensionality differs from the latent dimensionality");
}

std::size_t DescriptorExtractor::out_dim() const
{
    if (auto h = hardcoded_spec())
        return h->reductions.size();
    return learned_descriptor()->ensemble->latent_dim();
}

FeatureVector DescriptorExtractor::extract(const ObservationMatrix& observations) const
{
    return extract(std::span<const ObservationMatrix>(&observations, 1)).front();
}

std::vector<std::vector<double>> DescriptorExtractor::latents(std::span<const ObservationMatrix> observations) const
{
    const auto* l = learned_descriptor();
    if (!l)
        throw StructuralError("hardcoded descriptors have no latent codes");
    std::vector<std::vector<double>> out(observations.size());
    if (observations.empty())
        return out;
    const Matrix z = l->ensemble->encode(l->module, l->ensemble->scaling().apply(observations));
    for (std::size_t i = 0; i < observations.size(); ++i) {
        out[i].resize(static_cast<std::size_t>(z.cols()));
        for (Eigen::Index k = 0; k < z.cols(); ++k)
            out[i][static_cast<std::size_t>(k)] = z(static_cast<Eigen::Index>(i), k);
    }
    return out;
}

std::vector<FeatureVector> DescriptorExtractor::extract(std::span<const ObservationMatrix> observations) const
{
    if (const auto* h = hardcoded_spec()) {
        std::vector<FeatureVector> out;
        out.reserve(observations.size());
        for (const auto& obs : observations) {
            FeatureVector fd;
            fd.reserve(h->reductions.size());
            for (const auto& r : h->reductions) {
                if (r.channel >= obs.channels())
                    throw StructuralError("hardcoded descriptor channel out of range");
                fd.push_back(reduce(obs.channel(r.channel), r));
            }
            out.push_back(std::move(fd));
        }
        return out;
    }
    auto codes = latents(observations);
    const auto* l = learned_descriptor();
    if (l->quantiles)
        for (auto& z : codes)
            z = l->quantiles->apply(z);
    return codes;
}

std::vector<HardcodedSpec> fd_pairs_default(const TaskDefinition& task)
{
    auto channel = [&](const std::string& name, Reduction r) {
        auto idx = task.channel_index(name);
        if (!idx)
            throw StructuralError("task '" + task.name + "' has no '" + name + "' channel");
        return ChannelReduction{*idx, r, task.channels[*idx].bounds, 0.5};
    };
    return {
        {"distance_vs_hull_angle", {channel("displacement", Reduction::FinalValue), channel("hull_angle", Reduction::MeanOverTime)}},
        // the airborne channel is a per-step indicator, so its mean is the
        // fraction of time with both feet off the ground
        {"torque_vs_jump", {channel("effort", Reduction::MeanOverTime), channel("airborne", Reduction::MeanOverTime)}},
        {"leg0_hip_vs_knee", {channel("hip_angle_0", Reduction::MeanOverTime), channel("knee_angle_0", Reduction::MeanOverTime)}},
        {"leg1_hip_vs_knee", {channel("hip_angle_1", Reduction::MeanOverTime), channel("knee_angle_1", Reduction::MeanOverTime)}},
    };
}

} // namespace mcaurora
