#pragma once

#include <mcaurora/core.hpp>

#include <span>
#include <vector>

namespace mcaurora {

/// Per-dimension empirical-CDF map onto [0, 1].
///
/// Landmarks are the sample quantiles at probabilities k / (n_quantiles - 1).
/// Application interpolates linearly between landmarks; repeated landmarks are
/// handled by averaging the interpolation from the left and from the right, so
/// a plateau maps to the middle of its probability range. Inputs outside the
/// landmark range clamp to 0 or 1, and a dimension whose landmarks are all
/// equal maps every input to 0.5.
class QuantileTransform {
public:
    QuantileTransform() = default;
    QuantileTransform(std::vector<std::vector<double>> landmarks);

    /// `samples[i]` is one latent vector. `n_quantiles` is lowered to the
    /// sample count when there are fewer samples.
    static QuantileTransform fit(std::span<const std::vector<double>> samples, std::size_t n_quantiles = 1000);

    std::size_t dimensions() const { return _landmarks.size(); }
    std::size_t n_quantiles() const { return _landmarks.empty() ? 0 : _landmarks.front().size(); }
    const std::vector<std::vector<double>>& landmarks() const { return _landmarks; }

    double apply(std::size_t dim, double value) const;
    FeatureVector apply(std::span<const double> z) const;

    bool operator==(const QuantileTransform&) const = default;

private:
    std::vector<std::vector<double>> _landmarks;
};

} // namespace mcaurora
