#include <mcaurora/quantile.hpp>

#include <algorithm>
#include <cmath>

namespace mcaurora {


QuantileTransform::QuantileTransform(std::vector<std::vector<double>> landmarks) : _landmarks(std::move(landmarks))
{
    for (const auto& l : _landmarks) {
        if (l.size() < 2 || l.size() != _landmarks.front().size())
            throw StructuralError("quantile transform needs at least 2 landmarks per dimension, equal across dimensions");
        if (!std::is_sorted(l.begin(), l.end()))
            throw StructuralError("quantile landmarks must be sorted");
    }
}

QuantileTransform QuantileTransform::fit(std::span<const std::vector<double>> samples, std::size_t n_quantiles)
{
    if (samples.size() < 2)
        throw StructuralError("quantile transform needs at least 2 samples");
    const std::size_t dims = samples.front().size();
    const std::size_t nq = std::max<std::size_t>(2, std::min(n_quantiles, samples.size()));
    std::vector<std::vector<double>> landmarks(dims, std::vector<double>(nq));
    std::vector<double> col(samples.size());
    for (std::size_t d = 0; d < dims; ++d) {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i].size() != dims)
                throw StructuralError("latent samples differ in dimensionality");
            if (!std::isfinite(samples[i][d]))
                throw InvalidEvaluationError("non-finite latent sample");
            col[i] = samples[i][d];
        }
        std::sort(col.begin(), col.end());
        const double last = static_cast<double>(col.size() - 1);
        for (std::size_t k = 0; k < nq; ++k) {
            const double pos = static_cast<double>(k) / static_cast<double>(nq - 1) * last;
            const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
            const std::size_t hi = std::min(lo + 1, col.size() - 1);
            const double frac = pos - static_cast<double>(lo);
            landmarks[d][k] = frac == 0.0 ? col[lo] : col[lo] + (col[hi] - col[lo]) * frac;
        }
        // round-off in the interpolation must not break monotonicity
        for (std::size_t k = 1; k < nq; ++k)
            landmarks[d][k] = std::max(landmarks[d][k], landmarks[d][k - 1]);
    }
    return QuantileTransform(std::move(landmarks));
}

double QuantileTransform::apply(std::size_t dim, double value) const
{
    const auto& xs = _landmarks.at(dim);
    if (xs.front() == xs.back())
        return 0.5;
    if (value <= xs.front())
        return 0.0;
    if (value >= xs.back())
        return 1.0;
    const double step = 1.0 / static_cast<double>(xs.size() - 1);
    auto segment = [&](std::size_t j) {
        return (static_cast<double>(j) + (value - xs[j]) / (xs[j + 1] - xs[j])) * step;
    };
    // interpolating from the right end of a plateau and from its left end,
    // then averaging, maps repeated landmarks to the middle of their range
    const auto upper = std::upper_bound(xs.begin(), xs.end(), value);
    const double from_right = segment(static_cast<std::size_t>(upper - xs.begin()) - 1);
    const auto lower = std::lower_bound(xs.begin(), xs.end(), value);
    const std::size_t k = static_cast<std::size_t>(lower - xs.begin());
    const double from_left = *lower == value ? static_cast<double>(k) * step : segment(k - 1);
    return std::clamp(0.5 * (from_right + from_left), 0.0, 1.0);
}

FeatureVector QuantileTransform::apply(std::span<const double> z) const
{
    if (z.size() != _landmarks.size())
        throw StructuralError("latent vector dimensionality does not match the quantile transform");
    FeatureVector out(z.size());
    for (std::size_t d = 0; d < z.size(); ++d)
        out[d] = apply(d, z[d]);
    return out;
}

} // namespace mcaurora
