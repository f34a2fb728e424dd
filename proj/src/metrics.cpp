#include <mcaurora/descriptors.hpp>
#include <mcaurora/engine.hpp>
#include <mcaurora/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace mcaurora {

namespace {
    double normalised_fitness(double f, Bounds b)
    {
        return std::clamp((f - b.lo) / b.width(), 0.0, 1.0);
    }

    void check_bounds(Bounds b)
    {
        if (!(b.hi > b.lo))
            throw StructuralError("fitness bounds must satisfy hi > lo");
    }
}

std::size_t total_capacity(std::span<const GridContainer> containers)
{
    std::size_t s = 0;
    for (const auto& c : containers)
        s += c.capacity();
    return s;
}

double coverage(std::span<const GridContainer> containers)
{
    const std::size_t cap = total_capacity(containers);
    if (cap == 0)
        return 0.0;
    std::size_t occupied = 0;
    for (const auto& c : containers)
        occupied += c.size();
    return 100.0 * static_cast<double>(occupied) / static_cast<double>(cap);
}

double qd_score(std::span<const GridContainer> containers, Bounds fitness_bounds)
{
    check_bounds(fitness_bounds);
    double s = 0.0;
    for (const auto& c : containers)
        c.for_each([&](std::size_t, const Solution& sol) { s += normalised_fitness(sol.fitness(), fitness_bounds); });
    return s;
}

UniqueVariants unique_variants(std::span<const GridContainer> containers, Bounds fitness_bounds)
{
    check_bounds(fitness_bounds);
    UniqueVariants u;
    std::unordered_set<std::uint64_t> seen;
    for (const auto& c : containers)
        c.for_each([&](std::size_t, const Solution& sol) {
            if (seen.insert(sol.id()).second)
                u.qd_score += normalised_fitness(sol.fitness(), fitness_bounds);
        });
    const std::size_t cap = total_capacity(containers);
    if (cap > 0)
        u.coverage_pct = 100.0 * static_cast<double>(seen.size()) / static_cast<double>(cap);
    return u;
}

double redundancy(std::span<const GridContainer> containers)
{
    const std::size_t cap = total_capacity(containers);
    if (cap == 0)
        return 0.0;
    std::unordered_set<std::uint64_t> seen;
    std::size_t entries = 0;
    for (const auto& c : containers)
        c.for_each([&](std::size_t, const Solution& sol) {
            ++entries;
            seen.insert(sol.id());
        });
    return static_cast<double>(entries - seen.size()) / static_cast<double>(cap);
}

std::optional<double> best_fitness(std::span<const GridContainer> containers)
{
    std::optional<double> best;
    for (const auto& c : containers)
        c.for_each([&](std::size_t, const Solution& sol) {
            if (!best || sol.fitness() > *best)
                best = sol.fitness();
        });
    return best;
}

AbsCorrelation mean_abs_correlation(const std::vector<std::vector<double>>& rows)
{
    AbsCorrelation out;
    if (rows.size() < 2)
        return out;
    const std::size_t n = rows.size();
    const std::size_t d = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != d)
            throw StructuralError("correlation table rows differ in length");

    std::vector<double> mean(d, 0.0);
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j)
            mean[j] += r[j];
    for (auto& m : mean)
        m /= static_cast<double>(n);

    std::vector<std::vector<double>> centred(d, std::vector<double>(n));
    std::vector<double> norm(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double v = rows[i][j] - mean[j];
            centred[j][i] = v;
            norm[j] += v * v;
        }

    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < d; ++j) {
        const double sd = std::sqrt(norm[j] / static_cast<double>(n));
        if (sd <= 1e-12 * std::max(1.0, std::abs(mean[j])))
            out.excluded_columns.push_back(j);
        else
            kept.push_back(j);
    }
    if (kept.size() < 2)
        return out;

    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < kept.size(); ++a)
        for (std::size_t b = a + 1; b < kept.size(); ++b) {
            const auto& x = centred[kept[a]];
            const auto& y = centred[kept[b]];
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                dot += x[i] * y[i];
            const double r = dot / std::sqrt(norm[kept[a]] * norm[kept[b]]);
            sum += std::min(1.0, std::abs(r));
            ++pairs;
        }
    // the correlation matrix is symmetric, so the mean over the upper
    // triangle equals the mean over all off-diagonal entries
    out.value = sum / static_cast<double>(pairs);
    return out;
}

AbsCorrelation fd_abs_correlation(std::span<const GridContainer> containers, std::span<const ObservationMatrix> observations)
{
    std::vector<std::vector<double>> rows(observations.size());
    if (observations.size() < 2)
        return {};
    for (const auto& c : containers) {
        if (!c.extractor())
            throw StructuralError("container has no descriptor extractor");
        const auto fds = c.extractor()->extract(observations);
        for (std::size_t i = 0; i < fds.size(); ++i)
            rows[i].insert(rows[i].end(), fds[i].begin(), fds[i].end());
    }
    return mean_abs_correlation(rows);
}

const char* to_string(KlHistogram h)
{
    return h == KlHistogram::Marginal ? "marginal" : "joint";
}

KlHistogram kl_histogram_from_string(const std::string& s)
{
    if (s == "marginal")
        return KlHistogram::Marginal;
    if (s == "joint")
        return KlHistogram::Joint;
    throw StructuralError("unknown KL histogram mode '" + s + "'");
}

std::vector<std::vector<double>> fd_histograms(std::span<const FeatureVector> fds, std::size_t bins, KlHistogram mode)
{
    if (bins == 0)
        throw StructuralError("histogram needs at least one bin");
    if (fds.empty())
        throw StructuralError("cannot histogram an empty descriptor set");
    const std::size_t d = fds.front().size();
    auto bin_of = [bins](double v) {
        const auto b = static_cast<long>(std::floor(std::clamp(v, 0.0, 1.0) * static_cast<double>(bins)));
        return static_cast<std::size_t>(std::min<long>(b, static_cast<long>(bins) - 1));
    };
    if (mode == KlHistogram::Marginal) {
        std::vector<std::vector<double>> h(d, std::vector<double>(bins, 0.0));
        for (const auto& fd : fds) {
            if (fd.size() != d)
                throw StructuralError("descriptor dimensionality differs within a set");
            for (std::size_t k = 0; k < d; ++k)
                h[k][bin_of(fd[k])] += 1.0;
        }
        return h;
    }
    std::size_t cells = 1;
    for (std::size_t k = 0; k < d; ++k)
        cells *= bins;
    std::vector<std::vector<double>> h(1, std::vector<double>(cells, 0.0));
    for (const auto& fd : fds) {
        if (fd.size() != d)
            throw StructuralError("descriptor dimensionality differs within a set");
        std::size_t flat = 0;
        for (std::size_t k = 0; k < d; ++k)
            flat = flat * bins + bin_of(fd[k]);
        h[0][flat] += 1.0;
    }
    return h;
}

double kl_divergence_counts(std::span<const double> p_counts, std::span<const double> q_counts, double eps)
{
    if (p_counts.size() != q_counts.size() || p_counts.empty())
        throw StructuralError("histograms must have the same non-zero length");
    const double k = static_cast<double>(p_counts.size());
    double p_total = 0.0, q_total = 0.0;
    for (double v : p_counts)
        p_total += v;
    for (double v : q_counts)
        q_total += v;
    double kl = 0.0;
    for (std::size_t i = 0; i < p_counts.size(); ++i) {
        const double p = (p_counts[i] + eps) / (p_total + eps * k);
        const double q = (q_counts[i] + eps) / (q_total + eps * k);
        kl += p * std::log(p / q);
    }
    return kl;
}

double kl_coverage(const std::vector<std::vector<FeatureVector>>& reference,
                   const std::vector<std::vector<FeatureVector>>& compared, std::size_t bins, KlHistogram mode, double eps)
{
    if (reference.size() != compared.size())
        throw StructuralError("reference and compared sets cover different containers");
    double total = 0.0;
    for (std::size_t c = 0; c < reference.size(); ++c) {
        const auto p = fd_histograms(reference[c], bins, mode);
        const auto q = fd_histograms(compared[c], bins, mode);
        if (p.size() != q.size())
            throw StructuralError("descriptor dimensionality differs between sets");
        for (std::size_t k = 0; k < p.size(); ++k)
            total += kl_divergence_counts(p[k], q[k], eps);
    }
    return total;
}

double kl_coverage(std::span<const ObservationMatrix> reference, std::span<const ObservationMatrix> compared,
                   std::span<const GridContainer> containers, std::size_t bins, KlHistogram mode, double eps)
{
    std::vector<std::vector<FeatureVector>> ref, cmp;
    for (const auto& c : containers) {
        if (!c.extractor())
            throw StructuralError("container has no descriptor extractor");
        ref.push_back(c.extractor()->extract(reference));
        cmp.push_back(c.extractor()->extract(compared));
    }
    return kl_coverage(ref, cmp, bins, mode, eps);
}

MetricSnapshot snapshot(const Engine& engine, std::size_t iteration, AbsCorrelation* fd_detail, SnapshotOptions options)
{
    const auto& containers = engine.containers();
    const Bounds fb = engine.task().definition().fitness_bounds;
    MetricSnapshot s;
    s.iteration = iteration;
    s.evaluations = engine.total_evaluations();
    s.qd_score = qd_score(containers, fb);
    s.coverage_pct = coverage(containers);
    const auto u = unique_variants(containers, fb);
    s.unique_qd_score = u.qd_score;
    s.unique_coverage_pct = u.coverage_pct;
    s.best_fitness = best_fitness(containers);
    s.redundancy = redundancy(containers);
    s.depot_size = engine.depot().size();
    if (options.fd_correlation) {
        std::vector<ObservationMatrix> rows;
        rows.reserve(engine.depot().size());
        for (const auto& sol : engine.depot().solutions())
            rows.push_back(sol.observations());
        auto corr = fd_abs_correlation(containers, rows);
        s.fd_abs_corr = corr.value;
        if (fd_detail)
            *fd_detail = std::move(corr);
    }
    return s;
}

} // namespace mcaurora
