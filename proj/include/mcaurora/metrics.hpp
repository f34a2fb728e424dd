#pragma once

#include <mcaurora/core.hpp>

#include <optional>
#include <span>
#include <vector>

namespace mcaurora {

class Engine;

struct MetricSnapshot {
    std::size_t iteration = 0;
    std::size_t evaluations = 0;
    double qd_score = 0.0;
    double unique_qd_score = 0.0;
    double coverage_pct = 0.0;
    double unique_coverage_pct = 0.0;
    std::optional<double> best_fitness;
    std::optional<double> fd_abs_corr;
    double redundancy = 0.0;
    std::size_t depot_size = 0;
};

std::size_t total_capacity(std::span<const GridContainer> containers);

double coverage(std::span<const GridContainer> containers);

/// Sum of clamped normalised fitness, one term per stored entry.
double qd_score(std::span<const GridContainer> containers, Bounds fitness_bounds);

struct UniqueVariants {
    double qd_score = 0.0;
    double coverage_pct = 0.0;
};

/// QD-score and coverage counting each distinct solution id once; the
/// coverage denominator is still the total capacity.
UniqueVariants unique_variants(std::span<const GridContainer> containers, Bounds fitness_bounds);

/// (stored entries - distinct ids) / total capacity.
double redundancy(std::span<const GridContainer> containers);

std::optional<double> best_fitness(std::span<const GridContainer> containers);

struct AbsCorrelation {
    std::optional<double> value;
    std::vector<std::size_t> excluded_columns; // zero variance
};

/// Mean |r| over the off-diagonal Pearson correlations between the columns
/// of a row-major table. Zero-variance columns are left out.
AbsCorrelation mean_abs_correlation(const std::vector<std::vector<double>>& rows);

/// Rows are `observations`; columns are the descriptors of every container's
/// current extractor, concatenated in container order.
AbsCorrelation fd_abs_correlation(std::span<const GridContainer> containers, std::span<const ObservationMatrix> observations);

enum class KlHistogram { Marginal, Joint };

const char* to_string(KlHistogram h);
KlHistogram kl_histogram_from_string(const std::string& s);

/// Histogram counts of descriptors in [0, 1]^d. Marginal mode concatenates one
/// `bins`-bin histogram per dimension; joint mode uses bins^d cells.
std::vector<std::vector<double>> fd_histograms(std::span<const FeatureVector> fds, std::size_t bins, KlHistogram mode);

/// KL(P || Q) after adding `eps` to every count and normalising.
double kl_divergence_counts(std::span<const double> p_counts, std::span<const double> q_counts, double eps = 1e-9);

/// Sum over containers (and, in marginal mode, over dimensions) of the KL
/// divergence from the reference descriptor distribution to the compared one.
/// `reference[c]` and `compared[c]` hold descriptors for container c.
double kl_coverage(const std::vector<std::vector<FeatureVector>>& reference,
                   const std::vector<std::vector<FeatureVector>>& compared, std::size_t bins = 10,
                   KlHistogram mode = KlHistogram::Marginal, double eps = 1e-9);

/// Same, extracting descriptors from observations with each container's extractor.
double kl_coverage(std::span<const ObservationMatrix> reference, std::span<const ObservationMatrix> compared,
                   std::span<const GridContainer> containers, std::size_t bins = 10,
                   KlHistogram mode = KlHistogram::Marginal, double eps = 1e-9);

struct SnapshotOptions {
    bool fd_correlation = true;
};

MetricSnapshot snapshot(const Engine& engine, std::size_t iteration, AbsCorrelation* fd_detail = nullptr,
                        SnapshotOptions options = {});

} // namespace mcaurora
