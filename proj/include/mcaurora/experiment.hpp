#pragma once

#include <mcaurora/config.hpp>
#include <mcaurora/io.hpp>
#include <mcaurora/metrics.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mcaurora {

/// Seed of replicate k: the configured seed plus k.
std::uint64_t replicate_seed(const ExperimentConfig& cfg, std::size_t replicate);

RunMetadata run_metadata(const ExperimentConfig& cfg, std::size_t replicate);

struct ReplicateResult {
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::vector<MetricSnapshot> metrics;
    std::vector<BatchStats> batches;
    std::size_t retrains = 0;
    std::size_t diverged_retrains = 0;
};

/// Runs one replicate to the end of its evaluation budget. When `dir` is
/// non-empty the metric log, batch log, final container snapshot and (for
/// learned descriptors) model checkpoint are written there. Failures are
/// reported in the result rather than thrown.
ReplicateResult run_replicate(const ExperimentConfig& cfg, std::size_t replicate, const std::filesystem::path& dir,
                              std::ostream* log = nullptr);

struct ExperimentResult {
    std::filesystem::path dir;
    std::vector<ReplicateResult> replicates;
    bool ok() const;
};

/// Writes config.yaml, one replicate_NNN directory per replicate and
/// aggregate.tsv under `dir`.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream* log = nullptr);

std::string replicate_dir_name(std::size_t replicate);

/// Per-iteration summary over replicates, one row per (iteration, metric):
/// n, mean, sample std, min, q25, q75, max.
struct AggregateRow {
    std::size_t iteration = 0;
    std::string metric;
    std::size_t n = 0;
    double mean = 0.0, std = 0.0, min = 0.0, q25 = 0.0, q75 = 0.0, max = 0.0;
};
std::vector<AggregateRow> aggregate_tables(const std::vector<MetricTable>& tables);
void write_aggregate(std::ostream& out, const std::vector<AggregateRow>& rows,
                     const std::vector<std::pair<std::string, std::string>>& metadata);

/// Collects the metric logs of every successful replicate under the given run
/// directories and writes their aggregate to `out`.
void aggregate_runs(const std::vector<std::filesystem::path>& run_dirs, std::ostream& out);

/// Writes `plot/curves.tsv` and one `plot/heatmap_rNNN_cK.tsv` per replicate
/// and container (rows = first descriptor dimension, "nan" = empty cell).
/// Returns the files written.
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& run_dir);

} // namespace mcaurora
