#pragma once

#include <mcaurora/engine.hpp>
#include <mcaurora/metrics.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mcaurora {

inline constexpr const char* version_string = "0.1.0";

/// Written at the top of every output file.
struct RunMetadata {
    std::string case_name;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::size_t replicate = 0;
    std::string version = version_string;
};

/// Shortest decimal text that parses back to the same double; "nan"/"inf"
/// for non-finite values.
std::string format_double(double v);

// Metric log: "# key: value" metadata lines, a header row, then one
// tab-separated row per snapshot. Missing values are written as "NA".
const std::vector<std::string>& metric_columns();
void write_metadata_lines(std::ostream& out, const RunMetadata& meta);
void write_metric_header(std::ostream& out, const RunMetadata& meta);
void write_metric_row(std::ostream& out, const MetricSnapshot& s);

struct MetricTable {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::string> columns;
    std::vector<std::vector<std::optional<double>>> rows;
};
MetricTable read_metric_table(const std::filesystem::path& path);

// Batch log: one row per batch with per-container occupancy columns.
void write_batch_header(std::ostream& out, const RunMetadata& meta, std::size_t n_containers);
void write_batch_row(std::ostream& out, const BatchStats& stats, std::size_t evaluations, const RetrainReport* retrain,
                     const std::vector<GridContainer>& containers);

// Container snapshot: first line {"meta": {...}}, then one JSON object per
// occupied cell with fields container_id, bin, solution_id, fitness, fd,
// genome in that order, ordered by container then cell.
struct SnapshotRecord {
    int container_id = 0;
    BinIndex bin;
    std::uint64_t solution_id = 0;
    double fitness = 0.0;
    FeatureVector fd;
    Genome genome;

    bool operator==(const SnapshotRecord&) const = default;
};
void write_container_snapshot(std::ostream& out, const RunMetadata& meta, const std::vector<GridContainer>& containers);
std::vector<SnapshotRecord> read_container_snapshot(std::istream& in);

/// Ensemble weights, input scaling and quantile landmarks as JSON.
struct Checkpoint {
    ModularAutoEncoderEnsemble ensemble;
    std::vector<std::optional<QuantileTransform>> quantiles;
};
void write_checkpoint(std::ostream& out, const RunMetadata& meta, const ModularAutoEncoderEnsemble& ensemble,
                      const std::vector<std::optional<QuantileTransform>>& quantiles);
Checkpoint read_checkpoint(std::istream& in);

} // namespace mcaurora
