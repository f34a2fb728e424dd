#include <mcaurora/experiment.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;

namespace mcaurora {

std::uint64_t replicate_seed(const ExperimentConfig& cfg, std::size_t replicate)
{
    return cfg.seed + replicate;
}

RunMetadata run_metadata(const ExperimentConfig& cfg, std::size_t replicate)
{
    RunMetadata m;
    m.case_name = cfg.case_name;
    m.config_hash = config_hash(cfg);
    m.seed = replicate_seed(cfg, replicate);
    m.replicate = replicate;
    return m;
}

std::string replicate_dir_name(std::size_t replicate)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "replicate_%03zu", replicate);
    return buf;
}

namespace {
    std::ofstream open_out(const fs::path& p)
    {
        std::ofstream out(p, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write '" + p.string() + "'");
        return out;
    }

    void write_status(const fs::path& dir, const ReplicateResult& r)
    {
        auto out = open_out(dir / "status");
        out << (r.ok ? "ok" : "failed: " + r.error) << '\n';
    }
}

ReplicateResult run_replicate(const ExperimentConfig& cfg, std::size_t replicate, const fs::path& dir, std::ostream* log)
{
    ReplicateResult result;
    result.replicate = replicate;
    result.seed = replicate_seed(cfg, replicate);
    const RunMetadata meta = run_metadata(cfg, replicate);
    const bool files = !dir.empty();
    try {
        validate(cfg);
        std::ofstream metrics_out, batches_out;
        if (files) {
            fs::create_directories(dir);
            metrics_out = open_out(dir / "metrics.tsv");
            batches_out = open_out(dir / "batches.tsv");
            write_metric_header(metrics_out, meta);
            write_batch_header(batches_out, meta, cfg.containers.size());
        }

        auto task = make_task(cfg.task, cfg.task_params);
        Engine engine(cfg.engine_config(), task, result.seed);
        bool warned = false;
        SnapshotOptions opts{cfg.fd_correlation};
        auto record = [&](std::size_t iteration) {
            AbsCorrelation detail;
            auto s = snapshot(engine, iteration, &detail, opts);
            if (log && !warned && !detail.excluded_columns.empty()) {
                *log << "warning: " << cfg.case_name << " replicate " << replicate << ": "
                     << detail.excluded_columns.size()
                     << " zero-variance descriptor column(s) left out of fd_abs_corr\n";
                warned = true;
            }
            if (files) {
                write_metric_row(metrics_out, s);
                metrics_out.flush();
            }
            result.metrics.push_back(s);
        };

        engine.initialize();
        record(0);
        while (!engine.budget_exhausted()) {
            auto stats = engine.run_batch();
            auto retrain = engine.maybe_retrain();
            if (retrain) {
                ++result.retrains;
                if (retrain->diverged) {
                    ++result.diverged_retrains;
                    if (log)
                        *log << "warning: " << cfg.case_name << " replicate " << replicate
                             << ": retrain diverged, previous models kept (" << retrain->training.message << ")\n";
                }
            }
            if (files) {
                write_batch_row(batches_out, stats, engine.total_evaluations(), retrain ? &*retrain : nullptr,
                                engine.containers());
                batches_out.flush();
            }
            result.batches.push_back(stats);
            record(engine.batches_run());
        }

        if (files) {
            auto snap = open_out(dir / "containers.jsonl");
            write_container_snapshot(snap, meta, engine.containers());
            if (engine.ensemble()) {
                auto model = open_out(dir / "model.json");
                write_checkpoint(model, meta, *engine.ensemble(), engine.quantile_transforms());
            }
        }
        result.ok = true;
    }
    catch (const std::exception& e) {
        result.ok = false;
        result.error = e.what();
        if (log)
            *log << "error: " << cfg.case_name << " replicate " << replicate << ": " << e.what() << '\n';
    }
    if (files) {
        try {
            fs::create_directories(dir);
            write_status(dir, result);
        }
        catch (const std::exception& e) {
            if (log)
                *log << "error: " << e.what() << '\n';
        }
    }
    return result;
}

bool ExperimentResult::ok() const
{
    return std::all_of(replicates.begin(), replicates.end(), [](const ReplicateResult& r) { return r.ok; });
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const fs::path& dir, std::ostream* log)
{
    validate(cfg);
    ExperimentResult result;
    result.dir = dir;
    fs::create_directories(dir);
    {
        auto out = open_out(dir / "config.yaml");
        out << dump_config(cfg);
    }
    for (std::size_t k = 0; k < cfg.replicates; ++k) {
        if (log)
            *log << cfg.case_name << ": replicate " << k + 1 << "/" << cfg.replicates << " (seed "
                 << replicate_seed(cfg, k) << ")\n";
        result.replicates.push_back(run_replicate(cfg, k, dir / replicate_dir_name(k), log));
    }
    auto out = open_out(dir / "aggregate.tsv");
    aggregate_runs({dir}, out);
    return result;
}

namespace {
    double quantile_linear(const std::vector<double>& sorted, double p)
    {
        const double h = p * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        if (lo + 1 >= sorted.size())
            return sorted.back();
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
    }
}

std::vector<AggregateRow> aggregate_tables(const std::vector<MetricTable>& tables)
{
    std::vector<std::string> metrics;
    // iteration -> metric index -> values
    std::map<std::size_t, std::vector<std::vector<double>>> values;
    for (const auto& t : tables) {
        const auto it = std::find(t.columns.begin(), t.columns.end(), "iteration");
        if (it == t.columns.end())
            throw std::runtime_error("metric log has no iteration column");
        const auto iter_col = static_cast<std::size_t>(it - t.columns.begin());
        std::vector<std::string> cols;
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            if (c != iter_col)
                cols.push_back(t.columns[c]);
        if (metrics.empty())
            metrics = cols;
        else if (metrics != cols)
            throw std::runtime_error("metric logs have different columns");
        for (const auto& row : t.rows) {
            if (!row[iter_col])
                throw std::runtime_error("metric log row without iteration");
            auto& slot = values[static_cast<std::size_t>(*row[iter_col])];
            slot.resize(metrics.size());
            std::size_t m = 0;
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c == iter_col)
                    continue;
                if (row[c])
                    slot[m].push_back(*row[c]);
                ++m;
            }
        }
    }
    std::vector<AggregateRow> rows;
    for (auto& [iteration, per_metric] : values)
        for (std::size_t m = 0; m < per_metric.size(); ++m) {
            auto& v = per_metric[m];
            AggregateRow r;
            r.iteration = iteration;
            r.metric = metrics[m];
            r.n = v.size();
            if (v.empty()) {
                r.mean = r.std = r.min = r.q25 = r.q75 = r.max = std::nan("");
                rows.push_back(r);
                continue;
            }
            std::sort(v.begin(), v.end());
            double sum = 0.0;
            for (double x : v)
                sum += x;
            r.mean = sum / static_cast<double>(v.size());
            double ss = 0.0;
            for (double x : v)
                ss += (x - r.mean) * (x - r.mean);
            r.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
            r.min = v.front();
            r.max = v.back();
            r.q25 = quantile_linear(v, 0.25);
            r.q75 = quantile_linear(v, 0.75);
            rows.push_back(r);
        }
    return rows;
}

void write_aggregate(std::ostream& out, const std::vector<AggregateRow>& rows,
                     const std::vector<std::pair<std::string, std::string>>& metadata)
{
    for (const auto& [k, v] : metadata)
        out << "# " << k << ": " << v << '\n';
    out << "iteration\tmetric\tn\tmean\tstd\tmin\tq25\tq75\tmax\n";
    for (const auto& r : rows)
        out << r.iteration << '\t' << r.metric << '\t' << r.n << '\t' << format_double(r.mean) << '\t'
            << format_double(r.std) << '\t' << format_double(r.min) << '\t' << format_double(r.q25) << '\t'
            << format_double(r.q75) << '\t' << format_double(r.max) << '\n';
}

namespace {
    struct ReplicateLog {
        fs::path dir;
        bool ok = false;
    };

    std::vector<ReplicateLog> find_replicates(const fs::path& run_dir)
    {
        if (!fs::is_directory(run_dir))
            throw std::runtime_error("'" + run_dir.string() + "' is not a run directory");
        std::vector<ReplicateLog> out;
        for (const auto& entry : fs::directory_iterator(run_dir)) {
            if (!entry.is_directory() || !entry.path().filename().string().starts_with("replicate_"))
                continue;
            ReplicateLog r{entry.path(), false};
            std::ifstream status(entry.path() / "status");
            std::string line;
            r.ok = status && std::getline(status, line) && line == "ok";
            out.push_back(r);
        }
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.dir < b.dir; });
        return out;
    }

    std::string value_of(const MetricTable& t, const std::string& key)
    {
        for (const auto& [k, v] : t.metadata)
            if (k == key)
                return v;
        return "";
    }
}

void aggregate_runs(const std::vector<fs::path>& run_dirs, std::ostream& out)
{
    std::vector<MetricTable> tables;
    std::vector<std::string> used, failed, cases, hashes;
    for (const auto& run : run_dirs)
        for (const auto& r : find_replicates(run)) {
            const auto name = (run.filename().empty() ? run.parent_path().filename() : run.filename()).string() + "/" +
                              r.dir.filename().string();
            if (!r.ok || !fs::exists(r.dir / "metrics.tsv")) {
                failed.push_back(name);
                continue;
            }
            tables.push_back(read_metric_table(r.dir / "metrics.tsv"));
            used.push_back(name + "@" + value_of(tables.back(), "seed"));
            const auto c = value_of(tables.back(), "case");
            if (std::find(cases.begin(), cases.end(), c) == cases.end())
                cases.push_back(c);
            const auto h = value_of(tables.back(), "config_hash");
            if (std::find(hashes.begin(), hashes.end(), h) == hashes.end())
                hashes.push_back(h);
        }
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v)
            s += (s.empty() ? "" : ",") + x;
        return s.empty() ? "-" : s;
    };
    std::vector<std::pair<std::string, std::string>> meta{
        {"case", join(cases)},
        {"config_hash", join(hashes)},
        {"version", version_string},
        {"replicates", join(used)},
        {"failed_replicates", join(failed)},
    };
    write_aggregate(out, aggregate_tables(tables), meta);
}

std::vector<fs::path> emit_plot_data(const fs::path& run_dir)
{
    std::vector<std::string> missing;
    if (!fs::exists(run_dir / "config.yaml"))
        missing.push_back((run_dir / "config.yaml").string());
    std::vector<ReplicateLog> reps;
    if (fs::is_directory(run_dir))
        reps = find_replicates(run_dir);
    if (reps.empty())
        missing.push_back((run_dir / "replicate_NNN/metrics.tsv").string());
    for (const auto& r : reps)
        if (!fs::exists(r.dir / "metrics.tsv"))
            missing.push_back((r.dir / "metrics.tsv").string());
    if (!missing.empty()) {
        std::string msg = "missing run artifacts:";
        for (const auto& m : missing)
            msg += "\n  " + m;
        throw std::runtime_error(msg);
    }

    const auto cfg = load_config(run_dir / "config.yaml");
    const fs::path plot = run_dir / "plot";
    fs::create_directories(plot);
    std::vector<fs::path> written;

    {
        // partial logs of failed replicates still contribute their rows here
        std::vector<MetricTable> tables;
        for (const auto& r : reps)
            tables.push_back(read_metric_table(r.dir / "metrics.tsv"));
        auto out = open_out(plot / "curves.tsv");
        write_aggregate(out, aggregate_tables(tables),
                        {{"case", cfg.case_name}, {"config_hash", config_hash(cfg)}, {"version", version_string}});
        written.push_back(plot / "curves.tsv");
    }

    for (const auto& r : reps) {
        const auto snap_path = r.dir / "containers.jsonl";
        if (!fs::exists(snap_path))
            continue;
        std::ifstream in(snap_path);
        const auto records = read_container_snapshot(in);
        const std::string rep = r.dir.filename().string().substr(std::string("replicate_").size());
        for (std::size_t k = 0; k < cfg.containers.size(); ++k) {
            const auto& shape = cfg.containers[k].shape;
            const std::size_t rows = static_cast<std::size_t>(shape[0]);
            std::size_t cols = 1;
            for (std::size_t d = 1; d < shape.size(); ++d)
                cols *= static_cast<std::size_t>(shape[d]);
            std::vector<double> grid(rows * cols, std::nan(""));
            for (const auto& rec : records) {
                if (rec.container_id != static_cast<int>(k))
                    continue;
                std::size_t col = 0;
                for (std::size_t d = 1; d < rec.bin.size(); ++d)
                    col = col * static_cast<std::size_t>(shape[d]) + static_cast<std::size_t>(rec.bin[d]);
                grid[static_cast<std::size_t>(rec.bin[0]) * cols + col] = rec.fitness;
            }
            const auto path = plot / ("heatmap_r" + rep + "_c" + std::to_string(k) + ".tsv");
            auto out = open_out(path);
            write_metadata_lines(out, run_metadata(cfg, std::stoul(rep)));
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j)
                    out << (j ? "\t" : "") << format_double(grid[i * cols + j]);
                out << '\n';
            }
            written.push_back(path);
        }
    }
    return written;
}

} // namespace mcaurora
