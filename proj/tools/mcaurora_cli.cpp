// Command-line front end: run configs and presets, aggregate replicates,
// and export plot tables.
#include <mcaurora/experiment.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace mcaurora;

namespace {

fs::path output_root()
{
    if (const char* env = std::getenv("MCAURORA_OUTPUT_ROOT"); env && *env)
        return env;
    return "runs";
}

fs::path resolve_output(const ExperimentConfig& cfg, const std::string& out)
{
    if (!out.empty())
        return out;
    fs::path p = cfg.output_dir.empty() ? fs::path(cfg.case_name) : fs::path(cfg.output_dir);
    return p.is_absolute() ? p : output_root() / p;
}

int execute(const ExperimentConfig& cfg, const std::string& out)
{
    const auto dir = resolve_output(cfg, out);
    std::clog << "writing " << dir.string() << '\n';
    const auto result = run_experiment(cfg, dir, &std::clog);
    std::size_t failed = 0;
    for (const auto& r : result.replicates) {
        if (!r.ok) {
            ++failed;
            continue;
        }
        const auto& last = r.metrics.back();
        std::clog << "replicate " << r.replicate << ": coverage " << format_double(last.coverage_pct)
                  << "% qd_score " << format_double(last.qd_score) << " redundancy " << format_double(last.redundancy)
                  << '\n';
    }
    if (failed) {
        std::cerr << failed << " replicate(s) failed\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-container quality-diversity search with learned descriptors"};
    app.require_subcommand(1);

    std::string config_path, out;
    std::optional<int> threads;
    auto* run = app.add_subcommand("run", "Run an experiment described by a YAML config");
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--out", out, "Output directory (default: $MCAURORA_OUTPUT_ROOT or ./runs, then output_dir)");
    run->add_option("--threads", threads, "Evaluation threads");

    std::string preset_name;
    bool desk = false, print_only = false, list = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicates;
    auto* pre = app.add_subcommand("preset", "Run one of the named cases");
    pre->add_option("name", preset_name, "Case name");
    pre->add_flag("--desk", desk, "Scaled-down budgets and 10x10 grids");
    pre->add_option("--seed", seed, "Master seed");
    pre->add_option("--replicates", replicates, "Number of replicates");
    pre->add_option("--out", out, "Output directory");
    pre->add_option("--threads", threads, "Evaluation threads");
    pre->add_flag("--print", print_only, "Print the config instead of running it");
    pre->add_flag("--list", list, "List preset names");

    std::string run_dir;
    auto* plot = app.add_subcommand("plotdata", "Write plot-ready curves and heatmaps for a run");
    plot->add_option("run-dir", run_dir, "Run directory")->required();

    std::vector<std::string> run_dirs;
    std::string aggregate_out;
    auto* agg = app.add_subcommand("aggregate", "Aggregate metric logs over replicates of one or more runs");
    agg->add_option("run-dirs", run_dirs, "Run directories")->required();
    agg->add_option("--out", aggregate_out, "Output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ExperimentConfig cfg;
            try {
                cfg = load_config(config_path);
            }
            catch (const ConfigError& e) {
                std::cerr << config_path << ": " << e.what() << '\n';
                return 2;
            }
            if (threads)
                cfg.threads = *threads;
            return execute(cfg, out);
        }
        if (*pre) {
            if (list) {
                for (const auto& n : preset_names())
                    std::cout << n << '\n';
                return 0;
            }
            if (preset_name.empty()) {
                std::cerr << "preset: a case name is required (see --list)\n";
                return 2;
            }
            ExperimentConfig cfg;
            try {
                cfg = preset(preset_name, desk);
                if (seed)
                    cfg.seed = *seed;
                if (replicates)
                    cfg.replicates = *replicates;
                if (threads)
                    cfg.threads = *threads;
                validate(cfg);
            }
            catch (const ConfigError& e) {
                std::cerr << "preset " << preset_name << ": " << e.what() << '\n';
                return 2;
            }
            if (print_only) {
                std::cout << dump_config(cfg);
                return 0;
            }
            return execute(cfg, out);
        }
        if (*plot) {
            for (const auto& p : emit_plot_data(run_dir))
                std::cout << p.string() << '\n';
            return 0;
        }
        if (*agg) {
            std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
            if (aggregate_out.empty()) {
                aggregate_runs(dirs, std::cout);
            }
            else {
                std::ofstream f(aggregate_out, std::ios::binary);
                if (!f) {
                    std::cerr << "cannot write '" << aggregate_out << "'\n";
                    return 1;
                }
                aggregate_runs(dirs, f);
            }
            return 0;
        }
    }
    catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
