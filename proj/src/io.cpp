#include <mcaurora/io.hpp>

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mcaurora {

using json = nlohmann::ordered_json;

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {
    std::string opt(const std::optional<double>& v)
    {
        return v ? format_double(*v) : "NA";
    }

    json meta_json(const RunMetadata& m)
    {
        json j;
        j["case"] = m.case_name;
        j["config_hash"] = m.config_hash;
        j["seed"] = m.seed;
        j["replicate"] = m.replicate;
        j["version"] = m.version;
        return j;
    }

    std::vector<std::string> split_tabs(const std::string& line)
    {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            out.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos)
                break;
            start = tab + 1;
        }
        return out;
    }
}

const std::vector<std::string>& metric_columns()
{
    static const std::vector<std::string> cols{
        "iteration",   "evaluations", "qd_score",   "unique_qd_score", "coverage_pct",
        "unique_coverage_pct", "best_fitness", "fd_abs_corr", "redundancy", "depot_size",
    };
    return cols;
}

void write_metadata_lines(std::ostream& out, const RunMetadata& meta)
{
    out << "# case: " << meta.case_name << '\n';
    out << "# config_hash: " << meta.config_hash << '\n';
    out << "# seed: " << meta.seed << '\n';
    out << "# replicate: " << meta.replicate << '\n';
    out << "# version: " << meta.version << '\n';
}

void write_metric_header(std::ostream& out, const RunMetadata& meta)
{
    write_metadata_lines(out, meta);
    const auto& cols = metric_columns();
    for (std::size_t i = 0; i < cols.size(); ++i)
        out << (i ? "\t" : "") << cols[i];
    out << '\n';
}

void write_metric_row(std::ostream& out, const MetricSnapshot& s)
{
    out << s.iteration << '\t' << s.evaluations << '\t' << format_double(s.qd_score) << '\t'
        << format_double(s.unique_qd_score) << '\t' << format_double(s.coverage_pct) << '\t'
        << format_double(s.unique_coverage_pct) << '\t' << opt(s.best_fitness) << '\t' << opt(s.fd_abs_corr) << '\t'
        << format_double(s.redundancy) << '\t' << s.depot_size << '\n';
}

MetricTable read_metric_table(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read '" + path.string() + "'");
    MetricTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (line.starts_with("# ")) {
            const auto colon = line.find(": ");
            if (colon != std::string::npos)
                t.metadata.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
            continue;
        }
        auto fields = split_tabs(line);
        if (t.columns.empty()) {
            t.columns = std::move(fields);
            continue;
        }
        if (fields.size() != t.columns.size())
            throw std::runtime_error("'" + path.string() + "': row has " + std::to_string(fields.size()) +
                                     " fields, header has " + std::to_string(t.columns.size()));
        std::vector<std::optional<double>> row;
        for (const auto& f : fields) {
            if (f == "NA") {
                row.emplace_back();
                continue;
            }
            try {
                std::size_t used = 0;
                const double v = std::stod(f, &used);
                if (used != f.size())
                    throw std::invalid_argument(f);
                row.emplace_back(v);
            }
            catch (const std::exception&) {
                throw std::runtime_error("'" + path.string() + "': non-numeric field '" + f + "'");
            }
        }
        t.rows.push_back(std::move(row));
    }
    if (t.columns.empty())
        throw std::runtime_error("'" + path.string() + "' has no header row");
    return t;
}

void write_batch_header(std::ostream& out, const RunMetadata& meta, std::size_t n_containers)
{
    write_metadata_lines(out, meta);
    out << "batch\tevaluations\tbatch_evaluations\tadded\tevicted\trejected\tdepot_appends\tpartial\tretrain\t"
           "retrain_diverged\treindex_dropped";
    for (std::size_t k = 0; k < n_containers; ++k)
        out << "\toccupancy_" << k;
    out << '\n';
}

void write_batch_row(std::ostream& out, const BatchStats& s, std::size_t evaluations, const RetrainReport* retrain,
                     const std::vector<GridContainer>& containers)
{
    std::size_t dropped = 0;
    if (retrain)
        for (const auto& r : retrain->reindex.containers)
            dropped += r.dropped;
    out << s.batch_index << '\t' << evaluations << '\t' << s.evaluations << '\t' << s.added << '\t' << s.evicted
        << '\t' << s.rejected << '\t' << s.depot_appends << '\t' << (s.partial ? 1 : 0) << '\t' << (retrain ? 1 : 0)
        << '\t' << (retrain && retrain->diverged ? 1 : 0) << '\t' << dropped;
    for (const auto& c : containers)
        out << '\t' << c.size();
    out << '\n';
}

void write_container_snapshot(std::ostream& out, const RunMetadata& meta, const std::vector<GridContainer>& containers)
{
    out << json{{"meta", meta_json(meta)}}.dump() << '\n';
    for (const auto& c : containers)
        c.for_each([&](std::size_t cell, const Solution& sol) {
            json j;
            j["container_id"] = c.id();
            j["bin"] = c.unflatten(cell);
            j["solution_id"] = sol.id();
            j["fitness"] = sol.fitness();
            j["fd"] = sol.descriptors.at(c.id());
            j["genome"] = sol.genome();
            out << j.dump() << '\n';
        });
}

std::vector<SnapshotRecord> read_container_snapshot(std::istream& in)
{
    std::vector<SnapshotRecord> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto j = json::parse(line);
        if (first) {
            first = false;
            if (j.contains("meta"))
                continue;
        }
        SnapshotRecord r;
        r.container_id = j.at("container_id").get<int>();
        r.bin = j.at("bin").get<BinIndex>();
        r.solution_id = j.at("solution_id").get<std::uint64_t>();
        r.fitness = j.at("fitness").get<double>();
        r.fd = j.at("fd").get<FeatureVector>();
        r.genome = j.at("genome").get<Genome>();
        out.push_back(std::move(r));
    }
    return out;
}

namespace {
    json net_json(const nn::DenseNet& net)
    {
        json layers = json::array();
        for (const auto& l : net.layers()) {
            json jl;
            jl["in"] = l.weight.cols();
            jl["out"] = l.weight.rows();
            jl["activation"] = nn::to_string(l.activation);
            jl["dropout"] = l.dropout;
            // weights row by row, i.e. one row per output unit
            std::vector<double> w;
            w.reserve(static_cast<std::size_t>(l.weight.size()));
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                    w.push_back(l.weight(r, c));
            jl["weight"] = w;
            jl["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
            layers.push_back(std::move(jl));
        }
        return layers;
    }

    void load_net(const json& layers, nn::DenseNet& net)
    {
        auto& ls = net.layers();
        if (layers.size() != ls.size())
            throw StructuralError("checkpoint layer count differs from the topology");
        for (std::size_t i = 0; i < ls.size(); ++i) {
            const auto& jl = layers[i];
            auto& l = ls[i];
            if (jl.at("in").get<Eigen::Index>() != l.weight.cols() || jl.at("out").get<Eigen::Index>() != l.weight.rows())
                throw StructuralError("checkpoint layer shape differs from the topology");
            if (nn::activation_from_string(jl.at("activation").get<std::string>()) != l.activation)
                throw StructuralError("checkpoint activation differs from the topology");
            const auto w = jl.at("weight").get<std::vector<double>>();
            const auto b = jl.at("bias").get<std::vector<double>>();
            if (w.size() != static_cast<std::size_t>(l.weight.size()) || b.size() != static_cast<std::size_t>(l.bias.size()))
                throw StructuralError("checkpoint parameter count differs from the topology");
            std::size_t k = 0;
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                    l.weight(r, c) = w[k++];
            for (Eigen::Index r = 0; r < l.bias.size(); ++r)
                l.bias(r) = b[static_cast<std::size_t>(r)];
        }
    }
}

void write_checkpoint(std::ostream& out, const RunMetadata& meta, const ModularAutoEncoderEnsemble& ensemble,
                      const std::vector<std::optional<QuantileTransform>>& quantiles)
{
    const auto& topo = ensemble.topology();
    json j;
    j["meta"] = meta_json(meta);
    j["topology"] = {{"input_dim", topo.input_dim}, {"latent_dim", topo.latent_dim}, {"modules", topo.modules},
                     {"hidden", topo.hidden},       {"dropout", topo.dropout}};
    j["diversity"] = {{"kind", to_string(ensemble.diversity().kind)},
                      {"lambda", ensemble.diversity().lambda},
                      {"sign", ensemble.diversity().sign}};
    const auto& sc = ensemble.scaling();
    j["scaling"] = {{"channels", sc.channels}, {"timepoints", sc.timepoints}, {"lo", sc.lo}, {"hi", sc.hi}};
    json modules = json::array();
    for (std::size_t m = 0; m < ensemble.size(); ++m) {
        json jm;
        jm["encoder"] = net_json(ensemble.module(m).encoder);
        jm["decoder"] = net_json(ensemble.module(m).decoder);
        if (m < quantiles.size() && quantiles[m])
            jm["quantiles"] = quantiles[m]->landmarks();
        else
            jm["quantiles"] = nullptr;
        modules.push_back(std::move(jm));
    }
    j["modules"] = std::move(modules);
    out << j.dump(1) << '\n';
}

Checkpoint read_checkpoint(std::istream& in)
{
    json j;
    try {
        j = json::parse(in);
    }
    catch (const json::exception& e) {
        throw StructuralError(std::string("malformed checkpoint: ") + e.what());
    }
    try {
        EnsembleTopology topo;
        const auto& jt = j.at("topology");
        topo.input_dim = jt.at("input_dim").get<int>();
        topo.latent_dim = jt.at("latent_dim").get<int>();
        topo.modules = jt.at("modules").get<int>();
        topo.hidden = jt.at("hidden").get<std::vector<int>>();
        topo.dropout = jt.at("dropout").get<double>();
        DiversityConfig div;
        div.kind = diversity_kind_from_string(j.at("diversity").at("kind").get<std::string>());
        div.lambda = j.at("diversity").at("lambda").get<double>();
        div.sign = j.at("diversity").at("sign").get<int>();

        Checkpoint cp{ModularAutoEncoderEnsemble(topo, div), {}};
        InputScaling sc;
        sc.channels = j.at("scaling").at("channels").get<std::size_t>();
        sc.timepoints = j.at("scaling").at("timepoints").get<std::size_t>();
        sc.lo = j.at("scaling").at("lo").get<std::vector<double>>();
        sc.hi = j.at("scaling").at("hi").get<std::vector<double>>();
        cp.ensemble.set_scaling(std::move(sc));

        const auto& modules = j.at("modules");
        if (modules.size() != cp.ensemble.size())
            throw StructuralError("checkpoint module count differs from the topology");
        for (std::size_t m = 0; m < cp.ensemble.size(); ++m) {
            load_net(modules[m].at("encoder"), cp.ensemble.module(m).encoder);
            load_net(modules[m].at("decoder"), cp.ensemble.module(m).decoder);
            const auto& q = modules[m].at("quantiles");
            if (q.is_null())
                cp.quantiles.emplace_back();
            else
                cp.quantiles.emplace_back(QuantileTransform(q.get<std::vector<std::vector<double>>>()));
        }
        return cp;
    }
    catch (const json::exception& e) {
        throw StructuralError(std::string("malformed checkpoint: ") + e.what());
    }
}

} // namespace mcaurora
