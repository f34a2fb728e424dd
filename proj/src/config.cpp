#include <mcaurora/config.hpp>
#include <mcaurora/descriptors.hpp>

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace mcaurora {

ConfigError::ConfigError(const std::string& message, int line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), _line(line)
{
}

EngineConfig ExperimentConfig::engine_config() const
{
    EngineConfig e;
    e.containers = containers;
    e.sharing = sharing;
    e.training = training;
    e.init_budget = init_budget;
    e.eval_budget = eval_budget;
    e.batch_size = batch_size;
    e.training_period = training_period;
    e.p_mut = p_mut;
    e.eta = eta;
    e.curiosity = curiosity;
    e.latent_dim = latent_dim;
    e.hidden = hidden;
    e.dropout = dropout;
    e.diversity = diversity;
    e.training_cfg = optimiser;
    e.n_quantiles = n_quantiles;
    e.threads = threads;
    return e;
}

namespace {

    struct FieldError {
        std::string field;
        std::string message;
    };

    std::optional<FieldError> check(const ExperimentConfig& c)
    {
        auto fail = [](std::string field, std::string msg) { return FieldError{std::move(field), std::move(msg)}; };
        if (c.case_name.empty())
            return fail("case", "case name must not be empty");
        if (c.replicates < 1)
            return fail("replicates", "at least one replicate is required");
        if (c.threads < 1)
            return fail("threads", "thread count must be positive");

        std::shared_ptr<const Task> task;
        try {
            task = make_task(c.task, c.task_params);
        }
        catch (const StructuralError& e) {
            return fail("task", e.what());
        }

        if (c.containers.empty())
            return fail("containers", "at least one container is required");
        std::size_t capacity = 0;
        bool any_learned = false, any_hardcoded = false;
        std::optional<std::vector<HardcodedSpec>> pairs;
        for (std::size_t k = 0; k < c.containers.size(); ++k) {
            const auto& spec = c.containers[k];
            const std::string field = "containers.grids." + std::to_string(k);
            if (spec.shape.empty())
                return fail(field, "grid shape must not be empty");
            std::size_t cells = 1;
            for (int s : spec.shape) {
                if (s < 1)
                    return fail(field, "grid dimensions must be positive");
                cells *= static_cast<std::size_t>(s);
            }
            capacity += cells;
            if (spec.fd_type == FdType::Hardcoded) {
                any_hardcoded = true;
                if (!pairs) {
                    try {
                        pairs = fd_pairs_default(task->definition());
                    }
                    catch (const StructuralError& e) {
                        return fail(field, e.what());
                    }
                }
                if (spec.hardcoded_pair >= pairs->size())
                    return fail(field, "hardcoded descriptor pair index out of range");
                if ((*pairs)[spec.hardcoded_pair].reductions.size() != spec.shape.size())
                    return fail(field, "grid dimensionality differs from the hardcoded descriptor's");
            }
            else {
                any_learned = true;
                if (static_cast<int>(spec.shape.size()) != c.latent_dim)
                    return fail(field, "learned-descriptor grids need latent_dim dimensions");
            }
        }
        if (capacity != c.bin_budget)
            return fail("containers.bin_budget", "grid capacities sum to " + std::to_string(capacity) +
                                                     " bins but the bin budget is " + std::to_string(c.bin_budget));
        if (any_hardcoded && c.training != TrainingStrategy::None)
            return fail("features.training", "hardcoded descriptors require training strategy 'none'");
        if (any_learned && c.training == TrainingStrategy::None)
            return fail("features.training", "learned descriptors require a pre-trained or online training strategy");

        if (c.init_budget < 2)
            return fail("search.init_budget", "initialisation budget must be at least 2");
        if (c.batch_size < 1)
            return fail("search.batch_size", "batch size must be positive");
        if (!(c.p_mut >= 0.0 && c.p_mut <= 1.0))
            return fail("search.mutation_probability", "mutation probability must lie in [0, 1]");
        if (!(c.eta > 0.0))
            return fail("search.eta", "eta must be positive");
        if (!(c.curiosity.floor > 0.0) || !std::isfinite(c.curiosity.initial) || !std::isfinite(c.curiosity.success) ||
            !std::isfinite(c.curiosity.failure))
            return fail("search.curiosity", "curiosity floor must be positive and all scores finite");

        if (c.training_period < 1)
            return fail("features.training_period", "training period must be positive");
        if (c.latent_dim < 1)
            return fail("features.latent_dim", "latent dimensionality must be positive");
        for (int h : c.hidden)
            if (h < 1)
                return fail("features.hidden", "hidden layer sizes must be positive");
        if (!(c.dropout >= 0.0 && c.dropout < 1.0))
            return fail("features.dropout", "dropout must lie in [0, 1)");
        if (c.n_quantiles < 2)
            return fail("features.n_quantiles", "at least two quantiles are required");
        if (c.diversity.sign != 1 && c.diversity.sign != -1)
            return fail("features.diversity.sign", "diversity sign must be +1 or -1");
        if (!(c.diversity.lambda >= 0.0) || !std::isfinite(c.diversity.lambda))
            return fail("features.diversity.lambda", "lambda must be finite and non-negative");
        if (c.diversity.kind == DiversityKind::Cmd && c.latent_dim < 2)
            return fail("features.diversity.kind", "the cmd loss needs latent_dim >= 2");
        if (c.optimiser.epochs < 0)
            return fail("features.optimiser.epochs", "epoch count must be non-negative");
        if (!(c.optimiser.learning_rate > 0.0))
            return fail("features.optimiser.learning_rate", "learning rate must be positive");
        if (c.optimiser.batch_size < 1)
            return fail("features.optimiser.batch_size", "batch size must be positive");
        if (!(c.optimiser.validation_split > 0.0 && c.optimiser.validation_split < 1.0))
            return fail("features.optimiser.validation_split", "validation split must lie in (0, 1)");
        if (!(c.optimiser.beta1 >= 0.0 && c.optimiser.beta1 < 1.0 && c.optimiser.beta2 >= 0.0 && c.optimiser.beta2 < 1.0))
            return fail("features.optimiser", "Adam betas must lie in [0, 1)");
        if (!(c.optimiser.epsilon > 0.0))
            return fail("features.optimiser.epsilon", "Adam epsilon must be positive");
        return std::nullopt;
    }

    int line_of(const YAML::Node& n)
    {
        return n.Mark().is_null() ? 0 : n.Mark().line + 1;
    }

    // Map node wrapper that rejects keys nobody asked for.
    class Section {
    public:
        Section(const YAML::Node& node, std::string path, std::map<std::string, int>& lines)
            : _node(node), _path(std::move(path)), _lines(lines)
        {
            if (_node && !_node.IsNull() && !_node.IsMap())
                throw ConfigError("'" + display() + "' must be a mapping", line_of(_node));
            _lines[_path] = line_of(_node);
        }

        bool has(const std::string& key) const { return _node && _node.IsMap() && _node[key]; }

        // null node when the key is absent
        YAML::Node node(const std::string& key)
        {
            _used.insert(key);
            if (!has(key))
                return YAML::Node();
            YAML::Node n = _node[key];
            _lines[field(key)] = line_of(n);
            return n;
        }

        Section child(const std::string& key) { return Section(node(key), field(key), _lines); }

        template <typename T>
        void get(const std::string& key, T& out)
        {
            _used.insert(key);
            if (!has(key))
                return;
            YAML::Node n = node(key);
            try {
                out = n.as<T>();
            }
            catch (const YAML::Exception&) {
                throw ConfigError("'" + field(key) + "' has an invalid value", line_of(n));
            }
        }

        template <typename T>
        void require(const std::string& key, T& out)
        {
            if (!has(key))
                throw ConfigError("missing required key '" + field(key) + "'", line_of(_node));
            get(key, out);
        }

        void finish() const
        {
            if (!_node || !_node.IsMap())
                return;
            for (const auto& kv : _node) {
                const auto key = kv.first.as<std::string>();
                if (!_used.contains(key))
                    throw ConfigError("unknown key '" + field(key) + "'", line_of(kv.first));
            }
        }

        std::string field(const std::string& key) const { return _path.empty() ? key : _path + "." + key; }

    private:
        std::string display() const { return _path.empty() ? "<root>" : _path; }

        YAML::Node _node;
        std::string _path;
        std::map<std::string, int>& _lines;
        std::set<std::string> _used;
    };

    template <typename E, typename F>
    void get_enum(Section& s, const std::string& key, E& out, F from_string)
    {
        std::string text;
        s.get(key, text);
        if (text.empty())
            return;
        try {
            out = from_string(text);
        }
        catch (const StructuralError& e) {
            throw ConfigError(e.what(), line_of(s.node(key)));
        }
    }

    std::string number(double v)
    {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        std::string s(buf, res.ptr);
        // keep floats recognisable as floats
        if (s.find_first_of(".eEn") == std::string::npos)
            s += ".0";
        return s;
    }

} // namespace

void validate(const ExperimentConfig& cfg)
{
    if (auto err = check(cfg))
        throw ConfigError("'" + err->field + "': " + err->message);
}

ExperimentConfig parse_config(const std::string& text)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    }
    catch (const YAML::ParserException& e) {
        throw ConfigError(e.msg, e.mark.line + 1);
    }
    std::map<std::string, int> lines;
    ExperimentConfig c;
    Section top(root, "", lines);
    top.require("case", c.case_name);
    top.get("seed", c.seed);
    top.get("replicates", c.replicates);
    top.get("output_dir", c.output_dir);
    top.get("threads", c.threads);

    {
        Section t = top.child("task");
        t.get("name", c.task);
        YAML::Node params = t.node("params");
        {
            if (!params.IsMap() && !params.IsNull())
                throw ConfigError("'task.params' must be a mapping", line_of(params));
            if (params.IsMap())
                for (const auto& kv : params) {
                    const auto key = kv.first.as<std::string>();
                    try {
                        c.task_params[key] = kv.second.as<double>();
                    }
                    catch (const YAML::Exception&) {
                        throw ConfigError("'task.params." + key + "' must be a number", line_of(kv.second));
                    }
                    lines["task.params." + key] = line_of(kv.second);
                }
        }
        t.finish();
    }

    {
        Section s = top.child("containers");
        s.get("bin_budget", c.bin_budget);
        YAML::Node grids = s.node("grids");
        if (!grids.IsSequence())
            throw ConfigError("'containers.grids' must be a list of grids", line_of(grids.IsNull() ? root : grids));
        for (std::size_t k = 0; k < grids.size(); ++k) {
            Section g(grids[k], "containers.grids." + std::to_string(k), lines);
            ContainerSpec spec;
            g.require("shape", spec.shape);
            get_enum(g, "fd", spec.fd_type, fd_type_from_string);
            g.get("pair", spec.hardcoded_pair);
            g.finish();
            c.containers.push_back(std::move(spec));
        }
        s.finish();
    }

    {
        Section s = top.child("search");
        get_enum(s, "sharing", c.sharing, sharing_strategy_from_string);
        s.get("init_budget", c.init_budget);
        s.get("eval_budget", c.eval_budget);
        s.get("batch_size", c.batch_size);
        s.get("mutation_probability", c.p_mut);
        s.get("eta", c.eta);
        Section cur = s.child("curiosity");
        cur.get("initial", c.curiosity.initial);
        cur.get("success", c.curiosity.success);
        cur.get("failure", c.curiosity.failure);
        cur.get("floor", c.curiosity.floor);
        cur.finish();
        s.finish();
    }

    {
        Section s = top.child("features");
        get_enum(s, "training", c.training, training_strategy_from_string);
        s.get("training_period", c.training_period);
        s.get("latent_dim", c.latent_dim);
        s.get("hidden", c.hidden);
        s.get("dropout", c.dropout);
        s.get("n_quantiles", c.n_quantiles);
        Section d = s.child("diversity");
        get_enum(d, "kind", c.diversity.kind, diversity_kind_from_string);
        d.get("lambda", c.diversity.lambda);
        d.get("sign", c.diversity.sign);
        d.finish();
        Section o = s.child("optimiser");
        o.get("epochs", c.optimiser.epochs);
        o.get("learning_rate", c.optimiser.learning_rate);
        o.get("batch_size", c.optimiser.batch_size);
        o.get("validation_split", c.optimiser.validation_split);
        o.get("beta1", c.optimiser.beta1);
        o.get("beta2", c.optimiser.beta2);
        o.get("epsilon", c.optimiser.epsilon);
        o.finish();
        s.finish();
    }

    {
        Section s = top.child("metrics");
        s.get("fd_correlation", c.fd_correlation);
        s.finish();
    }
    top.finish();

    if (auto err = check(c)) {
        // report the most specific key we saw a line for
        std::string f = err->field;
        int line = 0;
        while (!f.empty()) {
            auto it = lines.find(f);
            if (it != lines.end() && it->second > 0) {
                line = it->second;
                break;
            }
            const auto dot = f.rfind('.');
            f = dot == std::string::npos ? std::string() : f.substr(0, dot);
        }
        throw ConfigError("'" + err->field + "': " + err->message, line);
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c)
{
    YAML::Emitter out;
    auto num = [&](double v) { out << YAML::Value << number(v); };
    out << YAML::BeginMap;
    out << YAML::Key << "case" << YAML::Value << c.case_name;
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::Key << "replicates" << YAML::Value << c.replicates;
    out << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
    out << YAML::Key << "threads" << YAML::Value << c.threads;

    out << YAML::Key << "task" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << c.task;
    out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : c.task_params) {
        out << YAML::Key << k;
        num(v);
    }
    out << YAML::EndMap << YAML::EndMap;

    out << YAML::Key << "containers" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "bin_budget" << YAML::Value << c.bin_budget;
    out << YAML::Key << "grids" << YAML::Value << YAML::BeginSeq;
    for (const auto& g : c.containers) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "shape" << YAML::Value << YAML::Flow << g.shape;
        out << YAML::Key << "fd" << YAML::Value << to_string(g.fd_type);
        if (g.fd_type == FdType::Hardcoded)
            out << YAML::Key << "pair" << YAML::Value << g.hardcoded_pair;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;

    out << YAML::Key << "search" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "sharing" << YAML::Value << to_string(c.sharing);
    out << YAML::Key << "init_budget" << YAML::Value << c.init_budget;
    out << YAML::Key << "eval_budget" << YAML::Value << c.eval_budget;
    out << YAML::Key << "batch_size" << YAML::Value << c.batch_size;
    out << YAML::Key << "mutation_probability";
    num(c.p_mut);
    out << YAML::Key << "eta";
    num(c.eta);
    out << YAML::Key << "curiosity" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "initial";
    num(c.curiosity.initial);
    out << YAML::Key << "success";
    num(c.curiosity.success);
    out << YAML::Key << "failure";
    num(c.curiosity.failure);
    out << YAML::Key << "floor";
    num(c.curiosity.floor);
    out << YAML::EndMap << YAML::EndMap;

    out << YAML::Key << "features" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "training" << YAML::Value << to_string(c.training);
    out << YAML::Key << "training_period" << YAML::Value << c.training_period;
    out << YAML::Key << "latent_dim" << YAML::Value << c.latent_dim;
    out << YAML::Key << "hidden" << YAML::Value << YAML::Flow << c.hidden;
    out << YAML::Key << "dropout";
    num(c.dropout);
    out << YAML::Key << "n_quantiles" << YAML::Value << c.n_quantiles;
    out << YAML::Key << "diversity" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << to_string(c.diversity.kind);
    out << YAML::Key << "lambda";
    num(c.diversity.lambda);
    out << YAML::Key << "sign" << YAML::Value << c.diversity.sign;
    out << YAML::EndMap;
    out << YAML::Key << "optimiser" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "epochs" << YAML::Value << c.optimiser.epochs;
    out << YAML::Key << "learning_rate";
    num(c.optimiser.learning_rate);
    out << YAML::Key << "batch_size" << YAML::Value << c.optimiser.batch_size;
    out << YAML::Key << "validation_split";
    num(c.optimiser.validation_split);
    out << YAML::Key << "beta1";
    num(c.optimiser.beta1);
    out << YAML::Key << "beta2";
    num(c.optimiser.beta2);
    out << YAML::Key << "epsilon";
    num(c.optimiser.epsilon);
    out << YAML::EndMap << YAML::EndMap;

    out << YAML::Key << "metrics" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "fd_correlation" << YAML::Value << c.fd_correlation;
    out << YAML::EndMap;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg)
{
    // neither where results go nor how many threads produce them changes the results
    ExperimentConfig c = cfg;
    c.output_dir.clear();
    c.threads = 1;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump_config(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names{
        "hardcoded-4",   "hardcoded-4-ns",  "pt-reco-4",      "reco-4",         "qt-reco-4",
        "qt-reco-4-ns",  "hardcoded-1",     "qt-reco-1",      "qt-reco-6-ns",   "qt-reco-9-ns",
        "qt-reco-25-ns", "qt-outputs-4-ns", "qt-covmin-4-ns", "qt-covmax-4-ns", "qt-cmd-4-ns",
    };
    return names;
}

ExperimentConfig preset(const std::string& name, bool desk)
{
    struct Row {
        FdType fd;
        SharingStrategy sharing;
        TrainingStrategy training;
        DiversityKind loss;
        int sign;
        std::vector<std::vector<int>> grids; // paper-scale shapes
    };
    auto repeat = [](int n, std::vector<int> shape) { return std::vector<std::vector<int>>(n, shape); };
    const auto S = SharingStrategy::Shared;
    const auto NS = SharingStrategy::NonShared;
    const auto On = TrainingStrategy::Online;
    const std::map<std::string, Row> rows{
        {"hardcoded-4", {FdType::Hardcoded, S, TrainingStrategy::None, DiversityKind::None, 1, repeat(4, {25, 25})}},
        {"hardcoded-4-ns", {FdType::Hardcoded, NS, TrainingStrategy::None, DiversityKind::None, 1, repeat(4, {25, 25})}},
        {"pt-reco-4", {FdType::AE, S, TrainingStrategy::PreTrained, DiversityKind::None, 1, repeat(4, {25, 25})}},
        {"reco-4", {FdType::AE, S, On, DiversityKind::None, 1, repeat(4, {25, 25})}},
        {"qt-reco-4", {FdType::AEQT, S, On, DiversityKind::None, 1, repeat(4, {25, 25})}},
        {"qt-reco-4-ns", {FdType::AEQT, NS, On, DiversityKind::None, 1, repeat(4, {25, 25})}},
        {"hardcoded-1", {FdType::Hardcoded, S, TrainingStrategy::None, DiversityKind::None, 1, repeat(1, {50, 50})}},
        {"qt-reco-1", {FdType::AEQT, S, On, DiversityKind::None, 1, repeat(1, {50, 50})}},
        {"qt-reco-6-ns", {FdType::AEQT, NS, On, DiversityKind::None, 1, [&] {
                              auto g = repeat(5, {20, 20});
                              g.push_back({20, 25});
                              return g;
                          }()}},
        {"qt-reco-9-ns", {FdType::AEQT, NS, On, DiversityKind::None, 1, [&] {
                              auto g = repeat(8, {17, 16});
                              g.push_back({18, 18});
                              return g;
                          }()}},
        {"qt-reco-25-ns", {FdType::AEQT, NS, On, DiversityKind::None, 1, repeat(25, {10, 10})}},
        {"qt-outputs-4-ns", {FdType::AEQT, NS, On, DiversityKind::Outputs, -1, repeat(4, {25, 25})}},
        {"qt-covmin-4-ns", {FdType::AEQT, NS, On, DiversityKind::Cov, 1, repeat(4, {25, 25})}},
        {"qt-covmax-4-ns", {FdType::AEQT, NS, On, DiversityKind::Cov, -1, repeat(4, {25, 25})}},
        {"qt-cmd-4-ns", {FdType::AEQT, NS, On, DiversityKind::Cmd, 1, repeat(4, {25, 25})}},
    };
    const auto it = rows.find(name);
    if (it == rows.end())
        throw ConfigError("unknown preset '" + name + "'");
    const Row& row = it->second;

    ExperimentConfig c;
    c.case_name = name;
    c.output_dir = desk ? name + "-desk" : name;
    c.sharing = row.sharing;
    c.training = row.training;
    c.diversity = {row.loss, 1.0, row.sign};
    c.bin_budget = 0;
    for (std::size_t k = 0; k < row.grids.size(); ++k) {
        ContainerSpec spec;
        spec.shape = desk ? std::vector<int>{10, 10} : row.grids[k];
        spec.fd_type = row.fd;
        spec.hardcoded_pair = row.fd == FdType::Hardcoded ? k : 0;
        c.bin_budget += static_cast<std::size_t>(spec.shape[0] * spec.shape[1]);
        c.containers.push_back(std::move(spec));
    }
    if (desk) {
        c.init_budget = 500;
        c.eval_budget = 5000;
        c.batch_size = 100;
        c.training_period = 500;
        c.optimiser.learning_rate = 0.01;
    }
    else {
        c.init_budget = 10000;
        c.eval_budget = 100000;
        c.batch_size = 1000;
        c.training_period = 5000;
        c.optimiser.learning_rate = 0.1;
    }
    c.optimiser.epochs = 200;
    c.optimiser.batch_size = 1024;
    c.optimiser.validation_split = 0.25;
    validate(c);
    return c;
}

} // namespace mcaurora
