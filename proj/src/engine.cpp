#include <mcaurora/engine.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace mcaurora {

namespace {
    constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
}

const char* to_string(TrainingStrategy t)
{
    switch (t) {
    case TrainingStrategy::None:
        return "none";
    case TrainingStrategy::PreTrained:
        return "pretrained";
    case TrainingStrategy::Online:
        return "online";
    }
    return "?";
}

const char* to_string(SharingStrategy s)
{
    return s == SharingStrategy::Shared ? "shared" : "non_shared";
}

const char* to_string(FdType f)
{
    switch (f) {
    case FdType::Hardcoded:
        return "hardcoded";
    case FdType::AE:
        return "ae";
    case FdType::AEQT:
        return "ae_qt";
    }
    return "?";
}

TrainingStrategy training_strategy_from_string(const std::string& s)
{
    if (s == "none")
        return TrainingStrategy::None;
    if (s == "pretrained")
        return TrainingStrategy::PreTrained;
    if (s == "online")
        return TrainingStrategy::Online;
    throw StructuralError("unknown training strategy '" + s + "'");
}

SharingStrategy sharing_strategy_from_string(const std::string& s)
{
    if (s == "shared")
        return SharingStrategy::Shared;
    if (s == "non_shared")
        return SharingStrategy::NonShared;
    throw StructuralError("unknown sharing strategy '" + s + "'");
}

FdType fd_type_from_string(const std::string& s)
{
    if (s == "hardcoded")
        return FdType::Hardcoded;
    if (s == "ae")
        return FdType::AE;
    if (s == "ae_qt")
        return FdType::AEQT;
    throw StructuralError("unknown descriptor type '" + s + "'");
}

Genome mutate_polynomial(std::span<const double> genome, const MutationConfig& cfg, Rng& rng)
{
    const double lo = cfg.bounds.lo, hi = cfg.bounds.hi;
    const double range = hi - lo;
    const double mut_pow = 1.0 / (cfg.eta + 1.0);
    Genome out(genome.begin(), genome.end());
    for (double& x : out) {
        if (!rng.bernoulli(cfg.p_mut))
            continue;
        const double delta1 = (x - lo) / range;
        const double delta2 = (hi - x) / range;
        const double r = rng.uniform();
        double deltaq;
        if (r < 0.5) {
            const double xy = 1.0 - delta1;
            const double val = 2.0 * r + (1.0 - 2.0 * r) * std::pow(xy, cfg.eta + 1.0);
            deltaq = std::pow(val, mut_pow) - 1.0;
        }
        else {
            const double xy = 1.0 - delta2;
            const double val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * std::pow(xy, cfg.eta + 1.0);
            deltaq = 1.0 - std::pow(val, mut_pow);
        }
        x = std::clamp(x + deltaq * range, lo, hi);
    }
    return out;
}

std::size_t select_curiosity_roulette_cell(const GridContainer& container, Rng& rng, double floor)
{
    if (container.empty())
        throw SelectionError("cannot select from an empty container");
    const auto cells = container.occupied_cells();
    double total = 0.0;
    for (auto c : cells)
        total += std::max(container.at(c)->curiosity, floor);
    double u = rng.uniform() * total;
    for (auto c : cells) {
        u -= std::max(container.at(c)->curiosity, floor);
        if (u < 0.0)
            return c;
    }
    return cells.back();
}

const Solution& select_curiosity_roulette(const GridContainer& container, Rng& rng, double floor)
{
    return *container.at(select_curiosity_roulette_cell(container, rng, floor));
}

Engine::Engine(EngineConfig cfg, std::shared_ptr<const Task> task, std::uint64_t seed)
    : _cfg(std::move(cfg)), _task(std::move(task)), _seed(seed), _selection_rng(substream(seed, "selection")),
      _mutation_rng(substream(seed, "mutation"))
{
    if (!_task)
        throw StructuralError("engine needs a task");
    if (_cfg.containers.empty())
        throw StructuralError("engine needs at least one container");
    if (_cfg.batch_size == 0)
        throw StructuralError("batch size must be positive");
    if (_cfg.p_mut < 0.0 || _cfg.p_mut > 1.0 || _cfg.eta <= 0.0)
        throw StructuralError("mutation probability must lie in [0, 1] and eta must be positive");
    const auto& def = _task->definition();
    _mutation = {_cfg.p_mut, _cfg.eta, def.genome_bounds};

    std::size_t modules = 0;
    for (std::size_t k = 0; k < _cfg.containers.size(); ++k) {
        const auto& spec = _cfg.containers[k];
        std::vector<Bounds> bounds(spec.shape.size(), Bounds{0.0, 1.0});
        _containers.emplace_back(static_cast<int>(k), spec.shape, bounds);
        if (spec.fd_type == FdType::Hardcoded) {
            _module_of.push_back(npos);
            if (_hardcoded.empty())
                _hardcoded = fd_pairs_default(def);
            if (spec.hardcoded_pair >= _hardcoded.size())
                throw StructuralError("hardcoded descriptor pair index out of range");
            if (_hardcoded[spec.hardcoded_pair].reductions.size() != spec.shape.size())
                throw StructuralError("hardcoded descriptor dimensionality differs from grid dimensionality");
            _containers.back().set_extractor(std::make_shared<DescriptorExtractor>(_hardcoded[spec.hardcoded_pair]));
        }
        else {
            if (static_cast<int>(spec.shape.size()) != _cfg.latent_dim)
                throw StructuralError("learned descriptor grids must have latent_dim dimensions");
            _module_of.push_back(modules++);
        }
    }
    if (modules > 0 && _cfg.training == TrainingStrategy::None)
        throw StructuralError("learned descriptors need a pre-trained or online training strategy");
    _quantiles.resize(modules);
    _charged.assign(_containers.size(), 0);
}

bool Engine::has_learned_containers() const
{
    return std::any_of(_module_of.begin(), _module_of.end(), [](std::size_t m) { return m != npos; });
}

Genome Engine::random_genome(Rng& rng) const
{
    const auto& def = _task->definition();
    Genome g(def.genome_dim);
    for (double& v : g)
        v = rng.uniform(def.genome_bounds.lo, def.genome_bounds.hi);
    return g;
}

std::vector<Evaluation> Engine::evaluate_all(const std::vector<Genome>& genomes, std::string_view stream, std::uint64_t first_index) const
{
    std::vector<Evaluation> out(genomes.size());
    auto work = [&](std::size_t i) {
        Rng rng = substream(_seed, stream, first_index + i);
        out[i] = _task->evaluate(genomes[i], rng);
        if (!std::isfinite(out[i].fitness) || !out[i].observations.all_finite())
            throw InvalidEvaluationError("task '" + _task->definition().name + "' produced a non-finite evaluation");
    };
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(_cfg.threads, 1)), genomes.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < genomes.size(); ++i)
            work(i);
        return out;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < genomes.size(); i += threads)
                    work(i);
            }
            catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        });
    for (auto& th : pool)
        th.join();
    if (error)
        std::rethrow_exception(error);
    return out;
}

bool Engine::train_models(const std::vector<const ObservationMatrix*>& corpus, std::uint64_t round, TrainReport& report)
{
    std::vector<ObservationMatrix> data;
    data.reserve(corpus.size());
    for (auto* o : corpus)
        data.push_back(*o);

    auto model = _ensemble ? std::make_shared<ModularAutoEncoderEnsemble>(*_ensemble) : nullptr;
    if (!model) {
        EnsembleTopology topo;
        topo.input_dim = static_cast<int>(data.front().size());
        topo.latent_dim = _cfg.latent_dim;
        topo.modules = static_cast<int>(_quantiles.size());
        topo.hidden = _cfg.hidden;
        topo.dropout = _cfg.dropout;
        model = std::make_shared<ModularAutoEncoderEnsemble>(topo, _cfg.diversity);
        Rng init = substream(_seed, "ae-init");
        model->xavier_uniform_init(init);
    }
    Rng rng = substream(_seed, "ae-train", round);
    report = train_ensemble(*model, data, _cfg.training_cfg, rng);
    if (report.diverged && _ensemble)
        return false;
    // with no previous model to fall back to, the partially trained one is kept
    if (report.diverged)
        model->set_scaling(InputScaling::fit(data));

    for (std::size_t m = 0; m < _quantiles.size(); ++m) {
        bool wants_qt = false;
        for (std::size_t k = 0; k < _containers.size(); ++k)
            if (_module_of[k] == m && _cfg.containers[k].fd_type == FdType::AEQT)
                wants_qt = true;
        if (!wants_qt)
            continue;
        DescriptorExtractor raw(LearnedDescriptor{model, m, std::nullopt});
        const auto codes = raw.latents(data);
        const std::size_t nq = std::min(_cfg.n_quantiles, codes.size());
        _quantiles[m] = QuantileTransform::fit(codes, nq);
    }
    _ensemble = std::move(model);
    publish_extractors();
    return !report.diverged;
}

void Engine::publish_extractors()
{
    for (std::size_t k = 0; k < _containers.size(); ++k) {
        const std::size_t m = _module_of[k];
        if (m == npos)
            continue;
        std::optional<QuantileTransform> qt;
        if (_cfg.containers[k].fd_type == FdType::AEQT)
            qt = _quantiles[m];
        _containers[k].set_extractor(std::make_shared<DescriptorExtractor>(LearnedDescriptor{_ensemble, m, std::move(qt)}));
    }
}

void Engine::initialize()
{
    if (_initialized)
        throw StructuralError("engine already initialised");
    if (_cfg.init_budget == 0)
        throw StructuralError("initialisation budget must be positive");
    Rng init_rng = substream(_seed, "init");
    std::vector<Genome> genomes;
    genomes.reserve(_cfg.init_budget);
    for (std::size_t i = 0; i < _cfg.init_budget; ++i)
        genomes.push_back(random_genome(init_rng));
    auto evals = evaluate_all(genomes, "eval", 0);
    _total_evaluations = genomes.size();

    if (has_learned_containers()) {
        std::vector<const ObservationMatrix*> corpus;
        for (const auto& e : evals)
            corpus.push_back(&e.observations);
        train_models(corpus, _training_rounds++, _initial_training);
    }

    std::vector<ObservationMatrix> observations;
    observations.reserve(evals.size());
    for (const auto& e : evals)
        observations.push_back(e.observations);
    std::vector<std::vector<FeatureVector>> fds;
    for (const auto& c : _containers)
        fds.push_back(c.extractor()->extract(observations));

    for (std::size_t i = 0; i < genomes.size(); ++i) {
        Solution sol;
        sol.individual = std::make_shared<Individual>(Individual{_next_id++, std::move(genomes[i]), std::move(evals[i])});
        sol.curiosity = _cfg.curiosity.initial;
        for (std::size_t k = 0; k < _containers.size(); ++k)
            sol.descriptors[_containers[k].id()] = fds[k][i];
        bool accepted = false;
        for (auto& c : _containers)
            accepted = c.add(sol).accepted() || accepted;
        if (accepted)
            _depot.record(sol);
    }
    _depot.reset_training_counter();
    _initialized = true;
}

BatchStats Engine::run_batch(std::size_t batch_size)
{
    if (!_initialized)
        throw StructuralError("engine must be initialised before running batches");
    BatchStats stats;
    stats.batch_index = _batches;
    stats.charged.assign(_containers.size(), 0);
    const std::size_t remaining = _cfg.eval_budget - std::min(_cfg.eval_budget, _eval_budget_used);
    const std::size_t n = std::min(batch_size, remaining);
    stats.partial = n < batch_size;
    stats.evaluations = n;
    if (n == 0)
        return stats;

    struct Offspring {
        std::size_t container;
        std::size_t parent_cell;
        std::uint64_t parent_id;
        bool has_parent;
    };
    std::vector<Offspring> plan(n);
    std::vector<Genome> genomes(n);
    const std::size_t nc = _containers.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c;
        if (_cfg.sharing == SharingStrategy::Shared) {
            c = _selection_rng.index(nc);
        }
        else {
            c = _focus;
            _focus = (_focus + 1) % nc;
        }
        ++stats.charged[c];
        ++_charged[c];
        const auto& container = _containers[c];
        if (container.empty()) {
            plan[i] = {c, 0, 0, false};
            genomes[i] = random_genome(_mutation_rng);
            continue;
        }
        const std::size_t cell = select_curiosity_roulette_cell(container, _selection_rng, _cfg.curiosity.floor);
        const Solution& parent = *container.at(cell);
        plan[i] = {c, cell, parent.id(), true};
        genomes[i] = mutate_polynomial(parent.genome(), _mutation, _mutation_rng);
    }

    auto evals = evaluate_all(genomes, "eval", _total_evaluations);
    _total_evaluations += n;
    _eval_budget_used += n;

    // descriptors per container, only for offspring that will try it
    std::vector<std::vector<FeatureVector>> fds(nc);
    for (std::size_t k = 0; k < nc; ++k) {
        std::vector<ObservationMatrix> obs;
        for (std::size_t i = 0; i < n; ++i)
            if (_cfg.sharing == SharingStrategy::Shared || plan[i].container == k)
                obs.push_back(evals[i].observations);
        fds[k] = _containers[k].extractor()->extract(obs);
    }
    std::vector<std::size_t> cursor(nc, 0);

    for (std::size_t i = 0; i < n; ++i) {
        Solution sol;
        sol.individual = std::make_shared<Individual>(Individual{_next_id++, std::move(genomes[i]), std::move(evals[i])});
        sol.curiosity = _cfg.curiosity.initial;
        std::vector<std::size_t> targets;
        if (_cfg.sharing == SharingStrategy::Shared) {
            targets.resize(nc);
            std::iota(targets.begin(), targets.end(), std::size_t{0});
        }
        else {
            targets.push_back(plan[i].container);
        }
        for (auto k : targets)
            sol.descriptors[_containers[k].id()] = fds[k][cursor[k]++];

        bool accepted = false;
        for (auto k : targets) {
            const auto r = _containers[k].add(sol);
            switch (r.outcome) {
            case AddOutcome::AddedToEmpty:
                ++stats.added;
                break;
            case AddOutcome::ReplacedWeaker:
                ++stats.evicted;
                break;
            case AddOutcome::Rejected:
                ++stats.rejected;
                break;
            }
            accepted = accepted || r.accepted();
        }
        if (accepted && _depot.record(sol))
            ++stats.depot_appends;

        if (plan[i].has_parent) {
            Solution* parent = _containers[plan[i].container].mutable_at(plan[i].parent_cell);
            if (parent && parent->id() == plan[i].parent_id) {
                const double delta = accepted ? _cfg.curiosity.success : _cfg.curiosity.failure;
                parent->curiosity = std::max(_cfg.curiosity.floor, parent->curiosity + delta);
            }
        }
    }
    ++_batches;
    return stats;
}

ReindexReport Engine::reindex_all()
{
    ReindexReport report;
    for (std::size_t k = 0; k < _containers.size(); ++k) {
        if (_module_of[k] == npos)
            continue;
        auto& container = _containers[k];
        ContainerReindex r;
        r.container_id = container.id();
        auto elites = container.drain();
        r.before = elites.size();
        std::vector<ObservationMatrix> obs;
        obs.reserve(elites.size());
        for (const auto& e : elites)
            obs.push_back(e.observations());
        const auto fds = container.extractor()->extract(obs);
        for (std::size_t i = 0; i < elites.size(); ++i)
            elites[i].descriptors[container.id()] = fds[i];
        std::stable_sort(elites.begin(), elites.end(), [](const Solution& a, const Solution& b) {
            if (a.fitness() != b.fitness())
                return a.fitness() > b.fitness();
            return a.id() < b.id();
        });
        for (auto& e : elites) {
            if (container.add(std::move(e)).accepted())
                ++r.retained;
            else
                ++r.dropped;
        }
        report.containers.push_back(r);
    }
    return report;
}

std::optional<RetrainReport> Engine::maybe_retrain()
{
    if (_cfg.training != TrainingStrategy::Online || !has_learned_containers())
        return std::nullopt;
    if (_depot.added_since_last_training() < _cfg.training_period)
        return std::nullopt;

    RetrainReport report;
    std::vector<const ObservationMatrix*> corpus;
    corpus.reserve(_depot.size());
    for (const auto& s : _depot.solutions())
        corpus.push_back(&s.observations());
    if (!train_models(corpus, _training_rounds++, report.training)) {
        report.diverged = true;
        _retrains.push_back(report);
        return report;
    }
    report.reindex = reindex_all();
    _depot.reset_training_counter();
    _retrains.push_back(report);
    return report;
}

} // namespace mcaurora
