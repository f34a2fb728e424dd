#pragma once

#include <mcaurora/core.hpp>
#include <mcaurora/descriptors.hpp>
#include <mcaurora/ensemble.hpp>
#include <mcaurora/quantile.hpp>
#include <mcaurora/rng.hpp>
#include <mcaurora/tasks.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mcaurora {

enum class TrainingStrategy { None, PreTrained, Online };
enum class SharingStrategy { Shared, NonShared };
enum class FdType { Hardcoded, AE, AEQT };

const char* to_string(TrainingStrategy t);
const char* to_string(SharingStrategy s);
const char* to_string(FdType f);
TrainingStrategy training_strategy_from_string(const std::string& s);
SharingStrategy sharing_strategy_from_string(const std::string& s);
FdType fd_type_from_string(const std::string& s);

struct MutationConfig {
    double p_mut = 0.1;
    double eta = 20.0;
    Bounds bounds{-1.0, 1.0};
};

/// Bounded polynomial mutation: each gene is perturbed with probability
/// `p_mut` by a polynomial distribution of index `eta`, scaled by the
/// distance to the bounds, and the result is clipped to the bounds.
Genome mutate_polynomial(std::span<const double> genome, const MutationConfig& cfg, Rng& rng);

/// Cell drawn with probability proportional to max(curiosity, floor).
std::size_t select_curiosity_roulette_cell(const GridContainer& container, Rng& rng, double floor = 0.01);
const Solution& select_curiosity_roulette(const GridContainer& container, Rng& rng, double floor = 0.01);

struct CuriosityConfig {
    double initial = 1.0;
    double success = 1.0;
    double failure = -0.5;
    double floor = 0.01;

    bool operator==(const CuriosityConfig&) const = default;
};

struct ContainerSpec {
    std::vector<int> shape;
    FdType fd_type = FdType::AEQT;
    // index into fd_pairs_default() for hardcoded containers
    std::size_t hardcoded_pair = 0;

    bool operator==(const ContainerSpec&) const = default;
};

struct EngineConfig {
    std::vector<ContainerSpec> containers;
    SharingStrategy sharing = SharingStrategy::Shared;
    TrainingStrategy training = TrainingStrategy::Online;
    std::size_t init_budget = 500;
    std::size_t eval_budget = 5000;
    std::size_t batch_size = 100;
    std::size_t training_period = 500;
    double p_mut = 0.1;
    double eta = 20.0;
    CuriosityConfig curiosity;
    int latent_dim = 2;
    std::vector<int> hidden{16, 5};
    double dropout = 0.2;
    DiversityConfig diversity;
    TrainingConfig training_cfg;
    std::size_t n_quantiles = 1000;
    int threads = 1;
};

struct BatchStats {
    std::size_t batch_index = 0;
    std::size_t evaluations = 0;
    std::size_t added = 0;    // attempts landing in an empty cell
    std::size_t evicted = 0;  // attempts replacing a weaker elite
    std::size_t rejected = 0; // attempts that lost to the incumbent
    std::size_t depot_appends = 0;
    bool partial = false;
    std::vector<std::size_t> charged; // evaluations charged per container
};

struct ContainerReindex {
    int container_id = 0;
    std::size_t before = 0;
    std::size_t retained = 0;
    std::size_t dropped = 0;
};

struct ReindexReport {
    std::vector<ContainerReindex> containers;
};

struct RetrainReport {
    TrainReport training;
    ReindexReport reindex;
    bool diverged = false;
};

/// Multi-container search loop. All mutations of containers and depot happen
/// on the calling thread; only task evaluations fan out to worker threads.
class Engine {
public:
    Engine(EngineConfig cfg, std::shared_ptr<const Task> task, std::uint64_t seed);

    /// Evaluates the random initial collection, trains the descriptor models
    /// on it, then inserts it into every container.
    void initialize();

    BatchStats run_batch(std::size_t batch_size);
    BatchStats run_batch() { return run_batch(_cfg.batch_size); }

    /// Retrains and re-indexes when the online schedule is due.
    std::optional<RetrainReport> maybe_retrain();

    /// Empties every learned-descriptor container and re-inserts its elites
    /// under the current extractors, best first.
    ReindexReport reindex_all();

    bool initialized() const { return _initialized; }
    bool budget_exhausted() const { return _eval_budget_used >= _cfg.eval_budget; }
    std::size_t eval_budget_used() const { return _eval_budget_used; }
    std::size_t total_evaluations() const { return _total_evaluations; }
    std::size_t focus_index() const { return _focus; }
    std::size_t batches_run() const { return _batches; }
    const std::vector<std::size_t>& charged_per_container() const { return _charged; }

    const EngineConfig& config() const { return _cfg; }
    const Task& task() const { return *_task; }
    std::uint64_t seed() const { return _seed; }

    const std::vector<GridContainer>& containers() const { return _containers; }
    std::vector<GridContainer>& containers() { return _containers; }
    const DepotContainer& depot() const { return _depot; }
    std::shared_ptr<const ModularAutoEncoderEnsemble> ensemble() const { return _ensemble; }
    const std::vector<std::optional<QuantileTransform>>& quantile_transforms() const { return _quantiles; }
    const std::vector<RetrainReport>& retrain_history() const { return _retrains; }
    const TrainReport& initial_training() const { return _initial_training; }

    bool has_learned_containers() const;

private:
    std::vector<Evaluation> evaluate_all(const std::vector<Genome>& genomes, std::string_view stream, std::uint64_t first_index) const;
    bool train_models(const std::vector<const ObservationMatrix*>& corpus, std::uint64_t round, TrainReport& report);
    void publish_extractors();
    Genome random_genome(Rng& rng) const;

    EngineConfig _cfg;
    std::shared_ptr<const Task> _task;
    std::uint64_t _seed;
    MutationConfig _mutation;

    std::vector<GridContainer> _containers;
    std::vector<std::size_t> _module_of; // ensemble module per container, or npos
    DepotContainer _depot;
    std::shared_ptr<const ModularAutoEncoderEnsemble> _ensemble;
    std::vector<std::optional<QuantileTransform>> _quantiles; // per ensemble module
    std::vector<HardcodedSpec> _hardcoded;

    Rng _selection_rng;
    Rng _mutation_rng;
    std::uint64_t _next_id = 0;
    std::size_t _eval_budget_used = 0;
    std::size_t _total_evaluations = 0;
    std::size_t _focus = 0;
    std::size_t _batches = 0;
    std::uint64_t _training_rounds = 0;
    std::vector<std::size_t> _charged;
    std::vector<RetrainReport> _retrains;
    TrainReport _initial_training;
    bool _initialized = false;
};

} // namespace mcaurora
