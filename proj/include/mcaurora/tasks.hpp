#pragma once

#include <mcaurora/core.hpp>
#include <mcaurora/rng.hpp>

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcaurora {

struct ChannelInfo {
    std::string name;
    // normalisation range used by hand-designed descriptors
    Bounds bounds;
};

struct TaskDefinition {
    std::string name;
    std::size_t genome_dim = 0;
    Bounds genome_bounds{-1.0, 1.0};
    std::size_t n_timepoints = 0;
    int episodes_per_eval = 1;
    int episode_length = 1;
    int obs_averaging_window = 1;
    Bounds fitness_bounds{0.0, 1.0};
    std::vector<ChannelInfo> channels;

    std::size_t n_obs_channels() const { return channels.size(); }
    std::optional<std::size_t> channel_index(const std::string& channel) const;
};

/// Stateless evaluation task. Implementations must be pure functions of the
/// genome and the random substream so that evaluations can run concurrently.
class Task {
public:
    virtual ~Task() = default;
    virtual const TaskDefinition& definition() const = 0;
    virtual Evaluation evaluate(std::span<const double> genome, Rng& substream) const = 0;
};

/// Task-specific key/value parameters from the experiment config.
using TaskParams = std::map<std::string, double>;

struct WalkerParams {
    int episodes_per_eval = 5;
    int episode_length = 300;
    int averaging_window = 30;
    int hidden_units = 8;
    int substeps = 2;
    double control_dt = 0.02;
    double arena_length = 20.0;
    double max_slope = 0.15;
    double genome_bound = 1.0;

    static WalkerParams from(const TaskParams& params);
};

/// Planar two-legged walker on a seeded piecewise-linear terrain.
///
/// A rigid hull (position, pitch) carries two legs of two joints each. Joints
/// are velocity-damped motors driven by a one-hidden-layer tanh controller
/// whose weights form the genome. Feet interact with the ground through
/// penalty springs and viscous friction capped by a Coulomb limit, integrated
/// with semi-implicit Euler. Per control step the reward is progress minus
/// pitch shaping minus actuation cost; a fall ends the episode with -100.
class SurrogateWalker final : public Task {
public:
    explicit SurrogateWalker(WalkerParams params = {});

    const TaskDefinition& definition() const override { return _def; }
    Evaluation evaluate(std::span<const double> genome, Rng& substream) const override;

    struct Episode {
        double reward = 0.0;
        // (channels x episode_length) per-step record, channel-major
        ObservationMatrix steps;
        bool fell = false;
        bool blew_up = false;
    };

    /// One episode on the terrain generated from `terrain_seed`; `flat`
    /// disables terrain roughness.
    Episode run_episode(std::span<const double> genome, std::uint64_t terrain_seed, bool flat = false) const;

    const WalkerParams& params() const { return _params; }

    static constexpr std::size_t n_inputs = 15;
    static constexpr std::size_t n_joints = 4;
    static std::size_t genome_size(int hidden_units) { return (n_inputs + 1) * hidden_units + (hidden_units + 1) * n_joints; }

private:
    WalkerParams _params;
    TaskDefinition _def;
};

/// Two-gene fixture: fitness is the negated Rastrigin function and the four
/// observation channels are g1, g2, g1 + g2, g1 - g2, each ramped linearly
/// over time.
class AnalyticToyTask final : public Task {
public:
    explicit AnalyticToyTask(std::size_t timepoints = 10);

    const TaskDefinition& definition() const override { return _def; }
    Evaluation evaluate(std::span<const double> genome, Rng& substream) const override;

private:
    TaskDefinition _def;
};

/// Builds a task by name ("walker" or "toy").
std::shared_ptr<const Task> make_task(const std::string& name, const TaskParams& params = {});

/// Averages consecutive non-overlapping windows of a per-step record.
ObservationMatrix window_average(const ObservationMatrix& steps, int window);

} // namespace mcaurora
