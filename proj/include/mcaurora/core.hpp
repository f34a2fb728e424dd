#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace mcaurora {

/// Shape or dimensionality mismatch between cooperating objects.
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required.
class InvalidEvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SelectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Bounds {
    double lo = 0.0;
    double hi = 1.0;

    double width() const { return hi - lo; }
    bool operator==(const Bounds&) const = default;
};

using Genome = std::vector<double>;
using FeatureVector = std::vector<double>;
using BinIndex = std::vector<int>;

/// Dense (channels x timepoints) matrix stored channel-major, i.e. the
/// flattened layout is channel 0 over all timepoints, then channel 1, ...
class ObservationMatrix {
public:
    ObservationMatrix() = default;
    ObservationMatrix(std::size_t channels, std::size_t timepoints, double fill = 0.0)
        : _channels(channels), _timepoints(timepoints), _data(channels * timepoints, fill) {}
    ObservationMatrix(std::size_t channels, std::size_t timepoints, std::vector<double> data);

    std::size_t channels() const { return _channels; }
    std::size_t timepoints() const { return _timepoints; }
    std::size_t size() const { return _data.size(); }

    double& at(std::size_t channel, std::size_t t) { return _data[channel * _timepoints + t]; }
    double at(std::size_t channel, std::size_t t) const { return _data[channel * _timepoints + t]; }

    std::span<const double> channel(std::size_t c) const { return {_data.data() + c * _timepoints, _timepoints}; }
    std::span<const double> flat() const { return _data; }
    std::span<double> flat() { return _data; }

    bool all_finite() const;
    bool operator==(const ObservationMatrix&) const = default;

private:
    std::size_t _channels = 0;
    std::size_t _timepoints = 0;
    std::vector<double> _data;
};

struct Evaluation {
    double fitness = 0.0;
    ObservationMatrix observations;
    int episode_count = 0;
    // set when at least one episode hit a numerical blow-up
    bool flagged = false;
};

/// Immutable part of a solution, shared between every container and the
/// depot that hold a copy of it.
struct Individual {
    std::uint64_t id = 0;
    Genome genome;
    Evaluation evaluation;
};

struct Solution {
    std::shared_ptr<const Individual> individual;
    std::map<int, FeatureVector> descriptors;
    double curiosity = 1.0;

    std::uint64_t id() const { return individual->id; }
    double fitness() const { return individual->evaluation.fitness; }
    const Genome& genome() const { return individual->genome; }
    const ObservationMatrix& observations() const { return individual->evaluation.observations; }
};

/// Bin of `fd` in a regular grid. Values at or beyond the upper bound land in
/// the last bin.
BinIndex bin_index(std::span<const double> fd, std::span<const int> shape, std::span<const Bounds> bounds);

enum class AddOutcome { AddedToEmpty, ReplacedWeaker, Rejected };

struct AddResult {
    AddOutcome outcome = AddOutcome::Rejected;
    std::size_t cell = 0;
    std::optional<Solution> evicted;

    bool accepted() const { return outcome != AddOutcome::Rejected; }
};

class DescriptorExtractor;

class GridContainer {
public:
    GridContainer(int container_id, std::vector<int> shape, std::vector<Bounds> fd_bounds,
                  std::shared_ptr<const DescriptorExtractor> extractor = nullptr);

    int id() const { return _id; }
    const std::vector<int>& shape() const { return _shape; }
    const std::vector<Bounds>& fd_bounds() const { return _bounds; }
    std::size_t dimensions() const { return _shape.size(); }
    std::size_t capacity() const { return _cells.size(); }
    std::size_t size() const { return _occupied; }
    bool empty() const { return _occupied == 0; }

    const std::shared_ptr<const DescriptorExtractor>& extractor() const { return _extractor; }
    void set_extractor(std::shared_ptr<const DescriptorExtractor> extractor) { _extractor = std::move(extractor); }

    /// Places the solution in the cell given by its descriptor for this
    /// container. Ties keep the incumbent.
    AddResult add(Solution solution);

    std::size_t flat_index(const BinIndex& bin) const;
    BinIndex unflatten(std::size_t cell) const;
    std::size_t cell_of(const FeatureVector& fd) const;

    const std::optional<Solution>& at(std::size_t cell) const { return _cells.at(cell); }
    Solution* mutable_at(std::size_t cell);

    /// Occupied cell indices in increasing order.
    std::vector<std::size_t> occupied_cells() const;

    /// Empties the container and returns its elites in cell order.
    std::vector<Solution> drain();

    template <typename F>
    void for_each(F&& f) const
    {
        for (std::size_t c = 0; c < _cells.size(); ++c)
            if (_cells[c])
                f(c, *_cells[c]);
    }

private:
    int _id;
    std::vector<int> _shape;
    std::vector<Bounds> _bounds;
    std::shared_ptr<const DescriptorExtractor> _extractor;
    std::vector<std::optional<Solution>> _cells;
    std::size_t _occupied = 0;
};

/// Append-only history of every accepted solution.
class DepotContainer {
public:
    /// Returns true when the solution was actually appended.
    bool record(const Solution& solution);

    bool contains(std::uint64_t id) const { return _ids.contains(id); }
    std::size_t size() const { return _solutions.size(); }
    const std::vector<Solution>& solutions() const { return _solutions; }
    std::size_t added_since_last_training() const { return _added_since_training; }
    void reset_training_counter() { _added_since_training = 0; }

private:
    std::vector<Solution> _solutions;
    std::unordered_set<std::uint64_t> _ids;
    std::size_t _added_since_training = 0;
};

} // namespace mcaurora
