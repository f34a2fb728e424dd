#include <mcaurora/core.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcaurora {

ObservationMatrix::ObservationMatrix(std::size_t channels, std::size_t timepoints, std::vector<double> data)
    : _channels(channels), _timepoints(timepoints), _data(std::move(data))
{
    if (_data.size() != channels * timepoints)
        throw StructuralError("observation data size does not match channels x timepoints");
}

bool ObservationMatrix::all_finite() const
{
    return std::all_of(_data.begin(), _data.end(), [](double v) { return std::isfinite(v); });
}

BinIndex bin_index(std::span<const double> fd, std::span<const int> shape, std::span<const Bounds> bounds)
{
    if (fd.size() != shape.size() || bounds.size() != shape.size())
        throw StructuralError("descriptor dimensionality " + std::to_string(fd.size()) + " does not match grid dimensionality "
                              + std::to_string(shape.size()));
    BinIndex bin(shape.size());
    for (std::size_t k = 0; k < shape.size(); ++k) {
        if (!std::isfinite(fd[k]))
            throw InvalidEvaluationError("non-finite descriptor component");
        if (!(bounds[k].hi > bounds[k].lo))
            throw StructuralError("degenerate descriptor bounds");
        const double scaled = (fd[k] - bounds[k].lo) / bounds[k].width() * shape[k];
        const double b = std::floor(scaled);
        bin[k] = static_cast<int>(std::clamp(b, 0.0, static_cast<double>(shape[k] - 1)));
    }
    return bin;
}

GridContainer::GridContainer(int container_id, std::vector<int> shape, std::vector<Bounds> fd_bounds,
                             std::shared_ptr<const DescriptorExtractor> extractor)
    : _id(container_id), _shape(std::move(shape)), _bounds(std::move(fd_bounds)), _extractor(std::move(extractor))
{
    if (_shape.empty() || _shape.size() != _bounds.size())
        throw StructuralError("grid shape and bounds must have the same non-zero dimensionality");
    std::size_t cap = 1;
    for (int s : _shape) {
        if (s <= 0)
            throw StructuralError("grid shape entries must be positive");
        cap *= static_cast<std::size_t>(s);
    }
    _cells.resize(cap);
}

std::size_t GridContainer::flat_index(const BinIndex& bin) const
{
    std::size_t idx = 0;
    for (std::size_t k = 0; k < _shape.size(); ++k)
        idx = idx * static_cast<std::size_t>(_shape[k]) + static_cast<std::size_t>(bin[k]);
    return idx;
}

BinIndex GridContainer::unflatten(std::size_t cell) const
{
    BinIndex bin(_shape.size());
    for (std::size_t k = _shape.size(); k-- > 0;) {
        bin[k] = static_cast<int>(cell % static_cast<std::size_t>(_shape[k]));
        cell /= static_cast<std::size_t>(_shape[k]);
    }
    return bin;
}

std::size_t GridContainer::cell_of(const FeatureVector& fd) const
{
    return flat_index(bin_index(fd, _shape, _bounds));
}

AddResult GridContainer::add(Solution solution)
{
    auto it = solution.descriptors.find(_id);
    if (it == solution.descriptors.end())
        throw StructuralError("solution has no descriptor for container " + std::to_string(_id));
    AddResult result;
    result.cell = cell_of(it->second);
    auto& slot = _cells[result.cell];
    if (!slot) {
        slot = std::move(solution);
        ++_occupied;
        result.outcome = AddOutcome::AddedToEmpty;
    }
    else if (solution.fitness() > slot->fitness()) {
        result.evicted = std::move(*slot);
        slot = std::move(solution);
        result.outcome = AddOutcome::ReplacedWeaker;
    }
    else {
        result.outcome = AddOutcome::Rejected;
    }
    return result;
}

Solution* GridContainer::mutable_at(std::size_t cell)
{
    auto& slot = _cells.at(cell);
    return slot ? &*slot : nullptr;
}

std::vector<std::size_t> GridContainer::occupied_cells() const
{
    std::vector<std::size_t> out;
    out.reserve(_occupied);
    for (std::size_t c = 0; c < _cells.size(); ++c)
        if (_cells[c])
            out.push_back(c);
    return out;
}

std::vector<Solution> GridContainer::drain()
{
    std::vector<Solution> out;
    out.reserve(_occupied);
    for (auto& slot : _cells) {
        if (slot) {
            out.push_back(std::move(*slot));
            slot.reset();
        }
    }
    _occupied = 0;
    return out;
}

bool DepotContainer::record(const Solution& solution)
{
    if (!_ids.insert(solution.id()).second)
        return false;
    _solutions.push_back(solution);
    ++_added_since_training;
    return true;
}

} // namespace mcaurora
