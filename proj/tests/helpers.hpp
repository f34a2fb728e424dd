#pragma once

#include <mcaurora/core.hpp>
#include <mcaurora/rng.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

namespace testing {

inline mcaurora::Solution make_solution(std::uint64_t id, double fitness, int container_id, mcaurora::FeatureVector fd,
                                        mcaurora::Genome genome = {0.0})
{
    auto ind = std::make_shared<mcaurora::Individual>();
    ind->id = id;
    ind->genome = std::move(genome);
    ind->evaluation.fitness = fitness;
    ind->evaluation.observations = mcaurora::ObservationMatrix(1, 1, fitness);
    ind->evaluation.episode_count = 1;
    mcaurora::Solution s;
    s.individual = std::move(ind);
    s.descriptors[container_id] = std::move(fd);
    return s;
}

/// Two-sided Kolmogorov-Smirnov distance between a sample and a CDF.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf)
{
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

} // namespace testing
