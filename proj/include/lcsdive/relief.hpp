#pragma once

#include "lcsdive/data.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

namespace lcsdive {

/// Feature importance aligned to dataset feature order.
struct FeatureWeights {
    Eigen::VectorXd scores;
    /// Non-negative, sums to 1 once normalize_weights has run.
    Eigen::VectorXd normalized;
};

/// Per-feature difference between two instances: discrete 0/1, continuous |a-b| / range, missing 1.
double feature_difference(const FeatureDescriptor& feature, double a, double b);

/**
 * MultiSURF feature scoring.
 *
 * Each target's neighbours are the instances closer than mean - stddev/2 of its
 * distance distribution. Near hits lower a feature's score by its difference,
 * near misses raise it by the difference weighted with P(miss class) / (1 - P(target class)).
 * When `subsample` is set, that many targets are drawn without replacement; every
 * instance remains a candidate neighbour.
 */
FeatureWeights multisurf(const Dataset& train, std::optional<Index> subsample = std::nullopt,
                         std::uint64_t seed = 0, int workers = 1);

/// Min-max scales the raw scores to [0, 1] and rescales them to sum to 1.
FeatureWeights normalize_weights(FeatureWeights w);

void write_weights_csv(const FeatureWeights& w, const Dataset& ds, const std::filesystem::path& path);

} // namespace lcsdive
