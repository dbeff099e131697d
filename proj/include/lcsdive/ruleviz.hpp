#pragma once

#include "lcsdive/lcs.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lcsdive {

/// A trained population tagged with the fold it came from.
struct FoldPopulation {
    int fold = 0;
    std::vector<Rule> rules;
};

struct MergedRule {
    Rule rule;
    /// Folds that contributed a copy, ascending.
    std::vector<int> folds;
};

/// Union of fold populations with one entry per distinct (condition, class).
struct MergedPopulation {
    std::vector<MergedRule> rules;
    std::vector<FeatureDescriptor> features;
    std::vector<std::string> class_names;
};

/**
 * Numerosities and counts are summed; accuracy and fitness become numerosity-weighted means.
 * Output is sorted by (class, condition), so the fold order of the input does not matter.
 */
MergedPopulation merge_populations(const std::vector<FoldPopulation>& folds,
                                   const std::vector<FeatureDescriptor>& features,
                                   const std::vector<std::string>& class_names);

/// Presence/absence of each feature in each macro-rule.
struct RuleEncoding {
    Eigen::MatrixXd bits;
    std::vector<int> classes;
};

RuleEncoding encode_rules(const MergedPopulation& pop);

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Symmetric co-specification counts; the diagonal holds per-feature specification counts.
struct CoOccurrenceNetwork {
    std::vector<std::string> feature_names;
    CountMatrix counts;
    bool numerosity_weighted = false;
};

/// Each macro-rule adds 1 (or its numerosity when `numerosity_weighted`) to every specified pair.
CoOccurrenceNetwork co_occurrence(const MergedPopulation& pop, bool numerosity_weighted = false);

struct NetworkStyle {
    /// Edges with a smaller count are left out of the SVG (DOT and JSON keep every edge).
    std::int64_t edge_threshold = 1;
    /// Node diameter proportional to the count instead of its square root.
    bool linear_diameter = false;
};

/// Writes network.dot, network.json and network.svg into `dir`.
void export_network(const CoOccurrenceNetwork& net, const std::filesystem::path& dir, const NetworkStyle& style = {});

void write_merged_rules_csv(const MergedPopulation& pop, const std::filesystem::path& path);

} // namespace lcsdive
