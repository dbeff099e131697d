#pragma once

#include "lcsdive/common.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lcsdive {

enum class FeatureKind { discrete, continuous };

struct FeatureDescriptor {
    std::string name;
    FeatureKind kind = FeatureKind::discrete;
    /// Sorted observed values (discrete features only).
    std::vector<double> levels;
    /// Category tokens for text columns; levels[k] == k indexes into it.
    std::vector<std::string> level_names;
    double min = 0.0;
    double max = 0.0;

    double range() const { return max - min; }
    /// Number of states used for the rule specificity limit; continuous features count as 2.
    double state_count() const
    {
        return kind == FeatureKind::discrete ? static_cast<double>(levels.size()) : 2.0;
    }
    std::string value_label(double v) const;
};

/// Instance-by-feature table. Missing cells are NaN.
struct Dataset {
    std::vector<FeatureDescriptor> features;
    RowMatrixXd values;
    /// Class index per instance, into class_names.
    std::vector<int> classes;
    std::vector<std::string> class_names;
    std::vector<std::string> ids;
    std::optional<std::vector<std::string>> true_subgroups;

    Index instance_count() const { return values.rows(); }
    Index feature_count() const { return values.cols(); }
    int class_count() const { return static_cast<int>(class_names.size()); }

    /// Throws DataError when the invariants (row widths, unique ids, >= 2 classes, subgroup coverage) fail.
    void validate() const;
    /// Rows selected by index, keeping the full dataset's feature descriptors.
    Dataset subset(const std::vector<Index>& rows) const;
    std::vector<int> class_histogram() const;
    int majority_class() const;
};

inline bool is_missing(double v) { return v != v; }

/// Recomputes descriptors from a value matrix: discrete iff distinct non-missing values <= discrete_limit.
std::vector<FeatureDescriptor> describe_features(const RowMatrixXd& values,
                                                 const std::vector<std::string>& names,
                                                 int discrete_limit);

struct CsvOptions {
    std::string class_column = "Class";
    std::optional<std::string> id_column;
    std::optional<std::string> true_cluster_column;
    int discrete_limit = 10;
    std::vector<std::string> missing_tokens{"", "NA"};
};

Dataset load_dataset(const std::filesystem::path& path, const CsvOptions& options);

/// Writes features, then Class, InstanceID and (when present) TrueCluster columns.
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::vector<std::string>>>& extra_columns = {});

struct CvSplit {
    int fold_index = 0;
    std::vector<Index> train_rows;
    std::vector<Index> test_rows;
};

/// Stratified n-fold partition; deterministic for a fixed seed.
std::vector<CvSplit> cv_partition(const Dataset& ds, int n, std::uint64_t seed);

// Synthetic benchmarks -------------------------------------------------------

/// Multiplexer class: address bits A0..A(a-1) read with A0 as the most significant bit select register R[v].
int mux_class(const std::vector<int>& bits, int address_bits);

Dataset generate_mux(int address_bits, Index n_instances, std::uint64_t seed);

enum class ModelKind { univariate, xor_parity };

/// One generating model over a binary feature schema.
struct SimulationModel {
    ModelKind kind = ModelKind::univariate;
    std::vector<std::string> feature_names;
    /// Columns carrying the signal.
    std::vector<int> predictive;
    /// Univariate: penetrance gap in (0, 1]. XOR: label-noise probability in [0, 0.5).
    double strength = 1.0;
};

SimulationModel univariate_model(int n_features, double penetrance_gap);
SimulationModel xor_model(int n_features, int n_interacting, double label_noise);

/// Draws instances from a single model; true_subgroups left unset.
Dataset simulate(const SimulationModel& model, Index n_instances, std::uint64_t seed);

Dataset generate_xor(int n_features, int n_interacting, Index n_instances, double label_noise,
                     std::uint64_t seed);
Dataset generate_univariate(int n_features, Index n_instances, double penetrance_gap, std::uint64_t seed);

/// Models sharing one schema where model k's predictive features are named MkP0, MkP1, ... and the rest N0, N1, ...
std::vector<SimulationModel> heterogeneous_models(ModelKind kind, int n_models, int order, int n_features,
                                                  double strength);

/// Concatenates subgroups drawn from each model; sizes are round(proportion * n), remainder to the first.
Dataset generate_heterogeneous(const std::vector<std::pair<SimulationModel, double>>& subgenerators,
                               Index n_instances, std::uint64_t seed);

/// Heritability approximations used in place of penetrance-table simulation.
inline double xor_noise_for_heritability(double h) { return (1.0 - h) / 2.0; }
inline double penetrance_gap_for_heritability(double h) { return h; }

} // namespace lcsdive
