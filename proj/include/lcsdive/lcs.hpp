#pragma once

#include "lcsdive/data.hpp"
#include "lcsdive/relief.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lcsdive {

/// One specified feature of a rule condition. Discrete specs have lo == hi == the required value.
struct FeatureSpec {
    int feature = 0;
    bool interval = false;
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return interval ? (lo <= v && v <= hi) : v == lo; }
    friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

/// Sparse condition, kept sorted by feature index.
using RuleCondition = std::vector<FeatureSpec>;

struct Rule {
    RuleCondition condition;
    int label = 0;
    int numerosity = 1;
    std::int64_t match_count = 0;
    std::int64_t correct_count = 0;
    double accuracy = 0.0;
    double fitness = 0.0;
    double avg_match_set_size = 1.0;
    std::int64_t ga_timestamp = 0;
    std::int64_t init_timestamp = 0;

    int specificity() const { return static_cast<int>(condition.size()); }
    const FeatureSpec* find(int feature) const;
    /// Recomputes accuracy and fitness = accuracy^nu from the counters.
    void refresh(double nu);
    bool same_condition(const Rule& other) const { return label == other.label && condition == other.condition; }
};

struct Hyperparams {
    std::int64_t iterations = 200000;
    int N = 2000;
    double nu = 10.0;
    double beta = 0.1;
    double theta_GA = 25.0;
    double chi = 0.8;
    double mu = 0.04;
    double theta_del = 20.0;
    double theta_sub = 20.0;
    double acc_sub = 0.99;
    std::optional<int> rsl_override;
    std::uint64_t seed = 0;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

/// Per-instance feature tracking scores; rows follow `ids`.
struct FeatureTrackingMatrix {
    std::vector<std::string> ids;
    RowMatrixXd scores;
};

struct Model {
    std::vector<Rule> population;
    FeatureTrackingMatrix ft;
    Hyperparams hyperparams;
    std::vector<FeatureDescriptor> features;
    std::vector<std::string> class_names;
    int majority_class = 0;
    int rsl = 1;
    /// Accuracy of in-training predictions, one entry per pass over the training data.
    std::vector<double> training_log;

    std::int64_t micro_size() const;
};

/// Rule specificity limit: min(p, ceil(ln N / ln mean_state_count)), or the override.
int compute_rsl(const Dataset& train, int N, std::optional<int> rsl_override = std::nullopt);

/// A missing instance value satisfies any spec on that feature.
bool matches(const Rule& rule, const Eigen::Ref<const Eigen::RowVectorXd>& instance);

/// Widrow-Hoff move of the row toward the fitness-weighted share of [C] specifying each feature.
void ft_update(Eigen::Ref<Eigen::RowVectorXd> ft_row, const std::vector<const Rule*>& correct_set, double beta);

/// Feature sampling weights: 0.5 * expert knowledge + 0.5 * the normalized FT row (uniform when absent or zero).
std::vector<double> blend_weights(const Eigen::VectorXd& ek, const Eigen::RowVectorXd* ft_row);

Rule cover(const Eigen::Ref<const Eigen::RowVectorXd>& instance, int label, const std::vector<FeatureDescriptor>& features,
           const Eigen::VectorXd& ek, const Eigen::RowVectorXd* ft_row, int rsl, Rng& rng, std::int64_t iteration = 0);

/// True iff `general` is experienced, accurate, of the same class and strictly more general than `specific`.
bool subsumes(const Rule& general, const Rule& specific, const Hyperparams& hp);
bool more_general(const Rule& general, const Rule& specific);

/// Context shared by the discovery operators during one training run.
struct DiscoveryContext {
    const std::vector<FeatureDescriptor>& features;
    const Eigen::VectorXd& ek;
    const Hyperparams& hp;
    int rsl;
};

/**
 * One GA event on the correct set (indices into `population`): tournament parents,
 * uniform crossover, EK/FT guided mutation, then absorption, parent subsumption or insertion.
 * Every member of [C] gets its GA timestamp set to `iteration`.
 */
void run_ga(const std::vector<std::size_t>& correct_set, std::vector<Rule>& population,
            const Eigen::Ref<const Eigen::RowVectorXd>& instance, int label, const Eigen::RowVectorXd* ft_row,
            const DiscoveryContext& ctx, std::int64_t iteration, Rng& rng);

/// Roulette deletion until the micro-population is at most N.
void delete_rules(std::vector<Rule>& population, int N, const Hyperparams& hp, Rng& rng);

Model fit(const Dataset& train, const Hyperparams& hp, const FeatureWeights& ek);

struct Prediction {
    int label = 0;
    std::map<int, double> votes;
};

Prediction predict(const Model& model, const Eigen::Ref<const Eigen::RowVectorXd>& instance);
std::vector<int> predict_all(const Model& model, const RowMatrixXd& values);

/// Mean per-class recall over `n_classes` classes; every class must occur in `truth`.
double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth, int n_classes);
/// Same, over the classes present in `truth`.
double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth);

enum class CompactionStrategy { greedy_cover };

std::vector<Rule> compact(const std::vector<Rule>& population, const Dataset& train, const Hyperparams& hp,
                          CompactionStrategy strategy = CompactionStrategy::greedy_cover);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

std::string format_condition(const RuleCondition& condition, const std::vector<FeatureDescriptor>& features);
void write_rules_csv(const std::vector<Rule>& population, const std::vector<FeatureDescriptor>& features,
                     const std::vector<std::string>& class_names, const std::filesystem::path& path);
void write_ft_csv(const FeatureTrackingMatrix& ft, const std::vector<FeatureDescriptor>& features,
                  const std::filesystem::path& path);

} // namespace lcsdive
