#pragma once

#include "lcsdive/cluster.hpp"
#include "lcsdive/data.hpp"
#include "lcsdive/lcs.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lcsdive {

/// Synthetic data source; `kind` is mux, xor, univariate or hetero.
struct GeneratorSpec {
    std::string kind = "mux";
    Index instances = 1000;
    std::optional<std::uint64_t> seed;
    int address_bits = 3;
    int features = 20;
    int interacting = 2;
    double label_noise = 0.0;
    double penetrance_gap = 1.0;
    /// Overrides label_noise / penetrance_gap through the heritability approximations.
    std::optional<double> heritability;
    // hetero
    std::string model = "univariate";
    int models = 2;
    int order = 1;
    std::vector<double> proportions{0.5, 0.5};
};

struct PipelineConfig {
    std::optional<std::filesystem::path> dataset_path;
    CsvOptions csv;
    std::optional<GeneratorSpec> generator;

    int n_folds = 10;
    Hyperparams lcs;
    std::optional<Index> multisurf_subsample;

    SignificanceOptions significance;
    int max_cut_clusters = 100;

    bool compaction = false;
    /// Distance used to cluster binary rule encodings.
    Metric rule_metric = Metric::pearson;
    bool network_numerosity_weighted = false;
    bool network_linear_diameter = false;
    std::int64_t network_edge_threshold = 1;

    std::vector<int> phases{1, 2, 3, 4};
    std::filesystem::path output_dir = "lcsdive_out";
    int workers = 1;
    std::uint64_t seed = 0;

    /// Throws ConfigError when a field is out of range or the phase list is not a contiguous run.
    void validate() const;
};

/// All keys optional; unknown keys and wrongly typed values raise ConfigError.
PipelineConfig config_from_json(const nlohmann::json& doc);
PipelineConfig load_config(const std::filesystem::path& path);
/// Settings that determine the outputs (worker count and output directory excluded).
nlohmann::ordered_json config_to_json(const PipelineConfig& config);

Dataset generate(const GeneratorSpec& spec, std::uint64_t seed);

/**
 * Runs the requested phases into config.output_dir. Phase p > 1 reads the files written by
 * phase p - 1 and fails with DataError naming any that are missing. Finishes by writing
 * run_summary.json (deterministic) and timings.json (wall clock).
 */
nlohmann::ordered_json run_pipeline(const PipelineConfig& config, std::ostream* log = nullptr);

/// Console summary of a finished run; DataError when run_summary.json is absent.
void report(const std::filesystem::path& output_dir, std::ostream& out);

} // namespace lcsdive
