#pragma once

#include "lcsdive/cluster.hpp"
#include "lcsdive/data.hpp"
#include "lcsdive/lcs.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lcsdive {

/// Divides each row by its maximum; all-zero rows are left as they are.
FeatureTrackingMatrix ft_normalize(const FeatureTrackingMatrix& ft);

/**
 * Averages each instance's rows across the fold matrices it appears in. Folds are combined in
 * fold-index order, so the input order does not affect the result. Rows follow `ids`.
 */
FeatureTrackingMatrix ft_merge(const std::vector<FeatureTrackingMatrix>& per_fold, const std::vector<CvSplit>& splits,
                               const std::vector<std::string>& ids);

struct AnalysisOptions {
    SignificanceOptions significance;
    bool collapse_duplicates = false;
    bool cluster_columns = true;
    /// Upper bound on the cluster counts that are cut and exported.
    int max_cut_clusters = 100;
};

/// Row and column trees, significance, cuts for c = 1..min(k_max, max_cut_clusters) and the elbow curve.
struct ClusterAnalysis {
    Dendrogram row_tree;
    Dendrogram col_tree;
    SignificanceResult significance;
    ElbowResult elbow;
    /// cuts[c - 1] holds the assignment with c clusters.
    std::vector<ClusterAssignment> cuts;

    const ClusterAssignment& cut(int c) const { return cuts.at(static_cast<std::size_t>(c - 1)); }
};

ClusterAnalysis analyze_clusters(const Eigen::MatrixXd& data, const AnalysisOptions& options);

// Exports ---------------------------------------------------------------------

void write_matrix_csv(const Eigen::MatrixXd& data, const std::string& id_header, const std::vector<std::string>& ids,
                      const std::vector<std::string>& columns, const std::filesystem::path& path);

/// Nested tree: internal nodes carry height, size and p-value (when tested); leaves carry their label.
void write_dendrogram_json(const Dendrogram& tree, const SignificanceResult& sig,
                           const std::vector<std::string>& leaf_labels, const std::filesystem::path& path);

void write_pvalues_csv(const Dendrogram& tree, const SignificanceResult& sig, const std::filesystem::path& path);

void write_assignment_csv(const ClusterAssignment& assignment, const std::string& id_header,
                          const std::vector<std::string>& ids, const std::filesystem::path& path);

void write_cluster_stats_csv(const std::vector<ClusterStats>& stats, const std::filesystem::path& path);

void write_elbow_csv(const ElbowResult& elbow, const std::filesystem::path& path);
void write_elbow_svg(const ElbowResult& elbow, const std::string& title, const std::filesystem::path& path);

struct ClustermapBand {
    std::string name;
    std::vector<std::string> labels;
};

/**
 * Heatmap with rows in row-tree leaf order and columns in column-tree leaf order (input order
 * when `col_tree` is empty), one cell per value, dendrograms along both axes and categorical
 * bands on the left.
 */
void write_clustermap_svg(const Eigen::MatrixXd& data, const Dendrogram& row_tree, const Dendrogram& col_tree,
                          const std::vector<std::string>& column_names, const std::vector<ClustermapBand>& bands,
                          const std::string& title, const std::filesystem::path& path);

} // namespace lcsdive
