#pragma once

#include "lcsdive/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lcsdive {

struct DendrogramNode {
    Index left = 0;
    Index right = 0;
    double height = 0.0;
    Index size = 0;
};

/// Binary merge tree. Leaves are 0..leaf_count-1; merge k creates node leaf_count + k.
struct Dendrogram {
    Index leaf_count = 0;
    std::vector<DendrogramNode> merges;

    Index root() const { return merges.empty() ? 0 : leaf_count + static_cast<Index>(merges.size()) - 1; }
    Index node_count() const { return leaf_count + static_cast<Index>(merges.size()); }
    bool is_leaf(Index id) const { return id < leaf_count; }
    const DendrogramNode& node(Index id) const { return merges[static_cast<std::size_t>(id - leaf_count)]; }
    double height(Index id) const { return is_leaf(id) ? 0.0 : node(id).height; }
    Index size(Index id) const { return is_leaf(id) ? 1 : node(id).size; }

    /// Leaves under `id`, left subtree first.
    std::vector<Index> members(Index id) const;
    std::vector<Index> leaf_order() const { return members(root()); }
    /// Parent of every node; the root maps to -1.
    std::vector<Index> parents() const;
};

/// Pairwise 1 - Pearson r between rows. Zero-variance rows sit at 0 from identical rows and 1 from everything else.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
pearson_distance_matrix(const Eigen::MatrixBase<Derived>& rows)
{
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Index m = rows.rows();
    Matrix centered = rows.colwise() - rows.rowwise().mean();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> norms = centered.rowwise().norm();
    std::vector<bool> flat(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
        flat[static_cast<std::size_t>(i)] = rows.row(i).maxCoeff() == rows.row(i).minCoeff();
        if (!flat[static_cast<std::size_t>(i)]) centered.row(i) /= norms(i);
    }
    Matrix gram = Matrix::Zero(m, m);
    gram.template selfadjointView<Eigen::Lower>().rankUpdate(centered);
    Matrix d(m, m);
    for (Index j = 0; j < m; ++j) {
        d(j, j) = Scalar(0);
        for (Index i = j + 1; i < m; ++i) {
            Scalar v;
            const bool fi = flat[static_cast<std::size_t>(i)], fj = flat[static_cast<std::size_t>(j)];
            if (fi || fj)
                v = (fi && fj && rows.row(i) == rows.row(j)) ? Scalar(0) : Scalar(1);
            else
                v = std::clamp(Scalar(1) - gram(i, j), Scalar(0), Scalar(2));
            d(i, j) = d(j, i) = v;
        }
    }
    return d;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
euclidean_distance_matrix(const Eigen::MatrixBase<Derived>& rows)
{
    using Scalar = typename Derived::Scalar;
    const Index m = rows.rows();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d(m, m);
    for (Index j = 0; j < m; ++j) {
        d(j, j) = Scalar(0);
        for (Index i = j + 1; i < m; ++i) d(i, j) = d(j, i) = (rows.row(i) - rows.row(j)).norm();
    }
    return d;
}

/**
 * Ward agglomeration through the Lance-Williams recurrence on squared distances.
 *
 * Clusters occupy slots 0..m-1; merging slots i < j stores the result in slot i.
 * The pair chosen is the lexicographically smallest (i, j) attaining the minimum.
 * `initial_sizes` seeds clusters with multiplicities (duplicates collapsed upstream); the
 * distances are then read as centroid distances and weighted into Ward costs.
 * Nearest-neighbour caches keep the typical cost near O(m^2) while reproducing
 * the exhaustive scan exactly.
 */
template <typename Derived>
Dendrogram ward_linkage(const Eigen::MatrixBase<Derived>& distances, const std::vector<Index>& initial_sizes = {})
{
    using Scalar = typename Derived::Scalar;
    const Index m = distances.rows();
    Dendrogram tree;
    tree.leaf_count = m;
    if (m < 2) return tree;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> w = distances.cwiseAbs2();
    std::vector<Index> size(static_cast<std::size_t>(m), 1);
    if (!initial_sizes.empty()) {
        size = initial_sizes;
        for (Index i = 0; i < m; ++i)
            for (Index j = i + 1; j < m; ++j) {
                const auto ni = static_cast<Scalar>(size[static_cast<std::size_t>(i)]);
                const auto nj = static_cast<Scalar>(size[static_cast<std::size_t>(j)]);
                w(i, j) = w(j, i) = w(i, j) * Scalar(2) * ni * nj / (ni + nj);
            }
    }
    std::vector<Index> node_id(static_cast<std::size_t>(m));
    std::vector<bool> active(static_cast<std::size_t>(m), true);
    std::vector<Index> nn(static_cast<std::size_t>(m), -1);
    std::vector<Scalar> nnd(static_cast<std::size_t>(m), std::numeric_limits<Scalar>::infinity());
    for (Index i = 0; i < m; ++i) node_id[static_cast<std::size_t>(i)] = i;

    auto rescan = [&](Index i) {
        Index best = -1;
        Scalar best_d = std::numeric_limits<Scalar>::infinity();
        for (Index j = i + 1; j < m; ++j) {
            if (!active[static_cast<std::size_t>(j)]) continue;
            if (best < 0 || w(i, j) < best_d) {
                best = j;
                best_d = w(i, j);
            }
        }
        nn[static_cast<std::size_t>(i)] = best;
        nnd[static_cast<std::size_t>(i)] = best_d;
    };
    for (Index i = 0; i < m; ++i) rescan(i);

    tree.merges.reserve(static_cast<std::size_t>(m - 1));
    for (Index step = 0; step < m - 1; ++step) {
        Index i = -1;
        for (Index k = 0; k < m; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            if (!active[ks] || nn[ks] < 0) continue;
            if (i < 0 || nnd[ks] < nnd[static_cast<std::size_t>(i)]) i = k;
        }
        const auto is = static_cast<std::size_t>(i);
        const Index j = nn[is];
        const auto js = static_cast<std::size_t>(j);
        const Scalar dij = w(i, j);

        DendrogramNode merged;
        merged.left = node_id[is];
        merged.right = node_id[js];
        merged.height = std::sqrt(static_cast<double>(std::max(dij, Scalar(0))));
        merged.size = size[is] + size[js];
        tree.merges.push_back(merged);

        const auto ni = static_cast<Scalar>(size[is]);
        const auto nj = static_cast<Scalar>(size[js]);
        for (Index k = 0; k < m; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            if (!active[ks] || k == i || k == j) continue;
            const auto nk = static_cast<Scalar>(size[ks]);
            Scalar v = ((ni + nk) * w(k, i) + (nj + nk) * w(k, j) - nk * dij) / (ni + nj + nk);
            if (v < Scalar(0)) v = Scalar(0);
            w(k, i) = w(i, k) = v;
        }
        size[is] += size[js];
        active[js] = false;
        node_id[is] = m + step;

        rescan(i);
        for (Index k = 0; k < m; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            if (!active[ks] || k == i) continue;
            if (nn[ks] == i || nn[ks] == j) {
                rescan(k);
            } else if (k < i && (w(k, i) < nnd[ks] || (w(k, i) == nnd[ks] && i < nn[ks]))) {
                nn[ks] = i;
                nnd[ks] = w(k, i);
            }
        }
    }
    return tree;
}

enum class Metric { pearson, euclidean };

Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& rows, Metric metric);

/// Pearson/Euclidean + Ward on the rows. With `collapse_duplicates`, identical rows are
/// clustered once with multiplicity and expanded back into zero-height chains.
Dendrogram cluster_rows(const Eigen::MatrixXd& rows, Metric metric, bool collapse_duplicates = false);

/// Within-split sum of squares over total sum of squares for a two-group partition.
double cluster_index(const Eigen::MatrixXd& data, const std::vector<Index>& a, const std::vector<Index>& b);

/// Covariance of the Gaussian null fitted to a node: full sample covariance or its diagonal.
enum class NullCovariance { full, diagonal };

struct SignificanceOptions {
    double alpha = 0.05;
    int n_sim = 100;
    Index min_leaf = 5;
    /// Null datasets are drawn with min(node size, max_null_size) rows.
    Index max_null_size = 2000;
    Metric metric = Metric::pearson;
    NullCovariance null_covariance = NullCovariance::full;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct SignificanceResult {
    /// One entry per internal node (index = node id - leaf_count); unset when the node was not tested.
    std::vector<std::optional<double>> p_values;
    /// Terminal clusters (node ids) in leaf order.
    std::vector<Index> terminal;
    double alpha = 0.05;
    int n_sim = 0;
    Index k_max = 1;
};

/**
 * Top-down Monte-Carlo test of each split. At a node with at least 2 * min_leaf members the
 * observed cluster index of its split is compared with n_sim null datasets drawn from a
 * Gaussian fitted to the node's rows and clustered the same way;
 * p = (1 + #{null <= observed}) / (n_sim + 1). Significant nodes are descended into,
 * the rest become terminal clusters.
 */
SignificanceResult significance_test(const Dendrogram& tree, const Eigen::MatrixXd& data,
                                     const SignificanceOptions& options);

struct ClusterAssignment {
    int count = 0;
    /// Label per item in [0, count), numbered by first appearance in dendrogram leaf order.
    std::vector<int> labels;
};

/// Merges sibling terminal clusters, lowest parent first, until `c` clusters remain.
ClusterAssignment cut_clusters(const Dendrogram& tree, const SignificanceResult& sig, int c);

/// Sum of squared Euclidean distances from each row to its cluster mean.
double distortion(const Eigen::MatrixXd& data, const ClusterAssignment& assignment);

struct ElbowResult {
    std::vector<std::pair<int, double>> curve;
    int recommended = 1;
};

/// Elbow by shearing the curve so its end points are level; the lowest point wins, smallest c on ties.
int elbow_recommend(const std::vector<std::pair<int, double>>& curve);

struct ClusterStats {
    int label = 0;
    Index size = 0;
    Index correct = 0;
    double accuracy = 0.0;
    std::map<std::string, Index> class_counts;
    std::map<std::string, Index> subgroup_counts;
};

std::vector<ClusterStats> within_cluster_stats(const ClusterAssignment& assignment, const std::vector<bool>& correct,
                                               const std::vector<std::string>& class_labels,
                                               const std::vector<std::string>* true_subgroups = nullptr);

} // namespace lcsdive
