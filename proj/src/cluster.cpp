#include "lcsdive/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/Eigenvalues>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

namespace lcsdive {

std::vector<Index> Dendrogram::members(Index id) const
{
    std::vector<Index> out;
    std::vector<Index> stack{id};
    while (!stack.empty()) {
        const Index n = stack.back();
        stack.pop_back();
        if (is_leaf(n)) {
            out.push_back(n);
            continue;
        }
        stack.push_back(node(n).right);
        stack.push_back(node(n).left);
    }
    return out;
}

std::vector<Index> Dendrogram::parents() const
{
    std::vector<Index> parent(static_cast<std::size_t>(node_count()), -1);
    for (std::size_t k = 0; k < merges.size(); ++k) {
        const Index id = leaf_count + static_cast<Index>(k);
        parent[static_cast<std::size_t>(merges[k].left)] = id;
        parent[static_cast<std::size_t>(merges[k].right)] = id;
    }
    return parent;
}

Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& rows, Metric metric)
{
    return metric == Metric::pearson ? pearson_distance_matrix(rows) : euclidean_distance_matrix(rows);
}

Dendrogram cluster_rows(const Eigen::MatrixXd& rows, Metric metric, bool collapse_duplicates)
{
    const Index m = rows.rows();
    if (!collapse_duplicates || m < 3) return ward_linkage(distance_matrix(rows, metric));

    // group identical rows, keyed by their exact values, in order of first appearance
    std::map<std::vector<double>, Index> seen;
    std::vector<std::vector<Index>> groups;
    for (Index i = 0; i < m; ++i) {
        std::vector<double> key(rows.row(i).begin(), rows.row(i).end());
        auto [it, inserted] = seen.emplace(std::move(key), static_cast<Index>(groups.size()));
        if (inserted) groups.emplace_back();
        groups[static_cast<std::size_t>(it->second)].push_back(i);
    }
    const auto u = static_cast<Index>(groups.size());
    if (u == m) return ward_linkage(distance_matrix(rows, metric));

    Eigen::MatrixXd unique_rows(u, rows.cols());
    std::vector<Index> sizes;
    for (Index g = 0; g < u; ++g) {
        unique_rows.row(g) = rows.row(groups[static_cast<std::size_t>(g)].front());
        sizes.push_back(static_cast<Index>(groups[static_cast<std::size_t>(g)].size()));
    }

    Dendrogram tree;
    tree.leaf_count = m;
    std::vector<Index> group_node(static_cast<std::size_t>(u));
    for (Index g = 0; g < u; ++g) {
        const auto& members = groups[static_cast<std::size_t>(g)];
        Index current = members.front();
        for (std::size_t k = 1; k < members.size(); ++k) {
            DendrogramNode n;
            n.left = current;
            n.right = members[k];
            n.height = 0.0;
            n.size = static_cast<Index>(k + 1);
            tree.merges.push_back(n);
            current = m + static_cast<Index>(tree.merges.size()) - 1;
        }
        group_node[static_cast<std::size_t>(g)] = current;
    }
    if (u == 1) return tree;

    const Dendrogram top = ward_linkage(distance_matrix(unique_rows, metric), sizes);
    const Index offset = m + static_cast<Index>(tree.merges.size());
    auto remap = [&](Index id) { return id < u ? group_node[static_cast<std::size_t>(id)] : offset + (id - u); };
    for (const auto& n : top.merges) {
        DendrogramNode copy = n;
        copy.left = remap(n.left);
        copy.right = remap(n.right);
        tree.merges.push_back(copy);
    }
    return tree;
}

double cluster_index(const Eigen::MatrixXd& data, const std::vector<Index>& a, const std::vector<Index>& b)
{
    auto scatter = [&](const std::vector<Index>& rows, Eigen::RowVectorXd& mean) {
        mean = Eigen::RowVectorXd::Zero(data.cols());
        for (Index r : rows) mean += data.row(r);
        mean /= static_cast<double>(rows.size());
        double ss = 0.0;
        for (Index r : rows) ss += (data.row(r) - mean).squaredNorm();
        return ss;
    };
    Eigen::RowVectorXd ma, mb, mt;
    const double within = scatter(a, ma) + scatter(b, mb);
    std::vector<Index> all = a;
    all.insert(all.end(), b.begin(), b.end());
    const double total = scatter(all, mt);
    if (!(total > 0.0)) return 1.0;
    return within / total;
}

namespace {

/// Box-Muller over the local uniform generator so null draws do not depend on the standard library.
double standard_normal(Rng& rng)
{
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double null_statistic(const Eigen::RowVectorXd& mean, const Eigen::MatrixXd& factor, Index rows, Metric metric,
                      std::uint64_t seed)
{
    Rng rng(seed);
    Eigen::MatrixXd z(rows, mean.size());
    for (Index i = 0; i < rows; ++i)
        for (Index f = 0; f < mean.size(); ++f) z(i, f) = standard_normal(rng);
    Eigen::MatrixXd sample = (z * factor.transpose()).rowwise() + mean;
    const Dendrogram tree = cluster_rows(sample, metric);
    const auto& root = tree.node(tree.root());
    return cluster_index(sample, tree.members(root.left), tree.members(root.right));
}

} // namespace

SignificanceResult significance_test(const Dendrogram& tree, const Eigen::MatrixXd& data,
                                     const SignificanceOptions& options)
{
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ConfigError("significance: alpha must be in (0, 1)");
    if (options.n_sim < 20) throw ConfigError("significance: n_sim must be at least 20");
    if (data.rows() != tree.leaf_count) throw ConfigError("significance: data rows do not match dendrogram leaves");

    SignificanceResult result;
    result.alpha = options.alpha;
    result.n_sim = options.n_sim;
    result.p_values.assign(tree.merges.size(), std::nullopt);

    std::vector<Index> pending{tree.root()};
    std::set<Index> terminal;
    while (!pending.empty()) {
        const Index id = pending.back();
        pending.pop_back();
        if (tree.is_leaf(id) || tree.size(id) < 2 * options.min_leaf) {
            terminal.insert(id);
            continue;
        }
        const auto& node = tree.node(id);
        const auto members = tree.members(id);
        const double observed = cluster_index(data, tree.members(node.left), tree.members(node.right));

        Eigen::MatrixXd rows(static_cast<Index>(members.size()), data.cols());
        for (std::size_t k = 0; k < members.size(); ++k) rows.row(static_cast<Index>(k)) = data.row(members[k]);
        const Eigen::RowVectorXd mean = rows.colwise().mean();
        const Eigen::RowVectorXd sd =
            ((rows.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(rows.rows() - 1)).cwiseSqrt();

        double p = 1.0;
        Eigen::MatrixXd factor = sd.asDiagonal();
        if (options.null_covariance == NullCovariance::full) {
            const Eigen::MatrixXd centered = rows.rowwise() - mean;
            const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
            factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        }
        if (sd.maxCoeff() > 0.0) {
            const Index null_rows = std::min<Index>(rows.rows(), options.max_null_size);
            std::vector<double> stats(static_cast<std::size_t>(options.n_sim));
            parallel_for(options.n_sim, options.workers, [&](Index s) {
                stats[static_cast<std::size_t>(s)] =
                    null_statistic(mean, factor, null_rows, options.metric,
                                   derive_seed(options.seed, static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(s)));
            });
            const auto extreme = std::count_if(stats.begin(), stats.end(), [&](double v) { return v <= observed; });
            p = (1.0 + static_cast<double>(extreme)) / (options.n_sim + 1.0);
        }
        result.p_values[static_cast<std::size_t>(id - tree.leaf_count)] = p;
        if (p < options.alpha) {
            pending.push_back(node.right);
            pending.push_back(node.left);
        } else {
            terminal.insert(id);
        }
    }

    // order terminal clusters by their position in the leaf order
    std::vector<Index> position(static_cast<std::size_t>(tree.leaf_count));
    const auto order = tree.leaf_order();
    for (std::size_t k = 0; k < order.size(); ++k) position[static_cast<std::size_t>(order[k])] = static_cast<Index>(k);
    result.terminal.assign(terminal.begin(), terminal.end());
    std::sort(result.terminal.begin(), result.terminal.end(), [&](Index a, Index b) {
        return position[static_cast<std::size_t>(tree.members(a).front())] <
               position[static_cast<std::size_t>(tree.members(b).front())];
    });
    result.k_max = static_cast<Index>(result.terminal.size());
    return result;
}

ClusterAssignment cut_clusters(const Dendrogram& tree, const SignificanceResult& sig, int c)
{
    if (c < 1 || c > sig.k_max)
        throw ConfigError("cut_clusters: cluster count " + std::to_string(c) + " outside [1, " +
                          std::to_string(sig.k_max) + "]");
    const auto parent = tree.parents();
    std::vector<Index> position(static_cast<std::size_t>(tree.leaf_count));
    const auto order = tree.leaf_order();
    for (std::size_t k = 0; k < order.size(); ++k) position[static_cast<std::size_t>(order[k])] = static_cast<Index>(k);
    auto first_leaf = [&](Index id) {
        while (!tree.is_leaf(id)) id = tree.node(id).left;
        return position[static_cast<std::size_t>(id)];
    };

    std::set<Index> current(sig.terminal.begin(), sig.terminal.end());
    while (static_cast<int>(current.size()) > c) {
        Index best = -1;
        for (Index id : current) {
            const Index up = parent[static_cast<std::size_t>(id)];
            if (up < 0) continue;
            const auto& n = tree.node(up);
            if (!current.count(n.left) || !current.count(n.right)) continue;
            if (best < 0 || n.height < tree.node(best).height ||
                (n.height == tree.node(best).height && first_leaf(up) < first_leaf(best)))
                best = up;
        }
        if (best < 0) throw std::logic_error("cut_clusters: terminal clusters do not form a cut of the tree");
        current.erase(tree.node(best).left);
        current.erase(tree.node(best).right);
        current.insert(best);
    }

    ClusterAssignment out;
    out.count = c;
    out.labels.assign(static_cast<std::size_t>(tree.leaf_count), -1);
    std::vector<Index> ordered(current.begin(), current.end());
    std::sort(ordered.begin(), ordered.end(), [&](Index a, Index b) { return first_leaf(a) < first_leaf(b); });
    for (std::size_t label = 0; label < ordered.size(); ++label)
        for (Index leaf : tree.members(ordered[label])) out.labels[static_cast<std::size_t>(leaf)] = static_cast<int>(label);
    return out;
}

double distortion(const Eigen::MatrixXd& data, const ClusterAssignment& assignment)
{
    if (static_cast<Index>(assignment.labels.size()) != data.rows())
        throw ConfigError("distortion: assignment does not cover every row");
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(assignment.count, data.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(assignment.count);
    for (Index i = 0; i < data.rows(); ++i) {
        const int l = assignment.labels[static_cast<std::size_t>(i)];
        sums.row(l) += data.row(i);
        counts(l) += 1.0;
    }
    for (Index l = 0; l < assignment.count; ++l)
        if (counts(l) > 0.0) sums.row(l) /= counts(l);
    double total = 0.0;
    for (Index i = 0; i < data.rows(); ++i)
        total += (data.row(i) - sums.row(assignment.labels[static_cast<std::size_t>(i)])).squaredNorm();
    return total;
}

int elbow_recommend(const std::vector<std::pair<int, double>>& curve)
{
    if (curve.empty()) throw ConfigError("elbow: empty curve");
    if (curve.size() == 1) return curve.front().first;
    const auto [c0, d0] = curve.front();
    const auto [c1, d1] = curve.back();
    const double slope = (d1 - d0) / static_cast<double>(c1 - c0);
    int best = c0;
    double best_y = d0;
    for (const auto& [c, d] : curve) {
        const double y = d - slope * static_cast<double>(c - c0);
        if (y < best_y) {
            best_y = y;
            best = c;
        }
    }
    return best;
}

std::vector<ClusterStats> within_cluster_stats(const ClusterAssignment& assignment, const std::vector<bool>& correct,
                                               const std::vector<std::string>& class_labels,
                                               const std::vector<std::string>* true_subgroups)
{
    std::vector<ClusterStats> out(static_cast<std::size_t>(assignment.count));
    for (int l = 0; l < assignment.count; ++l) out[static_cast<std::size_t>(l)].label = l;
    for (std::size_t i = 0; i < assignment.labels.size(); ++i) {
        auto& s = out[static_cast<std::size_t>(assignment.labels[i])];
        ++s.size;
        if (correct[i]) ++s.correct;
        ++s.class_counts[class_labels[i]];
        if (true_subgroups) ++s.subgroup_counts[(*true_subgroups)[i]];
    }
    for (auto& s : out) s.accuracy = s.size > 0 ? static_cast<double>(s.correct) / static_cast<double>(s.size) : 0.0;
    return out;
}

} // namespace lcsdive
