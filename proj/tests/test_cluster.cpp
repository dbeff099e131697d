#include "lcsdive/cluster.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

using namespace lcsdive;

namespace {

Eigen::MatrixXd random_distances(Index m, Rng& rng)
{
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
    for (Index i = 0; i < m; ++i)
        for (Index j = i + 1; j < m; ++j) d(i, j) = d(j, i) = uniform(rng, 0.01, 2.0);
    return d;
}

Eigen::MatrixXd gaussian(Index m, Index p, Rng& rng)
{
    std::normal_distribution<double> n;
    Eigen::MatrixXd x(m, p);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < p; ++j) x(i, j) = n(rng);
    return x;
}

void check_same_tree(const Dendrogram& a, const Dendrogram& b, double tol)
{
    REQUIRE(a.merges.size() == b.merges.size());
    for (std::size_t k = 0; k < a.merges.size(); ++k) {
        CHECK(a.merges[k].left == b.merges[k].left);
        CHECK(a.merges[k].right == b.merges[k].right);
        CHECK(a.merges[k].size == b.merges[k].size);
        CHECK(std::abs(a.merges[k].height - b.merges[k].height) < tol);
    }
}

/// Ward merge cost from centroids: sqrt(2 na nb / (na + nb)) * |ca - cb|.
double centroid_height(const Eigen::MatrixXd& x, const std::vector<Index>& a, const std::vector<Index>& b)
{
    Eigen::RowVectorXd ca = Eigen::RowVectorXd::Zero(x.cols()), cb = ca;
    for (Index i : a) ca += x.row(i);
    for (Index i : b) cb += x.row(i);
    ca /= static_cast<double>(a.size());
    cb /= static_cast<double>(b.size());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    return std::sqrt(2.0 * na * nb / (na + nb)) * (ca - cb).norm();
}

} // namespace

TEST_CASE("ward_linkage matches the exhaustive Lance-Williams agglomeration")
{
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const auto d = random_distances(8, rng);
        check_same_tree(ward_linkage(d), oracle::ward(d), 1e-9);
    }
    for (int trial = 0; trial < 20; ++trial) {
        const auto d = random_distances(60, rng);
        check_same_tree(ward_linkage(d), oracle::ward(d), 1e-9);
    }
}

TEST_CASE("ward_linkage breaks ties on the lexicographically first pair")
{
    Eigen::MatrixXd d = Eigen::MatrixXd::Ones(5, 5);
    d.diagonal().setZero();
    check_same_tree(ward_linkage(d), oracle::ward(d), 1e-12);
    const auto t = ward_linkage(d);
    CHECK(t.merges[0].left == 0);
    CHECK(t.merges[0].right == 1);
}

TEST_CASE("ward heights on Euclidean points equal the centroid merge cost")
{
    Rng rng(2);
    const auto x = gaussian(30, 3, rng);
    const auto tree = ward_linkage(euclidean_distance_matrix(x));
    double last = 0.0;
    for (std::size_t k = 0; k < tree.merges.size(); ++k) {
        const auto& n = tree.merges[k];
        CHECK(n.height == doctest::Approx(centroid_height(x, tree.members(n.left), tree.members(n.right))));
        CHECK(n.height >= last - 1e-12);
        last = n.height;
    }
}

TEST_CASE("pearson distance properties")
{
    Eigen::MatrixXd x(4, 3);
    x << 1, 2, 3,   //
        2, 4, 6,    //
        3, 2, 1,    //
        5, 5, 5;
    const auto d = pearson_distance_matrix(x);
    CHECK(d(0, 1) == doctest::Approx(0.0));
    CHECK(d(0, 2) == doctest::Approx(2.0));
    CHECK(d(0, 3) == 1.0);
    CHECK(d.isApprox(d.transpose()));
    CHECK(d.diagonal().isZero());
}

TEST_CASE("collapsing duplicate rows reproduces the plain tree's partitions")
{
    Rng rng(8);
    Eigen::MatrixXd base = gaussian(12, 4, rng);
    Eigen::MatrixXd rows(30, 4);
    for (Index i = 0; i < 30; ++i) rows.row(i) = base.row(uniform_int(rng, 0, 11));
    const auto collapsed = cluster_rows(rows, Metric::euclidean, true);
    CHECK(collapsed.merges.size() == 29);
    CHECK(collapsed.leaf_order().size() == 30);
    // merge heights above zero agree with clustering the distinct rows with multiplicities
    std::vector<double> plain, folded;
    for (const auto& n : cluster_rows(rows, Metric::euclidean, false).merges)
        if (n.height > 1e-9) plain.push_back(n.height);
    for (const auto& n : collapsed.merges)
        if (n.height > 1e-9) folded.push_back(n.height);
    REQUIRE(plain.size() == folded.size());
    for (std::size_t k = 0; k < plain.size(); ++k) CHECK(plain[k] == doctest::Approx(folded[k]));
}

TEST_CASE("cluster_index is within over total scatter")
{
    Eigen::MatrixXd x(4, 1);
    x << 0, 1, 10, 11;
    CHECK(cluster_index(x, {0, 1}, {2, 3}) == doctest::Approx(1.0 / 101.0));
    CHECK(cluster_index(x, {0, 2}, {1, 3}) == doctest::Approx(100.0 / 101.0));
}

TEST_CASE("elbow recommendation")
{
    CHECK(elbow_recommend({{1, 10}, {2, 2}, {3, 1.5}, {4, 1.4}}) == 2);
    CHECK(elbow_recommend({{1, 4}, {2, 3}, {3, 2}, {4, 1}}) == 1);
    CHECK(elbow_recommend({{1, 5}}) == 1);
    CHECK_THROWS_AS(elbow_recommend({}), ConfigError);
}

TEST_CASE("significance separates well separated groups and keeps noise together")
{
    Rng rng(4);
    Eigen::MatrixXd two = gaussian(120, 5, rng);
    two.topRows(60).col(0).array() += 10.0;
    SignificanceOptions opt;
    opt.n_sim = 40;
    opt.metric = Metric::euclidean;
    const auto tree = cluster_rows(two, opt.metric);
    const auto sig = significance_test(tree, two, opt);
    CHECK(sig.k_max >= 2);
    REQUIRE(sig.p_values.back());
    CHECK(*sig.p_values.back() <= opt.alpha);

    // every p-value is one of the attainable Monte-Carlo values
    for (const auto& p : sig.p_values)
        if (p) CHECK(std::abs(*p * (opt.n_sim + 1) - std::round(*p * (opt.n_sim + 1))) < 1e-9);

    // terminal clusters partition the leaves
    std::vector<int> seen(120, 0);
    for (Index t : sig.terminal)
        for (Index leaf : tree.members(t)) ++seen[static_cast<std::size_t>(leaf)];
    CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));

    opt.workers = 3;
    const auto par = significance_test(tree, two, opt);
    CHECK(par.terminal == sig.terminal);
    CHECK(par.p_values == sig.p_values);
}

TEST_CASE("pearson significance splits rows with opposite profiles")
{
    Rng rng(9);
    Eigen::MatrixXd x = 0.2 * gaussian(80, 6, rng);
    for (Index i = 0; i < 80; ++i)
        for (Index j = 0; j < 6; ++j) x(i, j) += (i < 40) == (j < 3) ? 1.0 : 0.0;
    SignificanceOptions opt;
    opt.n_sim = 30;
    const auto sig = significance_test(cluster_rows(x, Metric::pearson), x, opt);
    CHECK(sig.k_max >= 2);
}

TEST_CASE("significance honours min_leaf and constant data")
{
    Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(20, 3);
    flat.col(1).setConstant(2.0);
    SignificanceOptions opt;
    const auto tree = cluster_rows(flat, Metric::euclidean);
    const auto sig = significance_test(tree, flat, opt);
    CHECK(sig.k_max == 1);

    Rng rng(1);
    const auto small = gaussian(9, 3, rng);
    const auto st = cluster_rows(small, Metric::pearson);
    CHECK(significance_test(st, small, opt).k_max == 1);
    opt.n_sim = 5;
    CHECK_THROWS_AS(significance_test(st, small, opt), ConfigError);
}

TEST_CASE("cut_clusters merges the lowest sibling pair and labels in leaf order")
{
    Rng rng(6);
    Eigen::MatrixXd x = gaussian(90, 4, rng);
    x.topRows(30).col(0).array() += 12.0;
    x.middleRows(30, 30).col(1).array() += 12.0;
    SignificanceOptions opt;
    opt.n_sim = 30;
    opt.metric = Metric::euclidean;
    const auto tree = cluster_rows(x, opt.metric);
    const auto sig = significance_test(tree, x, opt);
    REQUIRE(sig.k_max >= 3);
    double previous = -1.0;
    for (int c = static_cast<int>(sig.k_max); c >= 1; --c) {
        const auto a = cut_clusters(tree, sig, c);
        CHECK(a.count == c);
        std::set<int> labels(a.labels.begin(), a.labels.end());
        CHECK(static_cast<int>(labels.size()) == c);
        // labels appear in increasing order along the leaf order
        int next = 0;
        for (Index leaf : tree.leaf_order()) {
            const int l = a.labels[static_cast<std::size_t>(leaf)];
            CHECK(l <= next);
            if (l == next) ++next;
        }
        const double dist = distortion(x, a);
        CHECK(dist >= previous - 1e-9);
        previous = dist;
    }
    CHECK_THROWS_AS(cut_clusters(tree, sig, 0), ConfigError);
    CHECK_THROWS_AS(cut_clusters(tree, sig, static_cast<int>(sig.k_max) + 1), ConfigError);
}

TEST_CASE("cluster cuts are nested")
{
    Rng rng(12);
    Eigen::MatrixXd x = gaussian(80, 4, rng);
    for (int g = 0; g < 4; ++g) x.middleRows(20 * g, 20).col(g).array() += 15.0;
    const auto tree = cluster_rows(x, Metric::euclidean);
    SignificanceOptions opt;
    opt.n_sim = 30;
    opt.metric = Metric::euclidean;
    const auto sig = significance_test(tree, x, opt);
    for (int c = 2; c <= sig.k_max; ++c) {
        const auto fine = cut_clusters(tree, sig, c);
        const auto coarse = cut_clusters(tree, sig, c - 1);
        for (std::size_t i = 0; i < fine.labels.size(); ++i)
            for (std::size_t j = 0; j < fine.labels.size(); ++j)
                if (fine.labels[i] == fine.labels[j]) CHECK(coarse.labels[i] == coarse.labels[j]);
    }
}

TEST_CASE("within-cluster statistics")
{
    ClusterAssignment a{2, {0, 0, 1, 1, 1}};
    const std::vector<std::string> cls{"x", "y", "x", "x", "y"};
    const std::vector<std::string> truth{"a", "a", "b", "b", "a"};
    const auto s = within_cluster_stats(a, {true, false, true, true, true}, cls, &truth);
    CHECK(s[0].accuracy == 0.5);
    CHECK(s[1].accuracy == 1.0);
    CHECK(s[1].class_counts.at("x") == 2);
    CHECK(s[1].subgroup_counts.at("b") == 2);
}

TEST_CASE("adjusted rand index helper")
{
    CHECK(oracle::adjusted_rand_index({"a", "a", "b", "b"}, {"x", "x", "y", "y"}) == doctest::Approx(1.0));
    CHECK(oracle::adjusted_rand_index({"a", "a", "b", "b"}, {"x", "y", "x", "y"}) == doctest::Approx(-0.5));
}
