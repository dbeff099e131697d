#include "lcsdive/ftcluster.hpp"
#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <fstream>

using namespace lcsdive;

TEST_CASE("ft_normalize scales each row to a maximum of one")
{
    FeatureTrackingMatrix ft;
    ft.ids = {"a", "b"};
    ft.scores.resize(2, 3);
    ft.scores << 0.2, 0.4, 0.1,  //
        0, 0, 0;
    const auto n = ft_normalize(ft);
    CHECK(n.scores(0, 1) == 1.0);
    CHECK(n.scores(0, 0) == doctest::Approx(0.5));
    CHECK(n.scores.row(1).isZero());
}

TEST_CASE("ft_merge averages per instance and ignores fold order")
{
    const auto ds = testing::random_dataset(30, 2, 0, 2, 0.0, 3);
    const auto splits = cv_partition(ds, 3, 1);
    std::vector<FeatureTrackingMatrix> folds;
    Rng rng(5);
    for (const auto& s : splits) {
        FeatureTrackingMatrix f;
        f.scores.resize(static_cast<Index>(s.train_rows.size()), 4);
        for (std::size_t k = 0; k < s.train_rows.size(); ++k) {
            f.ids.push_back(ds.ids[static_cast<std::size_t>(s.train_rows[k])]);
            for (Index j = 0; j < 4; ++j) f.scores(static_cast<Index>(k), j) = uniform01(rng);
        }
        folds.push_back(f);
    }
    const auto merged = ft_merge(folds, splits, ds.ids);
    // brute force: instance i averages the folds whose training split holds it
    for (Index i = 0; i < 30; ++i) {
        Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(4);
        int n = 0;
        for (std::size_t k = 0; k < folds.size(); ++k)
            for (std::size_t r = 0; r < folds[k].ids.size(); ++r)
                if (folds[k].ids[r] == ds.ids[static_cast<std::size_t>(i)]) {
                    sum += folds[k].scores.row(static_cast<Index>(r));
                    ++n;
                }
        CHECK(n == 2);
        CHECK((merged.scores.row(i) - sum / n).cwiseAbs().maxCoeff() < 1e-15);
    }
    auto rfolds = folds;
    auto rsplits = splits;
    std::reverse(rfolds.begin(), rfolds.end());
    std::reverse(rsplits.begin(), rsplits.end());
    CHECK(ft_merge(rfolds, rsplits, ds.ids).scores == merged.scores);

    auto bad = folds;
    bad[0].ids[0] = "nobody";
    CHECK_THROWS_AS(ft_merge(bad, splits, ds.ids), DataError);
}

TEST_CASE("analyze_clusters and exports on a two-group matrix")
{
    Rng rng(3);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(60, 6);
    for (Index i = 0; i < 60; ++i)
        for (Index j = 0; j < 6; ++j) x(i, j) = 0.1 * nd(rng) + ((i < 30) == (j < 3) ? 1.0 : 0.0);
    AnalysisOptions opt;
    opt.significance.n_sim = 30;
    const auto a = analyze_clusters(x, opt);
    REQUIRE(a.significance.k_max >= 2);
    CHECK(a.cuts.size() == static_cast<std::size_t>(a.significance.k_max));
    CHECK(a.col_tree.leaf_count == 6);
    CHECK(a.elbow.curve.front().first == 1);
    const auto& two = a.cut(2);
    for (Index i = 1; i < 30; ++i) CHECK(two.labels[static_cast<std::size_t>(i)] == two.labels[0]);
    CHECK(two.labels[0] != two.labels[59]);

    opt.max_cut_clusters = 1;
    CHECK(analyze_clusters(x, opt).cuts.size() == 1);

    testing::TempDir dir("ftc");
    std::vector<std::string> ids, cols;
    for (int i = 0; i < 60; ++i) ids.push_back("r" + std::to_string(i));
    for (int j = 0; j < 6; ++j) cols.push_back("c" + std::to_string(j));
    write_matrix_csv(x, "InstanceID", ids, cols, dir.path() / "m.csv");
    write_dendrogram_json(a.row_tree, a.significance, ids, dir.path() / "d.json");
    write_pvalues_csv(a.row_tree, a.significance, dir.path() / "p.csv");
    write_assignment_csv(two, "InstanceID", ids, dir.path() / "a.csv");
    write_elbow_csv(a.elbow, dir.path() / "e.csv");
    write_elbow_svg(a.elbow, "elbow", dir.path() / "e.svg");
    write_clustermap_svg(x, a.row_tree, a.col_tree, cols, {{"found", std::vector<std::string>(60, "0")}}, "map",
                         dir.path() / "c.svg");

    CHECK(testing::read_csv(dir.path() / "m.csv").size() == 61);
    CHECK(testing::csv_column(dir.path() / "a.csv", "clusterID").size() == 60);
    const auto tested = std::count_if(a.significance.p_values.begin(), a.significance.p_values.end(),
                                      [](const auto& p) { return p.has_value(); });
    CHECK(testing::read_csv(dir.path() / "p.csv").size() == static_cast<std::size_t>(tested) + 1);
    const auto tree = nlohmann::json::parse(testing::slurp(dir.path() / "d.json"));
    CHECK(tree["root"]["size"] == 60);
    CHECK(tree["k_max"] == a.significance.k_max);
    const auto svg = testing::slurp(dir.path() / "c.svg");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
}
