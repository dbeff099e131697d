#include "lcsdive/lcs.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

using namespace lcsdive;

namespace {

Rule discrete_rule(std::vector<std::pair<int, double>> specs, int label, double fitness = 1.0, int numerosity = 1)
{
    Rule r;
    for (auto [f, v] : specs) r.condition.push_back({f, false, v, v});
    r.label = label;
    r.fitness = fitness;
    r.numerosity = numerosity;
    return r;
}

} // namespace

TEST_CASE("ft_update from zero toward a constant target follows 1 - (1 - beta)^k")
{
    const Rule r = discrete_rule({{1, 0.0}}, 0);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(4);
    for (int k = 1; k <= 100; ++k) {
        ft_update(row, {&r}, 0.1);
        CHECK(std::abs(row(1) - (1.0 - std::pow(0.9, k))) < 1e-12);
        CHECK(row(0) == 0.0);
    }
}

TEST_CASE("ft_update target is the fitness-numerosity share of the correct set")
{
    const Rule a = discrete_rule({{0, 1.0}, {2, 0.0}}, 1, 0.5, 3);
    const Rule b = discrete_rule({{0, 1.0}}, 1, 1.0, 1);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(3);
    ft_update(row, {&a, &b}, 1.0);
    CHECK(row(0) == doctest::Approx(1.0));
    CHECK(row(1) == 0.0);
    CHECK(row(2) == doctest::Approx(1.5 / 2.5));
    // zero-fitness sets leave the row untouched
    const Rule z = discrete_rule({{1, 0.0}}, 1, 0.0);
    ft_update(row, {&z}, 1.0);
    CHECK(row(1) == 0.0);
}

TEST_CASE("ft values stay within [0, 1] under arbitrary correct sets")
{
    Rng rng(3);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(6);
    for (int step = 0; step < 500; ++step) {
        std::vector<Rule> rules;
        for (int k = 0; k < 4; ++k) {
            std::vector<std::pair<int, double>> specs;
            for (int f = 0; f < 6; ++f)
                if (uniform01(rng) < 0.4) specs.push_back({f, 0.0});
            rules.push_back(discrete_rule(specs, 0, uniform01(rng), 1 + static_cast<int>(uniform_int(rng, 0, 3))));
        }
        std::vector<const Rule*> set;
        for (const auto& r : rules) set.push_back(&r);
        ft_update(row, set, 0.2);
        CHECK(row.minCoeff() >= 0.0);
        CHECK(row.maxCoeff() <= 1.0 + 1e-12);
    }
}

TEST_CASE("matching treats missing values as wildcards and intervals as closed")
{
    Rule r = discrete_rule({{0, 1.0}}, 0);
    r.condition.push_back({2, true, -1.0, 1.0});
    Eigen::RowVectorXd x(3);
    x << 1.0, 5.0, 1.0;
    CHECK(matches(r, x));
    x(2) = 1.5;
    CHECK_FALSE(matches(r, x));
    x(2) = std::nan("");
    CHECK(matches(r, x));
    x(0) = 0.0;
    CHECK_FALSE(matches(r, x));
}

TEST_CASE("compute_rsl follows the population-size bound")
{
    const auto ds = generate_mux(3, 50, 0);
    CHECK(compute_rsl(ds, 2000) == 11);
    CHECK(compute_rsl(ds, 500) == 9);
    CHECK(compute_rsl(ds, 500, 3) == 3);
    const auto tern = testing::random_dataset(40, 5, 0, 2, 0.0, 1);
    CHECK(compute_rsl(tern, 9) == 2);
}

TEST_CASE("cover builds a rule that matches the instance within the specificity limit")
{
    const auto ds = testing::random_dataset(50, 4, 3, 2, 0.1, 5);
    const Eigen::VectorXd ek = Eigen::VectorXd::Constant(7, 1.0 / 7);
    Rng rng(9);
    for (Index i = 0; i < ds.instance_count(); ++i) {
        const auto r = cover(ds.values.row(i), 1, ds.features, ek, nullptr, 3, rng, i);
        CHECK(matches(r, ds.values.row(i)));
        CHECK(r.specificity() >= 1);
        CHECK(r.specificity() <= 3);
        CHECK(r.label == 1);
        CHECK(std::is_sorted(r.condition.begin(), r.condition.end(),
                             [](const FeatureSpec& a, const FeatureSpec& b) { return a.feature < b.feature; }));
        for (const auto& s : r.condition) CHECK_FALSE(is_missing(ds.values(i, s.feature)));
    }
}

TEST_CASE("cover favours features with expert knowledge")
{
    const auto ds = generate_mux(2, 10, 0);
    Eigen::VectorXd ek = Eigen::VectorXd::Zero(6);
    ek(4) = 1.0;
    Rng rng(1);
    int hits = 0;
    for (int k = 0; k < 400; ++k) hits += cover(ds.values.row(0), 0, ds.features, ek, nullptr, 1, rng).find(4) != nullptr;
    // blended weight of feature 4 is 0.5 + 0.5 / 6
    CHECK(hits / 400.0 == doctest::Approx(0.5833).epsilon(0.15));
}

TEST_CASE("generality and subsumption")
{
    Hyperparams hp;
    Rule g = discrete_rule({{0, 1.0}}, 1);
    Rule s = discrete_rule({{0, 1.0}, {3, 0.0}}, 1);
    CHECK(more_general(g, s));
    CHECK_FALSE(more_general(s, g));
    CHECK_FALSE(more_general(g, g));
    g.match_count = 50;
    g.correct_count = 50;
    g.refresh(hp.nu);
    CHECK(subsumes(g, s, hp));
    g.correct_count = 45;
    g.refresh(hp.nu);
    CHECK_FALSE(subsumes(g, s, hp));
    Rule wide;
    wide.condition.push_back({0, true, 0.0, 2.0});
    Rule narrow;
    narrow.condition.push_back({0, true, 0.5, 1.0});
    CHECK(more_general(wide, narrow));
}

TEST_CASE("run_ga stamps the correct set and inserts two matching offspring")
{
    const auto ds = generate_mux(3, 20, 4);
    const Eigen::RowVectorXd x = ds.values.row(0);
    const int label = ds.classes[0];
    const Eigen::VectorXd ek = Eigen::VectorXd::Constant(11, 1.0 / 11);
    Hyperparams hp;
    hp.chi = 1.0;
    hp.mu = 0.3;
    DiscoveryContext ctx{ds.features, ek, hp, 4};
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Rule> pop;
        std::vector<std::size_t> correct;
        for (int k = 0; k < 6; ++k) {
            Rule r = cover(x, label, ds.features, ek, nullptr, 4, rng);
            r.fitness = uniform01(rng);
            pop.push_back(r);
            correct.push_back(static_cast<std::size_t>(k));
        }
        pop.push_back(discrete_rule({{0, 1.0 - x(0)}}, label));
        const auto before = std::accumulate(pop.begin(), pop.end(), 0, [](int n, const Rule& r) { return n + r.numerosity; });
        run_ga(correct, pop, x, label, nullptr, ctx, 77, rng);
        const auto after = std::accumulate(pop.begin(), pop.end(), 0, [](int n, const Rule& r) { return n + r.numerosity; });
        CHECK(after == before + 2);
        for (std::size_t k : correct) CHECK(pop[k].ga_timestamp == 77);
        CHECK(pop[6].ga_timestamp == 0);
        for (std::size_t k = 7; k < pop.size(); ++k) {
            CHECK(matches(pop[k], x));
            CHECK(pop[k].specificity() <= 4);
            CHECK(pop[k].specificity() >= 1);
            CHECK(pop[k].match_count == 0);
            CHECK(pop[k].label == label);
        }
    }
}

TEST_CASE("delete_rules shrinks the population to N")
{
    Rng rng(5);
    std::vector<Rule> pop;
    for (int k = 0; k < 40; ++k) {
        Rule r = discrete_rule({{k % 5, 0.0}}, 0, uniform01(rng), 1 + k % 3);
        r.match_count = 30;
        pop.push_back(r);
    }
    delete_rules(pop, 25, Hyperparams{}, rng);
    int micro = 0;
    for (const auto& r : pop) {
        micro += r.numerosity;
        CHECK(r.numerosity >= 1);
    }
    CHECK(micro == 25);
}

TEST_CASE("balanced accuracy averages per-class recall")
{
    CHECK(balanced_accuracy({0, 0, 1, 1}, {0, 1, 1, 1}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    CHECK(balanced_accuracy({2, 2}, {2, 2}) == 1.0);
    CHECK_THROWS_AS(balanced_accuracy({0, 1}, {0, 0}, 2), DataError);
}

TEST_CASE("fit solves the 6-bit multiplexer and the model survives a save/load round trip")
{
    const auto ds = generate_mux(2, 500, 1);
    Hyperparams hp;
    hp.iterations = 20000;
    hp.N = 500;
    hp.seed = 3;
    const FeatureWeights ek = multisurf(ds);
    const Model model = fit(ds, hp, ek);
    CHECK(model.micro_size() <= hp.N);
    CHECK(balanced_accuracy(predict_all(model, ds.values), ds.classes) >= 0.95);
    CHECK(model.ft.scores.rows() == ds.instance_count());
    CHECK(model.ft.scores.minCoeff() >= 0.0);
    CHECK(model.ft.scores.maxCoeff() <= 1.0 + 1e-12);
    // address bits are tracked in every instance
    CHECK(model.ft.scores.col(0).mean() > model.ft.scores.rightCols(4).colwise().mean().maxCoeff());

    testing::TempDir dir("lcs");
    save_model(model, dir.path() / "m.json");
    const Model back = load_model(dir.path() / "m.json");
    REQUIRE(back.population.size() == model.population.size());
    for (std::size_t k = 0; k < model.population.size(); ++k) {
        CHECK(back.population[k].same_condition(model.population[k]));
        CHECK(back.population[k].numerosity == model.population[k].numerosity);
        CHECK(back.population[k].fitness == model.population[k].fitness);
    }
    CHECK(predict_all(back, ds.values) == predict_all(model, ds.values));
    CHECK(back.ft.scores == model.ft.scores);

    const Model again = fit(ds, hp, ek);
    CHECK(again.ft.scores == model.ft.scores);

    const auto compacted = compact(model.population, ds, hp);
    CHECK(compacted.size() <= model.population.size());
    for (const auto& r : compacted) CHECK(r.accuracy > 0.5);
}

TEST_CASE("hyperparameter validation")
{
    Hyperparams hp;
    hp.beta = 0.0;
    CHECK_THROWS_AS(hp.validate(), ConfigError);
    hp = {};
    hp.nu = 0.5;
    CHECK_THROWS_AS(hp.validate(), ConfigError);
    hp = {};
    hp.rsl_override = 0;
    CHECK_THROWS_AS(hp.validate(), ConfigError);
}

TEST_CASE("load_model rejects foreign files")
{
    testing::TempDir dir("model");
    {
        std::ofstream out(dir.path() / "x.json");
        out << R"({"format": "other"})";
    }
    CHECK_THROWS_AS(load_model(dir.path() / "x.json"), DataError);
}
