#include "lcsdive/pipeline.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <sstream>

using namespace lcsdive;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_mux(const fs::path& out)
{
    auto cfg = config_from_json(nlohmann::json::parse(R"({
        "generator": {"kind": "mux", "address_bits": 2, "instances": 200},
        "n_folds": 3,
        "lcs": {"iterations": 3000, "N": 300},
        "significance": {"n_sim": 20}
    })"));
    cfg.output_dir = out;
    return cfg;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(LCSDIVE_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("config parsing validates keys, types and phases")
{
    using nlohmann::json;
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"generator": {"kind": "mux"}, "bogus": 1})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"generator": {"kind": "mux"}, "n_folds": "ten"})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"generator": {"kind": "mux"}, "lcs": {"betta": 0.1}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"generator": {"kind": "mux"}, "phases": [1, 3]})")).validate(),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({})")).validate(), ConfigError);
    const auto cfg = config_from_json(json::parse(R"({"generator": {"kind": "xor", "features": 8}, "phases": [2, 3],
        "significance": {"null_covariance": "diagonal"}, "lcs": {"N": 100}})"));
    CHECK(cfg.phases == std::vector<int>{2, 3});
    CHECK(cfg.lcs.N == 100);
    CHECK(cfg.significance.null_covariance == NullCovariance::diagonal);
    const auto round = config_from_json(nlohmann::json::parse(config_to_json(cfg).dump()));
    CHECK(config_to_json(round) == config_to_json(cfg));
}

TEST_CASE("later phases without earlier outputs name the missing files")
{
    testing::TempDir dir("missing");
    auto cfg = small_mux(dir.path());
    cfg.phases = {2};
    try {
        run_pipeline(cfg);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("dataset.csv") != std::string::npos);
        CHECK(msg.find("splits.csv") != std::string::npos);
        CHECK(msg.find("model_fold0.json") != std::string::npos);
    }
}

TEST_CASE("full run writes every artifact, resumes by phase and reports")
{
    testing::TempDir dir("run");
    auto cfg = small_mux(dir.path() / "a");
    const auto summary = run_pipeline(cfg);
    const fs::path out = cfg.output_dir;
    for (const char* f :
         {"run_summary.json", "timings.json", "phase1/dataset.csv", "phase1/splits.csv", "phase1/summary.json",
          "phase1/model_fold2.json", "phase1/weights_fold0.csv", "phase1/ft_fold1.csv", "phase1/predictions_fold0.csv",
          "phase1/rules_fold0.csv", "phase2/ft_merged.csv", "phase2/dendrogram.json", "phase2/pvalues.csv",
          "phase2/elbow.csv", "phase2/elbow.svg", "phase2/clusters_c1.csv", "phase2/clustermap_c1.svg",
          "phase2/cluster_stats_c1.csv", "phase2/dataset_clusterID_c1.csv", "phase3/rules_merged.csv",
          "phase3/rule_encoding.csv", "phase3/rule_dendrogram.json", "phase3/rule_elbow.csv",
          "phase3/rule_clusters_c1.csv", "phase4/network.dot", "phase4/network.json", "phase4/network.svg"})
        CHECK_MESSAGE(fs::exists(out / f), f);

    const int k_max = summary["phase2"]["k_max"];
    for (int c = 1; c <= k_max; ++c) CHECK(fs::exists(out / "phase2" / ("clustermap_c" + std::to_string(c) + ".svg")));
    CHECK(summary["phase1"]["folds"].size() == 3);

    // the same config reproduces the tree byte for byte, here with several workers
    auto twin = cfg;
    twin.output_dir = dir.path() / "b";
    twin.workers = 3;
    run_pipeline(twin);
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
        if (!entry.is_regular_file() || entry.path().filename() == "timings.json") continue;
        const auto rel = fs::relative(entry.path(), out);
        CHECK_MESSAGE(testing::slurp(entry.path()) == testing::slurp(twin.output_dir / rel), rel.string());
    }

    // rerunning phases 2..4 from the saved phase 1 reproduces the same files
    const auto before = testing::slurp(out / "phase2" / "pvalues.csv");
    fs::remove_all(out / "phase2");
    auto resume = cfg;
    resume.phases = {2, 3, 4};
    run_pipeline(resume);
    CHECK(testing::slurp(out / "phase2" / "pvalues.csv") == before);

    std::ostringstream text;
    report(out, text);
    const auto r = text.str();
    CHECK(r.find("mean") != std::string::npos);
    CHECK(r.find("recommended c") != std::string::npos);
    std::size_t top = r.find("Top features");
    REQUIRE(top != std::string::npos);
    std::istringstream lines(r.substr(top));
    std::string line;
    std::getline(lines, line);
    int listed = 0;
    while (std::getline(lines, line) && !line.empty()) ++listed;
    CHECK(listed == 6);

    std::ostringstream empty;
    CHECK_THROWS_AS(report(dir.path() / "nothing", empty), DataError);
}

TEST_CASE("generator kinds")
{
    GeneratorSpec g;
    g.kind = "hetero";
    g.model = "xor";
    g.order = 2;
    g.models = 2;
    g.instances = 100;
    const auto ds = generate(g, 1);
    CHECK(ds.true_subgroups);
    CHECK(ds.instance_count() == 100);
    g.kind = "univariate";
    g.heritability = 0.4;
    CHECK(generate(g, 1).feature_count() == 20);
}

TEST_CASE("command line exit codes")
{
    testing::TempDir dir("cli");
    const auto p = dir.path().string();
    CHECK(run_cli("generate mux --address-bits 2 --instances 50 -o " + p + "/m.csv") == 0);
    CHECK(fs::exists(dir.path() / "m.csv"));
    {
        std::ofstream bad(dir.path() / "bad.json");
        bad << R"({"generator": {"kind": "mux"}, "nonsense": true})";
    }
    CHECK(run_cli("run --config " + p + "/bad.json --out " + p + "/o") == 2);
    {
        std::ofstream cfg(dir.path() / "ds.json");
        cfg << R"({"dataset": {"path": ")" << p << R"(/absent.csv"}})";
    }
    CHECK(run_cli("run --config " + p + "/ds.json --out " + p + "/o") == 3);
    {
        std::ofstream cfg(dir.path() / "p2.json");
        cfg << R"({"generator": {"kind": "mux", "address_bits": 2}})";
    }
    CHECK(run_cli("run --config " + p + "/p2.json --phases 2 --out " + p + "/o") == 3);
    CHECK(run_cli("report --out " + p + "/o") == 3);
    CHECK(run_cli("frobnicate") == 2);
}
