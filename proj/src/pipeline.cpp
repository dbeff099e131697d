#include "lcsdive/pipeline.hpp"

#include "lcsdive/ftcluster.hpp"
#include "lcsdive/relief.hpp"
#include "lcsdive/ruleviz.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace lcsdive {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

// Configuration ----------------------------------------------------------------

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where)
{
    if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
void take(const json& obj, const char* key, T& dst, const std::string& where)
{
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return;
    try {
        dst = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong value type");
    }
}

template <typename T>
void take(const json& obj, const char* key, std::optional<T>& dst, const std::string& where)
{
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return;
    T value{};
    take(obj, key, value, where);
    dst = value;
}

} // namespace

void PipelineConfig::validate() const
{
    if (dataset_path && generator) throw ConfigError("config: give either a dataset or a generator, not both");
    if (!dataset_path && !generator) throw ConfigError("config: a dataset path or a generator is required");
    if (n_folds < 2) throw ConfigError("config: n_folds must be at least 2");
    lcs.validate();
    if (multisurf_subsample && *multisurf_subsample < 1)
        throw ConfigError("config: multisurf_subsample must be positive");
    if (!(significance.alpha > 0.0 && significance.alpha < 1.0))
        throw ConfigError("config: significance.alpha must be in (0, 1)");
    if (significance.n_sim < 20) throw ConfigError("config: significance.n_sim must be at least 20");
    if (significance.min_leaf < 1) throw ConfigError("config: significance.min_leaf must be positive");
    if (significance.max_null_size < 4) throw ConfigError("config: significance.max_null_size must be at least 4");
    if (max_cut_clusters < 1) throw ConfigError("config: max_cut_clusters must be positive");
    if (network_edge_threshold < 0) throw ConfigError("config: network.edge_threshold must be non-negative");
    if (workers < 1) throw ConfigError("config: workers must be at least 1");
    if (phases.empty()) throw ConfigError("config: no phases selected");
    for (std::size_t k = 0; k < phases.size(); ++k) {
        if (phases[k] < 1 || phases[k] > 4) throw ConfigError("config: phases must be drawn from 1..4");
        if (k > 0 && phases[k] != phases[k - 1] + 1)
            throw ConfigError("config: phases must form a contiguous ascending run, e.g. 1,2,3,4 or 2,3");
    }
    if (generator) {
        const auto& g = *generator;
        if (g.kind != "mux" && g.kind != "xor" && g.kind != "univariate" && g.kind != "hetero")
            throw ConfigError("config: generator.kind must be mux, xor, univariate or hetero");
        if (g.instances < 1) throw ConfigError("config: generator.instances must be positive");
        if (g.heritability && !(*g.heritability > 0.0 && *g.heritability <= 1.0))
            throw ConfigError("config: generator.heritability must be in (0, 1]");
        if (g.kind == "hetero") {
            if (g.model != "univariate" && g.model != "xor")
                throw ConfigError("config: generator.model must be univariate or xor");
            if (static_cast<int>(g.proportions.size()) != g.models)
                throw ConfigError("config: generator.proportions needs one entry per model");
            const double total = std::accumulate(g.proportions.begin(), g.proportions.end(), 0.0);
            if (std::abs(total - 1.0) > 1e-9) throw ConfigError("config: generator.proportions must sum to 1");
        }
    }
}

PipelineConfig config_from_json(const json& doc)
{
    PipelineConfig cfg;
    check_keys(doc,
               {"dataset", "generator", "n_folds", "lcs", "multisurf_subsample", "significance", "max_cut_clusters",
                "compaction", "rule_metric", "network", "phases", "output_dir", "workers", "seed"},
               "config");
    if (const auto it = doc.find("dataset"); it != doc.end() && !it->is_null()) {
        const auto& d = *it;
        check_keys(d, {"path", "class_column", "id_column", "true_cluster_column", "discrete_limit", "missing_tokens"},
                   "dataset");
        std::string path;
        take(d, "path", path, "dataset");
        if (path.empty()) throw ConfigError("dataset.path is required");
        cfg.dataset_path = path;
        take(d, "class_column", cfg.csv.class_column, "dataset");
        take(d, "id_column", cfg.csv.id_column, "dataset");
        take(d, "true_cluster_column", cfg.csv.true_cluster_column, "dataset");
        take(d, "discrete_limit", cfg.csv.discrete_limit, "dataset");
        take(d, "missing_tokens", cfg.csv.missing_tokens, "dataset");
    }
    if (const auto it = doc.find("generator"); it != doc.end() && !it->is_null()) {
        const auto& g = *it;
        check_keys(g,
                   {"kind", "instances", "seed", "address_bits", "features", "interacting", "label_noise",
                    "penetrance_gap", "heritability", "model", "models", "order", "proportions"},
                   "generator");
        GeneratorSpec spec;
        take(g, "kind", spec.kind, "generator");
        take(g, "instances", spec.instances, "generator");
        take(g, "seed", spec.seed, "generator");
        take(g, "address_bits", spec.address_bits, "generator");
        take(g, "features", spec.features, "generator");
        take(g, "interacting", spec.interacting, "generator");
        take(g, "label_noise", spec.label_noise, "generator");
        take(g, "penetrance_gap", spec.penetrance_gap, "generator");
        take(g, "heritability", spec.heritability, "generator");
        take(g, "model", spec.model, "generator");
        take(g, "models", spec.models, "generator");
        take(g, "order", spec.order, "generator");
        take(g, "proportions", spec.proportions, "generator");
        cfg.generator = spec;
    }
    take(doc, "n_folds", cfg.n_folds, "config");
    if (const auto it = doc.find("lcs"); it != doc.end() && !it->is_null()) {
        const auto& l = *it;
        check_keys(l, {"iterations", "N", "nu", "beta", "theta_GA", "chi", "mu", "theta_del", "theta_sub", "acc_sub", "rsl"},
                   "lcs");
        take(l, "iterations", cfg.lcs.iterations, "lcs");
        take(l, "N", cfg.lcs.N, "lcs");
        take(l, "nu", cfg.lcs.nu, "lcs");
        take(l, "beta", cfg.lcs.beta, "lcs");
        take(l, "theta_GA", cfg.lcs.theta_GA, "lcs");
        take(l, "chi", cfg.lcs.chi, "lcs");
        take(l, "mu", cfg.lcs.mu, "lcs");
        take(l, "theta_del", cfg.lcs.theta_del, "lcs");
        take(l, "theta_sub", cfg.lcs.theta_sub, "lcs");
        take(l, "acc_sub", cfg.lcs.acc_sub, "lcs");
        take(l, "rsl", cfg.lcs.rsl_override, "lcs");
    }
    take(doc, "multisurf_subsample", cfg.multisurf_subsample, "config");
    if (const auto it = doc.find("significance"); it != doc.end() && !it->is_null()) {
        const auto& s = *it;
        check_keys(s, {"alpha", "n_sim", "min_leaf", "max_null_size", "null_covariance"}, "significance");
        take(s, "alpha", cfg.significance.alpha, "significance");
        take(s, "n_sim", cfg.significance.n_sim, "significance");
        take(s, "min_leaf", cfg.significance.min_leaf, "significance");
        take(s, "max_null_size", cfg.significance.max_null_size, "significance");
        std::string cov = "full";
        take(s, "null_covariance", cov, "significance");
        if (cov == "full")
            cfg.significance.null_covariance = NullCovariance::full;
        else if (cov == "diagonal")
            cfg.significance.null_covariance = NullCovariance::diagonal;
        else
            throw ConfigError("significance.null_covariance must be full or diagonal");
    }
    take(doc, "max_cut_clusters", cfg.max_cut_clusters, "config");
    take(doc, "compaction", cfg.compaction, "config");
    std::string rule_metric = "pearson";
    take(doc, "rule_metric", rule_metric, "config");
    if (rule_metric == "pearson")
        cfg.rule_metric = Metric::pearson;
    else if (rule_metric == "euclidean")
        cfg.rule_metric = Metric::euclidean;
    else
        throw ConfigError("rule_metric must be pearson or euclidean");
    if (const auto it = doc.find("network"); it != doc.end() && !it->is_null()) {
        const auto& n = *it;
        check_keys(n, {"numerosity_weighted", "linear_diameter", "edge_threshold"}, "network");
        take(n, "numerosity_weighted", cfg.network_numerosity_weighted, "network");
        take(n, "linear_diameter", cfg.network_linear_diameter, "network");
        take(n, "edge_threshold", cfg.network_edge_threshold, "network");
    }
    take(doc, "phases", cfg.phases, "config");
    std::string out;
    take(doc, "output_dir", out, "config");
    if (!out.empty()) cfg.output_dir = out;
    take(doc, "workers", cfg.workers, "config");
    take(doc, "seed", cfg.seed, "config");
    return cfg;
}

PipelineConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

ordered_json config_to_json(const PipelineConfig& cfg)
{
    ordered_json doc;
    if (cfg.dataset_path) {
        doc["dataset"] = {{"path", cfg.dataset_path->generic_string()},
                          {"class_column", cfg.csv.class_column},
                          {"id_column", cfg.csv.id_column ? ordered_json(*cfg.csv.id_column) : ordered_json(nullptr)},
                          {"true_cluster_column", cfg.csv.true_cluster_column ? ordered_json(*cfg.csv.true_cluster_column)
                                                                              : ordered_json(nullptr)},
                          {"discrete_limit", cfg.csv.discrete_limit},
                          {"missing_tokens", cfg.csv.missing_tokens}};
    }
    if (cfg.generator) {
        const auto& g = *cfg.generator;
        doc["generator"] = {{"kind", g.kind},
                            {"instances", g.instances},
                            {"seed", g.seed.value_or(cfg.seed)},
                            {"address_bits", g.address_bits},
                            {"features", g.features},
                            {"interacting", g.interacting},
                            {"label_noise", g.label_noise},
                            {"penetrance_gap", g.penetrance_gap},
                            {"heritability", g.heritability ? ordered_json(*g.heritability) : ordered_json(nullptr)},
                            {"model", g.model},
                            {"models", g.models},
                            {"order", g.order},
                            {"proportions", g.proportions}};
    }
    doc["n_folds"] = cfg.n_folds;
    doc["lcs"] = {{"iterations", cfg.lcs.iterations}, {"N", cfg.lcs.N},
                  {"nu", cfg.lcs.nu},                 {"beta", cfg.lcs.beta},
                  {"theta_GA", cfg.lcs.theta_GA},     {"chi", cfg.lcs.chi},
                  {"mu", cfg.lcs.mu},                 {"theta_del", cfg.lcs.theta_del},
                  {"theta_sub", cfg.lcs.theta_sub},   {"acc_sub", cfg.lcs.acc_sub},
                  {"rsl", cfg.lcs.rsl_override ? ordered_json(*cfg.lcs.rsl_override) : ordered_json(nullptr)}};
    doc["multisurf_subsample"] = cfg.multisurf_subsample ? ordered_json(*cfg.multisurf_subsample) : ordered_json(nullptr);
    doc["significance"] = {
        {"alpha", cfg.significance.alpha},
        {"n_sim", cfg.significance.n_sim},
        {"min_leaf", cfg.significance.min_leaf},
        {"max_null_size", cfg.significance.max_null_size},
        {"null_covariance", cfg.significance.null_covariance == NullCovariance::full ? "full" : "diagonal"}};
    doc["max_cut_clusters"] = cfg.max_cut_clusters;
    doc["compaction"] = cfg.compaction;
    doc["rule_metric"] = cfg.rule_metric == Metric::pearson ? "pearson" : "euclidean";
    doc["network"] = {{"numerosity_weighted", cfg.network_numerosity_weighted},
                      {"linear_diameter", cfg.network_linear_diameter},
                      {"edge_threshold", cfg.network_edge_threshold}};
    doc["phases"] = cfg.phases;
    doc["seed"] = cfg.seed;
    return doc;
}

Dataset generate(const GeneratorSpec& g, std::uint64_t seed)
{
    if (g.kind == "mux") return generate_mux(g.address_bits, g.instances, seed);
    if (g.kind == "xor")
        return generate_xor(g.features, g.interacting, g.instances,
                            g.heritability ? xor_noise_for_heritability(*g.heritability) : g.label_noise, seed);
    if (g.kind == "univariate")
        return generate_univariate(g.features, g.instances,
                                   g.heritability ? penetrance_gap_for_heritability(*g.heritability) : g.penetrance_gap,
                                   seed);
    if (g.kind == "hetero") {
        const bool xor_kind = g.model == "xor";
        const double strength = xor_kind ? (g.heritability ? xor_noise_for_heritability(*g.heritability) : g.label_noise)
                                         : (g.heritability ? penetrance_gap_for_heritability(*g.heritability)
                                                           : g.penetrance_gap);
        const auto models = heterogeneous_models(xor_kind ? ModelKind::xor_parity : ModelKind::univariate, g.models,
                                                 xor_kind ? g.order : 1, g.features, strength);
        std::vector<std::pair<SimulationModel, double>> parts;
        for (std::size_t k = 0; k < models.size(); ++k) parts.emplace_back(models[k], g.proportions.at(k));
        return generate_heterogeneous(parts, g.instances, seed);
    }
    throw ConfigError("unknown generator kind '" + g.kind + "'");
}

// Pipeline -------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) rows.push_back(split_csv_line(line));
    }
    if (rows.empty()) throw DataError(path.string() + " is empty");
    return rows;
}

void write_json(const ordered_json& doc, const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << doc.dump(1) << '\n';
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

ordered_json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void require_files(const std::vector<fs::path>& files, int phase, int source_phase)
{
    std::string missing;
    for (const auto& f : files)
        if (!fs::exists(f)) missing += "\n  " + f.string();
    if (!missing.empty())
        throw DataError("phase " + std::to_string(phase) + " needs outputs of phase " + std::to_string(source_phase) +
                        " that are missing:" + missing);
}

fs::path fold_file(const fs::path& dir, const std::string& stem, int k, const std::string& ext)
{
    return dir / (stem + "_fold" + std::to_string(k) + ext);
}

std::vector<std::string> to_strings(const std::vector<int>& labels)
{
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (int l : labels) out.push_back(std::to_string(l));
    return out;
}

std::vector<std::string> feature_names(const std::vector<FeatureDescriptor>& features)
{
    std::vector<std::string> out;
    for (const auto& f : features) out.push_back(f.name);
    return out;
}

double mean_of(const std::vector<double>& v)
{
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_stdev(const std::vector<double>& v)
{
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void log_line(std::ostream* log, const std::string& msg)
{
    if (log) *log << msg << std::endl;
}

// phase 1 ------------------------------------------------------------------------

void run_phase1(const PipelineConfig& cfg, const fs::path& dir, std::ostream* log)
{
    fs::create_directories(dir);
    const Dataset ds = cfg.dataset_path ? load_dataset(*cfg.dataset_path, cfg.csv)
                                        : generate(*cfg.generator, cfg.generator->seed.value_or(cfg.seed));
    ds.validate();
    log_line(log, "phase 1: " + std::to_string(ds.instance_count()) + " instances, " +
                      std::to_string(ds.feature_count()) + " features, " + std::to_string(cfg.n_folds) + " folds");
    write_dataset_csv(ds, dir / "dataset.csv");
    const auto splits = cv_partition(ds, cfg.n_folds, cfg.seed);
    {
        std::vector<int> fold_of(static_cast<std::size_t>(ds.instance_count()), -1);
        for (const auto& s : splits)
            for (Index r : s.test_rows) fold_of[static_cast<std::size_t>(r)] = s.fold_index;
        std::ofstream out(dir / "splits.csv", std::ios::binary);
        if (!out) throw RuntimeFailure("cannot write " + (dir / "splits.csv").string());
        out << "InstanceID,fold\n";
        for (std::size_t i = 0; i < fold_of.size(); ++i) out << csv_escape(ds.ids[i]) << ',' << fold_of[i] << '\n';
    }

    struct FoldResult {
        double test_ba = 0.0, train_ba = 0.0;
        std::size_t macro = 0;
        std::int64_t micro = 0;
    };
    std::vector<FoldResult> results(splits.size());
    parallel_for(static_cast<Index>(splits.size()), cfg.workers, [&](Index f) {
        const auto& split = splits[static_cast<std::size_t>(f)];
        const int k = split.fold_index;
        const std::uint64_t fold_seed = cfg.seed + static_cast<std::uint64_t>(k);
        const Dataset train = ds.subset(split.train_rows);
        const Dataset test = ds.subset(split.test_rows);
        const FeatureWeights ek = multisurf(train, cfg.multisurf_subsample, fold_seed, 1);
        write_weights_csv(ek, train, fold_file(dir, "weights", k, ".csv"));
        Hyperparams hp = cfg.lcs;
        hp.seed = fold_seed;
        const Model model = fit(train, hp, ek);
        save_model(model, fold_file(dir, "model", k, ".json"));
        write_ft_csv(model.ft, model.features, fold_file(dir, "ft", k, ".csv"));
        write_rules_csv(model.population, model.features, model.class_names, fold_file(dir, "rules", k, ".csv"));

        const auto predicted = predict_all(model, test.values);
        const auto fitted = predict_all(model, train.values);
        const auto pred_path = fold_file(dir, "predictions", k, ".csv");
        std::ofstream out(pred_path, std::ios::binary);
        if (!out) throw RuntimeFailure("cannot write " + pred_path.string());
        out << "InstanceID,class,predicted,correct\n";
        for (Index i = 0; i < test.instance_count(); ++i) {
            const auto r = static_cast<std::size_t>(i);
            out << csv_escape(test.ids[r]) << ',' << csv_escape(test.class_names[static_cast<std::size_t>(test.classes[r])])
                << ',' << csv_escape(test.class_names[static_cast<std::size_t>(predicted[r])]) << ','
                << (predicted[r] == test.classes[r] ? 1 : 0) << '\n';
        }
        auto& res = results[static_cast<std::size_t>(f)];
        res.test_ba = balanced_accuracy(predicted, test.classes);
        res.train_ba = balanced_accuracy(fitted, train.classes);
        res.macro = model.population.size();
        res.micro = model.micro_size();
        log_line(log, "  fold " + std::to_string(k) + ": test balanced accuracy " + format_double(res.test_ba));
    });

    ordered_json summary;
    summary["folds"] = ordered_json::array();
    std::vector<double> accuracies;
    for (std::size_t f = 0; f < splits.size(); ++f) {
        const auto& r = results[f];
        summary["folds"].push_back({{"fold", splits[f].fold_index},
                                    {"test_balanced_accuracy", r.test_ba},
                                    {"train_balanced_accuracy", r.train_ba},
                                    {"macro_rules", r.macro},
                                    {"micro_rules", r.micro}});
        accuracies.push_back(r.test_ba);
    }
    summary["mean_test_balanced_accuracy"] = mean_of(accuracies);
    summary["stdev_test_balanced_accuracy"] = sample_stdev(accuracies);
    summary["instances"] = ds.instance_count();
    summary["features"] = ds.feature_count();
    summary["classes"] = ds.class_names;
    write_json(summary, dir / "summary.json");
}

/// Phase 1 outputs as read back from disk; later phases always work from these.
struct Phase1Data {
    Dataset ds;
    std::vector<CvSplit> splits;
    std::vector<Model> models;
    std::vector<bool> correct;
};

Phase1Data load_phase1(const PipelineConfig& cfg, const fs::path& dir, int phase)
{
    std::vector<fs::path> needed{dir / "dataset.csv", dir / "splits.csv", dir / "summary.json"};
    for (int k = 0; k < cfg.n_folds; ++k) {
        needed.push_back(fold_file(dir, "model", k, ".json"));
        needed.push_back(fold_file(dir, "predictions", k, ".csv"));
    }
    require_files(needed, phase, 1);

    Phase1Data p;
    CsvOptions opts;
    opts.id_column = "InstanceID";
    opts.discrete_limit = cfg.csv.discrete_limit;
    opts.missing_tokens = {""};
    {
        std::ifstream in(dir / "dataset.csv");
        std::string header;
        std::getline(in, header);
        const auto cols = split_csv_line(header);
        if (std::find(cols.begin(), cols.end(), "TrueCluster") != cols.end()) opts.true_cluster_column = "TrueCluster";
    }
    p.ds = load_dataset(dir / "dataset.csv", opts);

    std::unordered_map<std::string, Index> row_of;
    for (std::size_t i = 0; i < p.ds.ids.size(); ++i) row_of.emplace(p.ds.ids[i], static_cast<Index>(i));
    const auto split_rows = read_csv(dir / "splits.csv");
    std::vector<int> fold_of(p.ds.ids.size(), -1);
    for (std::size_t r = 1; r < split_rows.size(); ++r) {
        const auto it = row_of.find(split_rows[r].at(0));
        if (it == row_of.end()) throw DataError("splits.csv: unknown instance id '" + split_rows[r].at(0) + "'");
        fold_of[static_cast<std::size_t>(it->second)] = std::stoi(split_rows[r].at(1));
    }
    p.splits.resize(static_cast<std::size_t>(cfg.n_folds));
    for (int k = 0; k < cfg.n_folds; ++k) p.splits[static_cast<std::size_t>(k)].fold_index = k;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] < 0 || fold_of[i] >= cfg.n_folds)
            throw DataError("splits.csv: instance '" + p.ds.ids[i] + "' has no valid fold for n_folds = " +
                            std::to_string(cfg.n_folds));
        for (int k = 0; k < cfg.n_folds; ++k)
            (k == fold_of[i] ? p.splits[static_cast<std::size_t>(k)].test_rows
                             : p.splits[static_cast<std::size_t>(k)].train_rows)
                .push_back(static_cast<Index>(i));
    }

    p.correct.assign(p.ds.ids.size(), false);
    std::vector<bool> seen(p.ds.ids.size(), false);
    for (int k = 0; k < cfg.n_folds; ++k) {
        p.models.push_back(load_model(fold_file(dir, "model", k, ".json")));
        const auto rows = read_csv(fold_file(dir, "predictions", k, ".csv"));
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto it = row_of.find(rows[r].at(0));
            if (it == row_of.end()) throw DataError("predictions: unknown instance id '" + rows[r].at(0) + "'");
            p.correct[static_cast<std::size_t>(it->second)] = rows[r].at(3) == "1";
            seen[static_cast<std::size_t>(it->second)] = true;
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw DataError("no held-out prediction for instance '" + p.ds.ids[i] + "'");
    return p;
}

// phases 2 and 3 share the clustering exports --------------------------------------

struct ExportNames {
    std::string prefix;     // "" or "rule_"
    std::string id_header;  // InstanceID or rule_id
};

ordered_json export_analysis(const ClusterAnalysis& an, const Eigen::MatrixXd& data, const std::vector<std::string>& ids,
                             const std::vector<std::string>& columns, const ExportNames& names, const fs::path& dir,
                             const std::function<void(int, const ClusterAssignment&)>& per_cut_extra,
                             const std::function<std::vector<ClustermapBand>(const ClusterAssignment&)>& bands,
                             const std::string& title)
{
    write_dendrogram_json(an.row_tree, an.significance, ids, dir / (names.prefix + "dendrogram.json"));
    write_pvalues_csv(an.row_tree, an.significance, dir / (names.prefix + "pvalues.csv"));
    write_elbow_csv(an.elbow, dir / (names.prefix + "elbow.csv"));
    write_elbow_svg(an.elbow, title + " elbow", dir / (names.prefix + "elbow.svg"));
    for (int c = 1; c <= static_cast<int>(an.cuts.size()); ++c) {
        const auto& cut = an.cut(c);
        write_assignment_csv(cut, names.id_header, ids, dir / (names.prefix + "clusters_c" + std::to_string(c) + ".csv"));
        write_clustermap_svg(data, an.row_tree, an.col_tree, columns, bands(cut),
                             title + " clustermap (c = " + std::to_string(c) + ")",
                             dir / (names.prefix + "clustermap_c" + std::to_string(c) + ".svg"));
        per_cut_extra(c, cut);
    }
    ordered_json summary;
    summary["k_max"] = an.significance.k_max;
    summary["recommended_c"] = an.elbow.recommended;
    summary["cuts_exported"] = an.cuts.size();
    summary["elbow"] = ordered_json::array();
    for (const auto& [c, d] : an.elbow.curve) summary["elbow"].push_back({c, d});
    return summary;
}

SignificanceOptions significance_for(const PipelineConfig& cfg, std::uint64_t stream)
{
    SignificanceOptions s = cfg.significance;
    s.metric = Metric::pearson;
    s.seed = derive_seed(cfg.seed, stream);
    s.workers = cfg.workers;
    return s;
}

void run_phase2(const PipelineConfig& cfg, const Phase1Data& p1, const fs::path& dir, std::ostream* log)
{
    fs::create_directories(dir);
    std::vector<FeatureTrackingMatrix> normalized;
    for (const auto& m : p1.models) normalized.push_back(ft_normalize(m.ft));
    const FeatureTrackingMatrix merged = ft_merge(normalized, p1.splits, p1.ds.ids);
    write_ft_csv(merged, p1.ds.features, dir / "ft_merged.csv");

    AnalysisOptions opts;
    opts.significance = significance_for(cfg, 2);
    opts.max_cut_clusters = cfg.max_cut_clusters;
    const Eigen::MatrixXd data = merged.scores;
    log_line(log, "phase 2: clustering " + std::to_string(data.rows()) + " instances");
    const ClusterAnalysis an = analyze_clusters(data, opts);
    log_line(log, "  k_max " + std::to_string(an.significance.k_max) + ", recommended c " +
                      std::to_string(an.elbow.recommended));

    std::vector<std::string> class_labels;
    for (int c : p1.ds.classes) class_labels.push_back(p1.ds.class_names[static_cast<std::size_t>(c)]);
    const auto* truth = p1.ds.true_subgroups ? &*p1.ds.true_subgroups : nullptr;
    auto summary = export_analysis(
        an, data, p1.ds.ids, feature_names(p1.ds.features), {"", "InstanceID"}, dir,
        [&](int c, const ClusterAssignment& cut) {
            const auto tag = std::to_string(c);
            write_dataset_csv(p1.ds, dir / ("dataset_clusterID_c" + tag + ".csv"), {{"clusterID", to_strings(cut.labels)}});
            write_cluster_stats_csv(within_cluster_stats(cut, p1.correct, class_labels, truth),
                                    dir / ("cluster_stats_c" + tag + ".csv"));
        },
        [&](const ClusterAssignment& cut) {
            std::vector<ClustermapBand> bands{{"found", to_strings(cut.labels)}};
            if (truth) bands.push_back({"true", *truth});
            return bands;
        },
        "Feature tracking");
    write_json(summary, dir / "summary.json");
}

MergedPopulation merged_population(const PipelineConfig& cfg, const Phase1Data& p1)
{
    std::vector<FoldPopulation> folds(p1.models.size());
    parallel_for(static_cast<Index>(p1.models.size()), cfg.workers, [&](Index k) {
        const auto& model = p1.models[static_cast<std::size_t>(k)];
        auto& fold = folds[static_cast<std::size_t>(k)];
        fold.fold = p1.splits[static_cast<std::size_t>(k)].fold_index;
        fold.rules = cfg.compaction
                         ? compact(model.population, p1.ds.subset(p1.splits[static_cast<std::size_t>(k)].train_rows),
                                   model.hyperparams)
                         : model.population;
    });
    return merge_populations(folds, p1.models.front().features, p1.models.front().class_names);
}

void run_phase3(const PipelineConfig& cfg, const Phase1Data& p1, const fs::path& dir, std::ostream* log)
{
    fs::create_directories(dir);
    const MergedPopulation pop = merged_population(cfg, p1);
    write_merged_rules_csv(pop, dir / "rules_merged.csv");
    const RuleEncoding enc = encode_rules(pop);
    std::vector<std::string> rule_ids, rule_classes;
    for (std::size_t k = 0; k < pop.rules.size(); ++k) {
        rule_ids.push_back(std::to_string(k));
        rule_classes.push_back(pop.class_names[static_cast<std::size_t>(enc.classes[k])]);
    }
    {
        std::ofstream out(dir / "rule_encoding.csv", std::ios::binary);
        if (!out) throw RuntimeFailure("cannot write " + (dir / "rule_encoding.csv").string());
        out << "rule_id,class";
        for (const auto& f : pop.features) out << ',' << csv_escape(f.name);
        out << '\n';
        for (Index r = 0; r < enc.bits.rows(); ++r) {
            out << r << ',' << csv_escape(rule_classes[static_cast<std::size_t>(r)]);
            for (Index f = 0; f < enc.bits.cols(); ++f) out << ',' << static_cast<int>(enc.bits(r, f));
            out << '\n';
        }
    }
    if (enc.bits.rows() < 2) throw RuntimeFailure("phase 3: fewer than two merged rules to cluster");

    AnalysisOptions opts;
    opts.significance = significance_for(cfg, 3);
    opts.significance.metric = cfg.rule_metric;
    opts.collapse_duplicates = true;
    opts.max_cut_clusters = cfg.max_cut_clusters;
    log_line(log, "phase 3: clustering " + std::to_string(enc.bits.rows()) + " merged rules");
    const ClusterAnalysis an = analyze_clusters(enc.bits, opts);
    log_line(log, "  k_max " + std::to_string(an.significance.k_max) + ", recommended c " +
                      std::to_string(an.elbow.recommended));
    auto summary = export_analysis(
        an, enc.bits, rule_ids, feature_names(pop.features), {"rule_", "rule_id"}, dir,
        [](int, const ClusterAssignment&) {},
        [&](const ClusterAssignment& cut) {
            return std::vector<ClustermapBand>{{"found", to_strings(cut.labels)}, {"class", rule_classes}};
        },
        cfg.compaction ? "Rules (compacted)" : "Rules");
    summary["merged_rules"] = pop.rules.size();
    summary["compaction"] = cfg.compaction;
    write_json(summary, dir / "summary.json");
}

void run_phase4(const PipelineConfig& cfg, const Phase1Data& p1, const fs::path& dir, std::ostream* log)
{
    fs::create_directories(dir);
    const MergedPopulation pop = merged_population(cfg, p1);
    const auto net = co_occurrence(pop, cfg.network_numerosity_weighted);
    NetworkStyle style;
    style.edge_threshold = cfg.network_edge_threshold;
    style.linear_diameter = cfg.network_linear_diameter;
    export_network(net, dir, style);
    Index nodes = 0, edges = 0;
    for (Index a = 0; a < net.counts.rows(); ++a) {
        if (net.counts(a, a) > 0) ++nodes;
        for (Index b = a + 1; b < net.counts.cols(); ++b)
            if (net.counts(a, b) > 0) ++edges;
    }
    log_line(log, "phase 4: network with " + std::to_string(nodes) + " nodes, " + std::to_string(edges) + " edges");
    write_json({{"nodes", nodes}, {"edges", edges}, {"numerosity_weighted", cfg.network_numerosity_weighted}},
               dir / "summary.json");
}

} // namespace

ordered_json run_pipeline(const PipelineConfig& cfg, std::ostream* log)
{
    cfg.validate();
    const fs::path out = cfg.output_dir;
    fs::create_directories(out);
    const fs::path d1 = out / "phase1", d2 = out / "phase2", d3 = out / "phase3", d4 = out / "phase4";

    ordered_json timings;
    std::optional<Phase1Data> p1;
    auto phase1_data = [&](int phase) -> const Phase1Data& {
        if (!p1) p1 = load_phase1(cfg, d1, phase);
        return *p1;
    };
    for (int phase : cfg.phases) {
        const auto start = std::chrono::steady_clock::now();
        switch (phase) {
        case 1: run_phase1(cfg, d1, log); break;
        case 2: run_phase2(cfg, phase1_data(2), d2, log); break;
        case 3:
            require_files({d2 / "summary.json"}, 3, 2);
            run_phase3(cfg, phase1_data(3), d3, log);
            break;
        case 4:
            require_files({d3 / "summary.json", d3 / "rules_merged.csv"}, 4, 3);
            run_phase4(cfg, phase1_data(4), d4, log);
            break;
        }
        timings["phase" + std::to_string(phase) + "_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    ordered_json summary;
    summary["format"] = "lcsdive-run";
    summary["version"] = 1;
    summary["config"] = config_to_json(cfg);
    for (int phase = 1; phase <= 4; ++phase) {
        const fs::path file = out / ("phase" + std::to_string(phase)) / "summary.json";
        if (fs::exists(file)) summary["phase" + std::to_string(phase)] = read_json(file);
    }
    write_json(summary, out / "run_summary.json");
    write_json(timings, out / "timings.json");
    return summary;
}

void report(const fs::path& dir, std::ostream& out)
{
    const fs::path file = dir / "run_summary.json";
    if (!fs::exists(file)) throw DataError("no run_summary.json in " + dir.string());
    const auto summary = read_json(file);
    out << std::fixed << std::setprecision(4);
    if (summary.contains("phase1")) {
        const auto& p = summary["phase1"];
        out << "Fold  test balanced accuracy\n";
        for (const auto& f : p["folds"])
            out << std::setw(4) << f["fold"].get<int>() << "  " << f["test_balanced_accuracy"].get<double>() << '\n';
        out << "mean  " << p["mean_test_balanced_accuracy"].get<double>() << " (sd "
            << p["stdev_test_balanced_accuracy"].get<double>() << ")\n";
    }
    if (!summary.contains("phase2")) return;
    const auto& p2 = summary["phase2"];
    const int rec = p2["recommended_c"].get<int>();
    out << "\nInstance clusters: k_max = " << p2["k_max"].get<int>() << ", recommended c = " << rec << '\n';

    const auto ft = read_csv(dir / "phase2" / "ft_merged.csv");
    const std::size_t p = ft.front().size() - 1;
    std::vector<double> means(p, 0.0);
    for (std::size_t r = 1; r < ft.size(); ++r)
        for (std::size_t f = 0; f < p; ++f) means[f] += std::stod(ft[r][f + 1]);
    for (auto& m : means) m /= static_cast<double>(ft.size() - 1);
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
    out << "\nTop features by mean merged feature tracking score\n";
    for (std::size_t k = 0; k < std::min<std::size_t>(10, p); ++k)
        out << std::setw(4) << k + 1 << "  " << std::left << std::setw(16) << ft.front()[order[k] + 1] << std::right
            << means[order[k]] << '\n';

    const auto stats = read_csv(dir / "phase2" / ("cluster_stats_c" + std::to_string(rec) + ".csv"));
    out << "\nPer-cluster test accuracy at c = " << rec << "\ncluster  size  accuracy\n";
    for (std::size_t r = 1; r < stats.size(); ++r)
        out << std::setw(7) << stats[r][0] << std::setw(6) << stats[r][1] << "  " << std::stod(stats[r][3]) << '\n';
    if (summary.contains("phase3"))
        out << "\nRule clusters: " << summary["phase3"]["merged_rules"].get<int>()
            << " merged rules, recommended c = " << summary["phase3"]["recommended_c"].get<int>() << '\n';
}

} // namespace lcsdive
