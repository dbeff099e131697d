#include "lcsdive/lcs.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace lcsdive {

using nlohmann::json;

namespace {

constexpr const char* kModelFormat = "lcsdive-model";
constexpr int kModelVersion = 1;

} // namespace

Prediction predict(const Model& model, const Eigen::Ref<const Eigen::RowVectorXd>& instance)
{
    Prediction out;
    for (const auto& r : model.population)
        if (matches(r, instance)) out.votes[r.label] += r.fitness * r.numerosity;
    out.label = model.majority_class;
    double best = 0.0;
    bool tie = false;
    for (const auto& [label, vote] : out.votes) {
        if (vote > best) {
            best = vote;
            out.label = label;
            tie = false;
        } else if (vote == best && vote > 0.0) {
            tie = true;
        }
    }
    if (tie || !(best > 0.0)) out.label = model.majority_class;
    return out;
}

std::vector<int> predict_all(const Model& model, const RowMatrixXd& values)
{
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(values.rows()));
    for (Index i = 0; i < values.rows(); ++i) out.push_back(predict(model, values.row(i)).label);
    return out;
}

double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth, int n_classes)
{
    if (predictions.size() != truth.size()) throw DataError("balanced_accuracy: length mismatch");
    std::vector<double> hits(static_cast<std::size_t>(n_classes), 0.0), totals(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= n_classes) throw DataError("balanced_accuracy: label out of range");
        totals[static_cast<std::size_t>(truth[i])] += 1.0;
        if (predictions[i] == truth[i]) hits[static_cast<std::size_t>(truth[i])] += 1.0;
    }
    double sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        if (totals[static_cast<std::size_t>(c)] == 0.0)
            throw DataError("balanced_accuracy: class " + std::to_string(c) + " absent from truth");
        sum += hits[static_cast<std::size_t>(c)] / totals[static_cast<std::size_t>(c)];
    }
    return sum / n_classes;
}

double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth)
{
    if (predictions.size() != truth.size()) throw DataError("balanced_accuracy: length mismatch");
    if (truth.empty()) throw DataError("balanced_accuracy: empty input");
    std::set<int> present(truth.begin(), truth.end());
    std::vector<int> remap(static_cast<std::size_t>(*present.rbegin() + 1), -1);
    int next = 0;
    for (int c : present) remap[static_cast<std::size_t>(c)] = next++;
    std::vector<int> t, p;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        t.push_back(remap[static_cast<std::size_t>(truth[i])]);
        const int q = predictions[i];
        p.push_back(q >= 0 && q < static_cast<int>(remap.size()) ? remap[static_cast<std::size_t>(q)] : -1);
    }
    return balanced_accuracy(p, t, next);
}

std::vector<Rule> compact(const std::vector<Rule>& population, const Dataset& train, const Hyperparams& hp,
                          CompactionStrategy)
{
    std::vector<const Rule*> candidates;
    for (const auto& r : population)
        if (r.accuracy > 0.5 && static_cast<double>(r.match_count) >= hp.theta_sub) candidates.push_back(&r);
    std::stable_sort(candidates.begin(), candidates.end(), [](const Rule* a, const Rule* b) {
        if (a->accuracy != b->accuracy) return a->accuracy > b->accuracy;
        if (a->numerosity != b->numerosity) return a->numerosity > b->numerosity;
        return a->specificity() < b->specificity();
    });
    std::vector<bool> covered(static_cast<std::size_t>(train.instance_count()), false);
    std::vector<Rule> kept;
    for (const Rule* r : candidates) {
        bool useful = false;
        for (Index i = 0; i < train.instance_count(); ++i) {
            const auto row = static_cast<std::size_t>(i);
            if (covered[row] || train.classes[row] != r->label || !matches(*r, train.values.row(i))) continue;
            covered[row] = true;
            useful = true;
        }
        if (useful) kept.push_back(*r);
    }
    return kept;
}

// Serialization --------------------------------------------------------------

namespace {

json hyperparams_to_json(const Hyperparams& hp)
{
    json j{{"iterations", hp.iterations}, {"N", hp.N},         {"nu", hp.nu},
           {"beta", hp.beta},             {"theta_GA", hp.theta_GA}, {"chi", hp.chi},
           {"mu", hp.mu},                 {"theta_del", hp.theta_del}, {"theta_sub", hp.theta_sub},
           {"acc_sub", hp.acc_sub},       {"seed", hp.seed}};
    j["rsl_override"] = hp.rsl_override ? json(*hp.rsl_override) : json(nullptr);
    return j;
}

Hyperparams hyperparams_from_json(const json& j)
{
    Hyperparams hp;
    hp.iterations = j.at("iterations").get<std::int64_t>();
    hp.N = j.at("N").get<int>();
    hp.nu = j.at("nu").get<double>();
    hp.beta = j.at("beta").get<double>();
    hp.theta_GA = j.at("theta_GA").get<double>();
    hp.chi = j.at("chi").get<double>();
    hp.mu = j.at("mu").get<double>();
    hp.theta_del = j.at("theta_del").get<double>();
    hp.theta_sub = j.at("theta_sub").get<double>();
    hp.acc_sub = j.at("acc_sub").get<double>();
    hp.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("rsl_override").is_null()) hp.rsl_override = j.at("rsl_override").get<int>();
    return hp;
}

json feature_to_json(const FeatureDescriptor& d)
{
    return json{{"name", d.name},
                {"kind", d.kind == FeatureKind::discrete ? "discrete" : "continuous"},
                {"levels", d.levels},
                {"level_names", d.level_names},
                {"min", d.min},
                {"max", d.max}};
}

FeatureDescriptor feature_from_json(const json& j)
{
    FeatureDescriptor d;
    d.name = j.at("name").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "discrete" && kind != "continuous") throw DataError("model: unknown feature kind '" + kind + "'");
    d.kind = kind == "discrete" ? FeatureKind::discrete : FeatureKind::continuous;
    d.levels = j.at("levels").get<std::vector<double>>();
    d.level_names = j.at("level_names").get<std::vector<std::string>>();
    d.min = j.at("min").get<double>();
    d.max = j.at("max").get<double>();
    return d;
}

json rule_to_json(const Rule& r)
{
    json cond = json::array();
    for (const auto& s : r.condition) {
        if (s.interval)
            cond.push_back(json{{"feature", s.feature}, {"lo", s.lo}, {"hi", s.hi}});
        else
            cond.push_back(json{{"feature", s.feature}, {"value", s.lo}});
    }
    return json{{"condition", cond},
                {"class", r.label},
                {"numerosity", r.numerosity},
                {"match_count", r.match_count},
                {"correct_count", r.correct_count},
                {"accuracy", r.accuracy},
                {"fitness", r.fitness},
                {"avg_match_set_size", r.avg_match_set_size},
                {"ga_timestamp", r.ga_timestamp},
                {"init_timestamp", r.init_timestamp}};
}

Rule rule_from_json(const json& j, std::size_t n_features)
{
    Rule r;
    for (const auto& s : j.at("condition")) {
        FeatureSpec spec;
        spec.feature = s.at("feature").get<int>();
        if (spec.feature < 0 || static_cast<std::size_t>(spec.feature) >= n_features)
            throw DataError("model: rule references unknown feature");
        if (s.contains("value")) {
            spec.lo = spec.hi = s.at("value").get<double>();
        } else {
            spec.interval = true;
            spec.lo = s.at("lo").get<double>();
            spec.hi = s.at("hi").get<double>();
        }
        r.condition.push_back(spec);
    }
    r.label = j.at("class").get<int>();
    r.numerosity = j.at("numerosity").get<int>();
    r.match_count = j.at("match_count").get<std::int64_t>();
    r.correct_count = j.at("correct_count").get<std::int64_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.fitness = j.at("fitness").get<double>();
    r.avg_match_set_size = j.at("avg_match_set_size").get<double>();
    r.ga_timestamp = j.at("ga_timestamp").get<std::int64_t>();
    r.init_timestamp = j.at("init_timestamp").get<std::int64_t>();
    return r;
}

} // namespace

void save_model(const Model& model, const std::filesystem::path& path)
{
    json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["hyperparams"] = hyperparams_to_json(model.hyperparams);
    j["features"] = json::array();
    for (const auto& f : model.features) j["features"].push_back(feature_to_json(f));
    j["class_names"] = model.class_names;
    j["majority_class"] = model.majority_class;
    j["rsl"] = model.rsl;
    j["training_log"] = model.training_log;
    j["population"] = json::array();
    for (const auto& r : model.population) j["population"].push_back(rule_to_json(r));
    json ft;
    ft["ids"] = model.ft.ids;
    ft["scores"] = json::array();
    for (Index i = 0; i < model.ft.scores.rows(); ++i) {
        std::vector<double> row(model.ft.scores.row(i).begin(), model.ft.scores.row(i).end());
        ft["scores"].push_back(row);
    }
    j["ft"] = std::move(ft);

    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write model: " + path.string());
    out << j.dump(1) << '\n';
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    json j;
    try {
        j = json::parse(buffer.str());
    } catch (const json::exception& e) {
        throw DataError("corrupt model file " + path.string() + ": " + e.what());
    }
    try {
        if (j.value("format", "") != kModelFormat) throw DataError("not a model file: " + path.string());
        const int version = j.at("version").get<int>();
        if (version != kModelVersion)
            throw DataError("model version " + std::to_string(version) + " unsupported (expected " +
                            std::to_string(kModelVersion) + ")");
        Model m;
        m.hyperparams = hyperparams_from_json(j.at("hyperparams"));
        for (const auto& f : j.at("features")) m.features.push_back(feature_from_json(f));
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        m.majority_class = j.at("majority_class").get<int>();
        m.rsl = j.at("rsl").get<int>();
        m.training_log = j.at("training_log").get<std::vector<double>>();
        for (const auto& r : j.at("population")) m.population.push_back(rule_from_json(r, m.features.size()));
        const auto& ft = j.at("ft");
        m.ft.ids = ft.at("ids").get<std::vector<std::string>>();
        const auto& rows = ft.at("scores");
        const auto p = static_cast<Index>(m.features.size());
        if (rows.size() != m.ft.ids.size()) throw DataError("model: FT row count does not match id count");
        m.ft.scores.resize(static_cast<Index>(rows.size()), p);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto values = rows[i].get<std::vector<double>>();
            if (static_cast<Index>(values.size()) != p) throw DataError("model: FT row width mismatch");
            for (Index f = 0; f < p; ++f) m.ft.scores(static_cast<Index>(i), f) = values[static_cast<std::size_t>(f)];
        }
        return m;
    } catch (const json::exception& e) {
        throw DataError("corrupt model file " + path.string() + ": " + e.what());
    }
}

std::string format_condition(const RuleCondition& condition, const std::vector<FeatureDescriptor>& features)
{
    std::string out;
    for (const auto& s : condition) {
        if (!out.empty()) out += ';';
        const auto& d = features[static_cast<std::size_t>(s.feature)];
        if (s.interval)
            out += d.name + "\xE2\x88\x88[" + format_double(s.lo) + "," + format_double(s.hi) + "]";
        else
            out += d.name + "=" + d.value_label(s.lo);
    }
    return out;
}

void write_rules_csv(const std::vector<Rule>& population, const std::vector<FeatureDescriptor>& features,
                     const std::vector<std::string>& class_names, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << "rule_id,class,numerosity,accuracy,fitness,match_count,correct_count,condition\n";
    for (std::size_t k = 0; k < population.size(); ++k) {
        const auto& r = population[k];
        out << k << ',' << csv_escape(class_names[static_cast<std::size_t>(r.label)]) << ',' << r.numerosity << ','
            << format_double(r.accuracy) << ',' << format_double(r.fitness) << ',' << r.match_count << ','
            << r.correct_count << ',' << csv_escape(format_condition(r.condition, features)) << '\n';
    }
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

void write_ft_csv(const FeatureTrackingMatrix& ft, const std::vector<FeatureDescriptor>& features,
                  const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << "InstanceID";
    for (const auto& f : features) out << ',' << csv_escape(f.name);
    out << '\n';
    for (Index i = 0; i < ft.scores.rows(); ++i) {
        out << csv_escape(ft.ids[static_cast<std::size_t>(i)]);
        for (Index f = 0; f < ft.scores.cols(); ++f) out << ',' << format_double(ft.scores(i, f));
        out << '\n';
    }
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

} // namespace lcsdive
