#include "lcsdive/ruleviz.hpp"

#include "lcsdive/svg.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <tuple>

namespace lcsdive {

namespace {

using SpecKey = std::tuple<int, bool, double, double>;
using RuleKey = std::pair<int, std::vector<SpecKey>>;

RuleKey key_of(const Rule& r)
{
    RuleKey key{r.label, {}};
    for (const auto& s : r.condition) key.second.emplace_back(s.feature, s.interval, s.lo, s.hi);
    return key;
}

} // namespace

MergedPopulation merge_populations(const std::vector<FoldPopulation>& folds,
                                   const std::vector<FeatureDescriptor>& features,
                                   const std::vector<std::string>& class_names)
{
    std::vector<const FoldPopulation*> ordered;
    for (const auto& f : folds) ordered.push_back(&f);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const FoldPopulation* a, const FoldPopulation* b) { return a->fold < b->fold; });

    struct Accumulator {
        Rule rule;
        double accuracy_sum = 0.0;
        double fitness_sum = 0.0;
        std::vector<int> folds;
    };
    std::map<RuleKey, Accumulator> merged;
    const auto p = static_cast<int>(features.size());
    for (const auto* fold : ordered) {
        for (const auto& r : fold->rules) {
            for (const auto& s : r.condition)
                if (s.feature < 0 || s.feature >= p)
                    throw DataError("merge_populations: fold " + std::to_string(fold->fold) +
                                    " has a rule on feature index " + std::to_string(s.feature) +
                                    " outside the shared schema");
            if (r.label < 0 || r.label >= static_cast<int>(class_names.size()))
                throw DataError("merge_populations: rule class outside the shared class list");
            auto [it, inserted] = merged.try_emplace(key_of(r));
            auto& acc = it->second;
            if (inserted) {
                acc.rule = r;
                acc.rule.numerosity = 0;
                acc.rule.match_count = 0;
                acc.rule.correct_count = 0;
            }
            acc.rule.numerosity += r.numerosity;
            acc.rule.match_count += r.match_count;
            acc.rule.correct_count += r.correct_count;
            acc.accuracy_sum += r.accuracy * r.numerosity;
            acc.fitness_sum += r.fitness * r.numerosity;
            if (acc.folds.empty() || acc.folds.back() != fold->fold) acc.folds.push_back(fold->fold);
        }
    }

    MergedPopulation out;
    out.features = features;
    out.class_names = class_names;
    for (auto& [_, acc] : merged) {
        acc.rule.accuracy = acc.accuracy_sum / acc.rule.numerosity;
        acc.rule.fitness = acc.fitness_sum / acc.rule.numerosity;
        out.rules.push_back({std::move(acc.rule), std::move(acc.folds)});
    }
    return out;
}

RuleEncoding encode_rules(const MergedPopulation& pop)
{
    RuleEncoding enc;
    enc.bits = Eigen::MatrixXd::Zero(static_cast<Index>(pop.rules.size()), static_cast<Index>(pop.features.size()));
    for (std::size_t k = 0; k < pop.rules.size(); ++k) {
        for (const auto& s : pop.rules[k].rule.condition) enc.bits(static_cast<Index>(k), s.feature) = 1.0;
        enc.classes.push_back(pop.rules[k].rule.label);
    }
    return enc;
}

CoOccurrenceNetwork co_occurrence(const MergedPopulation& pop, bool numerosity_weighted)
{
    CoOccurrenceNetwork net;
    for (const auto& f : pop.features) net.feature_names.push_back(f.name);
    const auto p = static_cast<Index>(pop.features.size());
    net.counts = CountMatrix::Zero(p, p);
    net.numerosity_weighted = numerosity_weighted;
    for (const auto& m : pop.rules) {
        const std::int64_t w = numerosity_weighted ? m.rule.numerosity : 1;
        const auto& cond = m.rule.condition;
        for (std::size_t a = 0; a < cond.size(); ++a) {
            net.counts(cond[a].feature, cond[a].feature) += w;
            for (std::size_t b = a + 1; b < cond.size(); ++b) {
                net.counts(cond[a].feature, cond[b].feature) += w;
                net.counts(cond[b].feature, cond[a].feature) += w;
            }
        }
    }
    return net;
}

namespace {

std::string dot_id(const std::string& s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << text;
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

} // namespace

void export_network(const CoOccurrenceNetwork& net, const std::filesystem::path& dir, const NetworkStyle& style)
{
    const Index p = net.counts.rows();
    std::vector<Index> nodes;
    for (Index f = 0; f < p; ++f)
        if (net.counts(f, f) > 0) nodes.push_back(f);
    struct Edge {
        Index a, b;
        std::int64_t count;
    };
    std::vector<Edge> edges;
    for (Index a = 0; a < p; ++a)
        for (Index b = a + 1; b < p; ++b)
            if (net.counts(a, b) > 0) edges.push_back({a, b, net.counts(a, b)});

    std::string dot = "graph cooccurrence {\n  node [shape=circle];\n";
    for (Index f : nodes)
        dot += "  " + dot_id(net.feature_names[static_cast<std::size_t>(f)]) +
               " [weight=" + std::to_string(net.counts(f, f)) + "];\n";
    for (const auto& e : edges)
        dot += "  " + dot_id(net.feature_names[static_cast<std::size_t>(e.a)]) + " -- " +
               dot_id(net.feature_names[static_cast<std::size_t>(e.b)]) + " [weight=" + std::to_string(e.count) + "];\n";
    dot += "}\n";
    write_text(dir / "network.dot", dot);

    nlohmann::ordered_json doc;
    doc["numerosity_weighted"] = net.numerosity_weighted;
    doc["nodes"] = nlohmann::ordered_json::array();
    for (Index f : nodes)
        doc["nodes"].push_back({{"feature", net.feature_names[static_cast<std::size_t>(f)]}, {"count", net.counts(f, f)}});
    doc["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : edges)
        doc["edges"].push_back({{"source", net.feature_names[static_cast<std::size_t>(e.a)]},
                                {"target", net.feature_names[static_cast<std::size_t>(e.b)]},
                                {"count", e.count}});
    write_text(dir / "network.json", doc.dump(1) + "\n");

    // circular layout in feature order
    constexpr double size = 720, radius = 260, max_node = 28;
    svg::Document svgdoc(size, size);
    const double cx = size / 2, cy = size / 2;
    std::map<Index, std::pair<double, double>> at;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(nodes.size()) -
                             std::numbers::pi / 2;
        at[nodes[k]] = {cx + radius * std::cos(angle), cy + radius * std::sin(angle)};
    }
    std::int64_t max_count = 1, max_edge = 1;
    for (Index f : nodes) max_count = std::max(max_count, net.counts(f, f));
    for (const auto& e : edges) max_edge = std::max(max_edge, e.count);
    for (const auto& e : edges) {
        if (e.count < style.edge_threshold) continue;
        const auto [x1, y1] = at[e.a];
        const auto [x2, y2] = at[e.b];
        svgdoc.line(x1, y1, x2, y2, "#7f7f7f", 0.5 + 7.5 * static_cast<double>(e.count) / static_cast<double>(max_edge));
    }
    for (Index f : nodes) {
        const auto [x, y] = at[f];
        const double share = static_cast<double>(net.counts(f, f)) / static_cast<double>(max_count);
        const double diameter = max_node * (style.linear_diameter ? share : std::sqrt(share));
        svgdoc.circle(x, y, std::max(diameter, 2.0) / 2.0 + 4.0, "#1f77b4", "#08306b");
        const double lx = cx + (x - cx) * 1.14, ly = cy + (y - cy) * 1.14;
        svgdoc.text(lx, ly + 4, net.feature_names[static_cast<std::size_t>(f)], 11, "middle");
    }
    svgdoc.save(dir / "network.svg");
}

void write_merged_rules_csv(const MergedPopulation& pop, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << "rule_id,class,numerosity,accuracy,fitness,match_count,correct_count,folds,condition\n";
    for (std::size_t k = 0; k < pop.rules.size(); ++k) {
        const auto& r = pop.rules[k].rule;
        std::string folds;
        for (int f : pop.rules[k].folds) folds += (folds.empty() ? "" : ";") + std::to_string(f);
        out << k << ',' << csv_escape(pop.class_names[static_cast<std::size_t>(r.label)]) << ',' << r.numerosity << ','
            << format_double(r.accuracy) << ',' << format_double(r.fitness) << ',' << r.match_count << ','
            << r.correct_count << ',' << folds << ',' << csv_escape(format_condition(r.condition, pop.features)) << '\n';
    }
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

} // namespace lcsdive
