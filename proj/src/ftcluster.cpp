#include "lcsdive/ftcluster.hpp"

#include "lcsdive/svg.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

namespace lcsdive {

FeatureTrackingMatrix ft_normalize(const FeatureTrackingMatrix& ft)
{
    FeatureTrackingMatrix out = ft;
    for (Index i = 0; i < out.scores.rows(); ++i) {
        if (out.scores.cols() == 0) break;
        const double top = out.scores.row(i).maxCoeff();
        if (top > 0.0) out.scores.row(i) /= top;
    }
    return out;
}

FeatureTrackingMatrix ft_merge(const std::vector<FeatureTrackingMatrix>& per_fold, const std::vector<CvSplit>& splits,
                               const std::vector<std::string>& ids)
{
    if (per_fold.size() != splits.size()) throw DataError("ft_merge: one FT matrix per fold is required");
    if (per_fold.empty()) throw DataError("ft_merge: no fold matrices");
    const Index p = per_fold.front().scores.cols();
    std::unordered_map<std::string, Index> position;
    for (std::size_t i = 0; i < ids.size(); ++i) position.emplace(ids[i], static_cast<Index>(i));

    std::vector<std::size_t> order(per_fold.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return splits[a].fold_index < splits[b].fold_index; });

    FeatureTrackingMatrix merged;
    merged.ids = ids;
    merged.scores = RowMatrixXd::Zero(static_cast<Index>(ids.size()), p);
    std::vector<int> counts(ids.size(), 0);
    for (std::size_t k : order) {
        const auto& fold = per_fold[k];
        if (fold.scores.cols() != p) throw DataError("ft_merge: fold matrices have different feature counts");
        if (fold.scores.rows() != static_cast<Index>(splits[k].train_rows.size()))
            throw DataError("ft_merge: fold " + std::to_string(splits[k].fold_index) +
                            " FT rows do not match its training split");
        for (Index r = 0; r < fold.scores.rows(); ++r) {
            const auto it = position.find(fold.ids[static_cast<std::size_t>(r)]);
            if (it == position.end())
                throw DataError("ft_merge: unknown instance id '" + fold.ids[static_cast<std::size_t>(r)] + "'");
            merged.scores.row(it->second) += fold.scores.row(r);
            ++counts[static_cast<std::size_t>(it->second)];
        }
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (counts[i] == 0) throw DataError("ft_merge: instance '" + ids[i] + "' is missing from every fold");
        merged.scores.row(static_cast<Index>(i)) /= static_cast<double>(counts[i]);
    }
    return merged;
}

ClusterAnalysis analyze_clusters(const Eigen::MatrixXd& data, const AnalysisOptions& options)
{
    const Metric metric = options.significance.metric;
    ClusterAnalysis out;
    out.row_tree = cluster_rows(data, metric, options.collapse_duplicates);
    if (options.cluster_columns && data.cols() >= 2)
        out.col_tree = cluster_rows(data.transpose(), metric, options.collapse_duplicates);
    else
        out.col_tree.leaf_count = data.cols();
    out.significance = significance_test(out.row_tree, data, options.significance);

    const int top = static_cast<int>(std::min<Index>(out.significance.k_max, options.max_cut_clusters));
    for (int c = 1; c <= top; ++c) {
        out.cuts.push_back(cut_clusters(out.row_tree, out.significance, c));
        out.elbow.curve.emplace_back(c, distortion(data, out.cuts.back()));
    }
    out.elbow.recommended = elbow_recommend(out.elbow.curve);
    return out;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

} // namespace

void write_matrix_csv(const Eigen::MatrixXd& data, const std::string& id_header, const std::vector<std::string>& ids,
                      const std::vector<std::string>& columns, const std::filesystem::path& path)
{
    auto out = open_output(path);
    out << csv_escape(id_header);
    for (const auto& c : columns) out << ',' << csv_escape(c);
    out << '\n';
    for (Index i = 0; i < data.rows(); ++i) {
        out << csv_escape(ids[static_cast<std::size_t>(i)]);
        for (Index j = 0; j < data.cols(); ++j) out << ',' << format_double(data(i, j));
        out << '\n';
    }
    finish(out, path);
}

void write_dendrogram_json(const Dendrogram& tree, const SignificanceResult& sig,
                           const std::vector<std::string>& leaf_labels, const std::filesystem::path& path)
{
    using nlohmann::ordered_json;
    std::vector<ordered_json> nodes(static_cast<std::size_t>(tree.node_count()));
    for (Index leaf = 0; leaf < tree.leaf_count; ++leaf)
        nodes[static_cast<std::size_t>(leaf)] = {{"node", leaf}, {"label", leaf_labels[static_cast<std::size_t>(leaf)]}};
    for (std::size_t k = 0; k < tree.merges.size(); ++k) {
        const auto& m = tree.merges[k];
        ordered_json node{{"node", tree.leaf_count + static_cast<Index>(k)}, {"height", m.height}, {"size", m.size}};
        const auto& p = k < sig.p_values.size() ? sig.p_values[k] : std::nullopt;
        node["p_value"] = p ? ordered_json(*p) : ordered_json(nullptr);
        node["children"] = ordered_json::array({std::move(nodes[static_cast<std::size_t>(m.left)]),
                                                std::move(nodes[static_cast<std::size_t>(m.right)])});
        nodes[static_cast<std::size_t>(tree.leaf_count) + k] = std::move(node);
    }
    ordered_json doc{{"leaf_count", tree.leaf_count},
                     {"alpha", sig.alpha},
                     {"n_sim", sig.n_sim},
                     {"k_max", sig.k_max},
                     {"root", tree.node_count() > 0 ? std::move(nodes[static_cast<std::size_t>(tree.root())])
                                                    : ordered_json(nullptr)}};
    auto out = open_output(path);
    out << doc.dump(1) << '\n';
    finish(out, path);
}

void write_pvalues_csv(const Dendrogram& tree, const SignificanceResult& sig, const std::filesystem::path& path)
{
    const std::set<Index> terminal(sig.terminal.begin(), sig.terminal.end());
    auto out = open_output(path);
    out << "node,left,right,height,size,p_value,significant,terminal\n";
    for (std::size_t k = 0; k < tree.merges.size(); ++k) {
        const auto& p = sig.p_values[k];
        if (!p) continue;
        const auto& m = tree.merges[k];
        const Index id = tree.leaf_count + static_cast<Index>(k);
        out << id << ',' << m.left << ',' << m.right << ',' << format_double(m.height) << ',' << m.size << ','
            << format_double(*p) << ',' << (*p < sig.alpha ? 1 : 0) << ',' << (terminal.count(id) ? 1 : 0) << '\n';
    }
    finish(out, path);
}

void write_assignment_csv(const ClusterAssignment& assignment, const std::string& id_header,
                          const std::vector<std::string>& ids, const std::filesystem::path& path)
{
    auto out = open_output(path);
    out << csv_escape(id_header) << ",clusterID\n";
    for (std::size_t i = 0; i < assignment.labels.size(); ++i)
        out << csv_escape(ids[i]) << ',' << assignment.labels[i] << '\n';
    finish(out, path);
}

void write_cluster_stats_csv(const std::vector<ClusterStats>& stats, const std::filesystem::path& path)
{
    std::set<std::string> classes, subgroups;
    for (const auto& s : stats) {
        for (const auto& [k, _] : s.class_counts) classes.insert(k);
        for (const auto& [k, _] : s.subgroup_counts) subgroups.insert(k);
    }
    auto out = open_output(path);
    out << "clusterID,size,correct,accuracy";
    for (const auto& c : classes) out << ',' << csv_escape("class_" + c);
    for (const auto& g : subgroups) out << ',' << csv_escape("true_" + g);
    out << '\n';
    auto count = [](const std::map<std::string, Index>& m, const std::string& k) {
        const auto it = m.find(k);
        return it == m.end() ? Index{0} : it->second;
    };
    for (const auto& s : stats) {
        out << s.label << ',' << s.size << ',' << s.correct << ',' << format_double(s.accuracy);
        for (const auto& c : classes) out << ',' << count(s.class_counts, c);
        for (const auto& g : subgroups) out << ',' << count(s.subgroup_counts, g);
        out << '\n';
    }
    finish(out, path);
}

void write_elbow_csv(const ElbowResult& elbow, const std::filesystem::path& path)
{
    auto out = open_output(path);
    out << "c,distortion,recommended\n";
    for (const auto& [c, d] : elbow.curve) out << c << ',' << format_double(d) << ',' << (c == elbow.recommended) << '\n';
    finish(out, path);
}

void write_elbow_svg(const ElbowResult& elbow, const std::string& title, const std::filesystem::path& path)
{
    constexpr double W = 640, H = 420, left = 70, right = 20, top = 40, bottom = 50;
    svg::Document doc(W, H);
    doc.text(W / 2, 24, title, 14, "middle");
    const double pw = W - left - right, ph = H - top - bottom;
    doc.line(left, top + ph, left + pw, top + ph, "#333333").line(left, top, left, top + ph, "#333333");
    doc.text(left + pw / 2, H - 12, "cluster count c", 11, "middle");
    doc.text(18, top + ph / 2, "distortion", 11, "middle", -90);
    if (!elbow.curve.empty()) {
        const int c0 = elbow.curve.front().first, c1 = elbow.curve.back().first;
        double dmax = 0.0;
        for (const auto& [_, d] : elbow.curve) dmax = std::max(dmax, d);
        if (dmax <= 0.0) dmax = 1.0;
        auto x = [&](int c) { return c1 == c0 ? left + pw / 2 : left + pw * (c - c0) / static_cast<double>(c1 - c0); };
        auto y = [&](double d) { return top + ph * (1.0 - d / dmax); };
        std::string points;
        for (const auto& [c, d] : elbow.curve) points += svg::num(x(c)) + "," + svg::num(y(d)) + " ";
        doc.polyline(points, "#1f77b4", 1.5);
        const int step = std::max(1, static_cast<int>(elbow.curve.size()) / 20);
        for (std::size_t k = 0; k < elbow.curve.size(); ++k) {
            const auto [c, d] = elbow.curve[k];
            const bool chosen = c == elbow.recommended;
            doc.circle(x(c), y(d), chosen ? 5 : 2.5, chosen ? "#d62728" : "#1f77b4");
            if (k % static_cast<std::size_t>(step) == 0 || chosen)
                doc.text(x(c), top + ph + 16, std::to_string(c), 9, "middle");
        }
        doc.text(left + 8, top + 12, "recommended c = " + std::to_string(elbow.recommended), 11);
        doc.text(left - 6, top + 4, format_double(dmax), 9, "end").text(left - 6, top + ph, "0", 9, "end");
    }
    doc.save(path);
}

namespace {

/// Leaf position (in leaf order) and drawing coordinate of every node, children before parents.
std::vector<double> node_positions(const Dendrogram& tree, const std::vector<Index>& order)
{
    std::vector<double> pos(static_cast<std::size_t>(tree.node_count()));
    for (std::size_t k = 0; k < order.size(); ++k) pos[static_cast<std::size_t>(order[k])] = static_cast<double>(k) + 0.5;
    for (std::size_t k = 0; k < tree.merges.size(); ++k)
        pos[static_cast<std::size_t>(tree.leaf_count) + k] =
            0.5 * (pos[static_cast<std::size_t>(tree.merges[k].left)] + pos[static_cast<std::size_t>(tree.merges[k].right)]);
    return pos;
}

double max_height(const Dendrogram& tree)
{
    double h = 0.0;
    for (const auto& m : tree.merges) h = std::max(h, m.height);
    return h > 0.0 ? h : 1.0;
}

std::vector<Index> axis_order(const Dendrogram& tree, Index n)
{
    if (tree.merges.empty() || tree.leaf_count != n) {
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index{0});
        return order;
    }
    return tree.leaf_order();
}

} // namespace

void write_clustermap_svg(const Eigen::MatrixXd& data, const Dendrogram& row_tree, const Dendrogram& col_tree,
                          const std::vector<std::string>& column_names, const std::vector<ClustermapBand>& bands,
                          const std::string& title, const std::filesystem::path& path)
{
    const Index m = data.rows(), p = data.cols();
    const auto row_order = axis_order(row_tree, m);
    const auto col_order = axis_order(col_tree, p);

    constexpr double dendro = 110, band_w = 14, band_gap = 3, title_h = 30, label_h = 110, legend_w = 90;
    const double map_w = std::clamp(static_cast<double>(p) * 18.0, 240.0, 960.0);
    const double map_h = std::clamp(static_cast<double>(m) * 3.0, 240.0, 1200.0);
    const double cw = p > 0 ? map_w / static_cast<double>(p) : 1.0;
    const double ch = m > 0 ? map_h / static_cast<double>(m) : 1.0;
    const double x0 = dendro + static_cast<double>(bands.size()) * (band_w + band_gap) + 6;
    const double y0 = title_h + dendro;
    svg::Document doc(x0 + map_w + legend_w, y0 + map_h + label_h);
    doc.text((x0 + map_w) / 2, 20, title, 14, "middle");

    // heatmap: one path per quantised colour level, one unit subpath per cell in a scaled group
    double lo = m > 0 && p > 0 ? data.minCoeff() : 0.0, hi = m > 0 && p > 0 ? data.maxCoeff() : 1.0;
    if (!(hi > lo)) hi = lo + 1.0;
    constexpr int levels = 64;
    std::vector<std::string> paths(levels);
    for (std::size_t r = 0; r < row_order.size(); ++r)
        for (std::size_t c = 0; c < col_order.size(); ++c) {
            const double t = (data(row_order[r], col_order[c]) - lo) / (hi - lo);
            const int level = std::clamp(static_cast<int>(t * levels), 0, levels - 1);
            paths[static_cast<std::size_t>(level)] += "M" + std::to_string(c) + " " + std::to_string(r) + "h1v1h-1z";
        }
    std::string heat = "<g transform=\"translate(" + svg::num(x0) + " " + svg::num(y0) + ") scale(" + svg::num(cw) + " " +
                       svg::num(ch) + ")\" shape-rendering=\"crispEdges\">\n";
    for (int level = 0; level < levels; ++level) {
        if (paths[static_cast<std::size_t>(level)].empty()) continue;
        heat += "<path fill=\"" + svg::hex(svg::gradient((level + 0.5) / levels)) + "\" d=\"" +
                paths[static_cast<std::size_t>(level)] + "\"/>\n";
    }
    heat += "</g>\n";
    doc.raw(heat);

    // row dendrogram grows leftwards from the bands, column dendrogram upwards from the map
    if (!row_tree.merges.empty() && row_tree.leaf_count == m) {
        const auto pos = node_positions(row_tree, row_order);
        const double scale = (dendro - 10) / max_height(row_tree);
        auto hx = [&](Index id) { return dendro - row_tree.height(id) * scale; };
        auto py = [&](Index id) { return y0 + pos[static_cast<std::size_t>(id)] * ch; };
        std::string lines = "<g stroke=\"#444444\" stroke-width=\"0.6\" fill=\"none\">\n";
        for (std::size_t k = 0; k < row_tree.merges.size(); ++k) {
            const auto& n = row_tree.merges[k];
            const Index id = row_tree.leaf_count + static_cast<Index>(k);
            lines += "<polyline points=\"" + svg::num(hx(n.left)) + "," + svg::num(py(n.left)) + " " + svg::num(hx(id)) +
                     "," + svg::num(py(n.left)) + " " + svg::num(hx(id)) + "," + svg::num(py(n.right)) + " " +
                     svg::num(hx(n.right)) + "," + svg::num(py(n.right)) + "\"/>\n";
        }
        doc.raw(lines + "</g>\n");
    }
    if (!col_tree.merges.empty() && col_tree.leaf_count == p) {
        const auto pos = node_positions(col_tree, col_order);
        const double scale = (dendro - 10) / max_height(col_tree);
        auto hy = [&](Index id) { return y0 - 4 - col_tree.height(id) * scale; };
        auto px = [&](Index id) { return x0 + pos[static_cast<std::size_t>(id)] * cw; };
        std::string lines = "<g stroke=\"#444444\" stroke-width=\"0.8\" fill=\"none\">\n";
        for (std::size_t k = 0; k < col_tree.merges.size(); ++k) {
            const auto& n = col_tree.merges[k];
            const Index id = col_tree.leaf_count + static_cast<Index>(k);
            lines += "<polyline points=\"" + svg::num(px(n.left)) + "," + svg::num(hy(n.left)) + " " + svg::num(px(n.left)) +
                     "," + svg::num(hy(id)) + " " + svg::num(px(n.right)) + "," + svg::num(hy(id)) + " " +
                     svg::num(px(n.right)) + "," + svg::num(hy(n.right)) + "\"/>\n";
        }
        doc.raw(lines + "</g>\n");
    }

    // categorical bands, coloured by first appearance in row order, drawn as runs
    for (std::size_t b = 0; b < bands.size(); ++b) {
        const double bx = dendro + 4 + static_cast<double>(b) * (band_w + band_gap);
        const auto& labels = bands[b].labels;
        std::map<std::string, std::size_t> color_index;
        for (Index r : row_order) color_index.emplace(labels[static_cast<std::size_t>(r)], color_index.size());
        std::size_t start = 0;
        while (start < row_order.size()) {
            const auto& label = labels[static_cast<std::size_t>(row_order[start])];
            std::size_t end = start + 1;
            while (end < row_order.size() && labels[static_cast<std::size_t>(row_order[end])] == label) ++end;
            doc.rect(bx, y0 + static_cast<double>(start) * ch, band_w, static_cast<double>(end - start) * ch,
                     svg::category_color(color_index[label]));
            start = end;
        }
        doc.text(bx + band_w / 2, y0 - 6, bands[b].name, 9, "start", -90);
    }

    if (p <= 300)
        for (std::size_t c = 0; c < col_order.size(); ++c)
            doc.text(x0 + (static_cast<double>(c) + 0.5) * cw + 3, y0 + map_h + 6,
                     column_names[static_cast<std::size_t>(col_order[c])], std::min(10.0, cw * 0.9), "start", 90);

    // colour legend
    const double lx = x0 + map_w + 20, lh = std::min(200.0, map_h);
    for (int k = 0; k < levels; ++k)
        doc.rect(lx, y0 + lh * (1.0 - (k + 1.0) / levels), 16, lh / levels + 0.2,
                 svg::hex(svg::gradient((k + 0.5) / levels)));
    doc.text(lx + 20, y0 + 8, format_double(hi), 9).text(lx + 20, y0 + lh, format_double(lo), 9);
    doc.save(path);
}

} // namespace lcsdive
