#include "lcsdive/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

namespace lcsdive {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::optional<double> parse_number(std::string_view token)
{
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (token.empty()) return std::nullopt;
    if (token.front() == '+') token.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

/// Sorts label tokens numerically when every token is numeric, lexicographically otherwise.
std::vector<std::string> sorted_labels(const std::set<std::string>& tokens)
{
    std::vector<std::string> out(tokens.begin(), tokens.end());
    const bool numeric = std::all_of(out.begin(), out.end(),
                                     [](const std::string& t) { return parse_number(t).has_value(); });
    if (numeric) {
        std::stable_sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
            return *parse_number(a) < *parse_number(b);
        });
    }
    return out;
}

std::string bit_name(char prefix, int k) { return std::string(1, prefix) + std::to_string(k); }

} // namespace

std::string FeatureDescriptor::value_label(double v) const
{
    if (is_missing(v)) return "NA";
    if (!level_names.empty()) {
        const auto k = static_cast<std::size_t>(v);
        if (v >= 0 && k < level_names.size() && static_cast<double>(k) == v) return level_names[k];
    }
    return format_double(v);
}

void Dataset::validate() const
{
    const Index m = values.rows();
    if (static_cast<Index>(features.size()) != values.cols())
        throw DataError("dataset: descriptor count does not match column count");
    if (static_cast<Index>(classes.size()) != m || static_cast<Index>(ids.size()) != m)
        throw DataError("dataset: class or id column length does not match row count");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second) throw DataError("dataset: duplicate instance id '" + id + "'");
    std::set<int> distinct(classes.begin(), classes.end());
    if (distinct.size() < 2) throw DataError("dataset: at least two distinct class labels are required");
    for (int c : classes)
        if (c < 0 || c >= class_count()) throw DataError("dataset: class index out of range");
    if (true_subgroups && static_cast<Index>(true_subgroups->size()) != m)
        throw DataError("dataset: true subgroup column does not cover every instance");
}

Dataset Dataset::subset(const std::vector<Index>& rows) const
{
    Dataset out;
    out.features = features;
    out.class_names = class_names;
    out.values.resize(static_cast<Index>(rows.size()), values.cols());
    out.classes.reserve(rows.size());
    out.ids.reserve(rows.size());
    if (true_subgroups) out.true_subgroups.emplace();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const Index r = rows[k];
        out.values.row(static_cast<Index>(k)) = values.row(r);
        out.classes.push_back(classes[static_cast<std::size_t>(r)]);
        out.ids.push_back(ids[static_cast<std::size_t>(r)]);
        if (true_subgroups) out.true_subgroups->push_back((*true_subgroups)[static_cast<std::size_t>(r)]);
    }
    return out;
}

std::vector<int> Dataset::class_histogram() const
{
    std::vector<int> counts(class_names.size(), 0);
    for (int c : classes) ++counts[static_cast<std::size_t>(c)];
    return counts;
}

int Dataset::majority_class() const
{
    const auto counts = class_histogram();
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::vector<FeatureDescriptor> describe_features(const RowMatrixXd& values,
                                                 const std::vector<std::string>& names, int discrete_limit)
{
    std::vector<FeatureDescriptor> out(static_cast<std::size_t>(values.cols()));
    for (Index f = 0; f < values.cols(); ++f) {
        auto& d = out[static_cast<std::size_t>(f)];
        d.name = names[static_cast<std::size_t>(f)];
        std::set<double> distinct;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (Index i = 0; i < values.rows(); ++i) {
            const double v = values(i, f);
            if (is_missing(v)) continue;
            distinct.insert(v);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (distinct.empty()) {
            d.kind = FeatureKind::discrete;
            d.min = d.max = 0.0;
            continue;
        }
        d.min = lo;
        d.max = hi;
        if (static_cast<int>(distinct.size()) <= discrete_limit) {
            d.kind = FeatureKind::discrete;
            d.levels.assign(distinct.begin(), distinct.end());
        } else {
            d.kind = FeatureKind::continuous;
        }
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& path, const CsvOptions& options)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset file has no header row: " + path.string());
    const auto header = split_csv_line(line);

    auto find_column = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto class_col = find_column(options.class_column);
    if (!class_col) throw DataError("class column '" + options.class_column + "' not found in " + path.string());
    std::optional<std::size_t> id_col, true_col;
    if (options.id_column) {
        id_col = find_column(*options.id_column);
        if (!id_col) throw DataError("id column '" + *options.id_column + "' not found");
    }
    if (options.true_cluster_column) {
        true_col = find_column(*options.true_cluster_column);
        if (!true_col) throw DataError("true cluster column '" + *options.true_cluster_column + "' not found");
    }

    std::vector<std::size_t> feature_cols;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == *class_col || (id_col && c == *id_col) || (true_col && c == *true_col)) continue;
        feature_cols.push_back(c);
        names.push_back(header[c]);
    }

    std::vector<std::vector<std::string>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            std::ostringstream msg;
            msg << path.string() << ":" << line_no << ": expected " << header.size() << " fields, found "
                << cells.size();
            throw DataError(msg.str());
        }
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw DataError("dataset file has no data rows: " + path.string());

    auto missing = [&](const std::string& token) {
        return std::find(options.missing_tokens.begin(), options.missing_tokens.end(), token) !=
               options.missing_tokens.end();
    };

    const auto m = static_cast<Index>(rows.size());
    const auto p = static_cast<Index>(feature_cols.size());
    Dataset ds;
    ds.values.resize(m, p);
    std::vector<std::vector<std::string>> text_levels(static_cast<std::size_t>(p));

    for (Index f = 0; f < p; ++f) {
        const std::size_t col = feature_cols[static_cast<std::size_t>(f)];
        std::optional<std::size_t> first_numeric, first_text;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& token = rows[i][col];
            if (missing(token)) continue;
            if (parse_number(token)) {
                if (!first_numeric) first_numeric = i;
            } else if (!first_text) {
                first_text = i;
            }
        }
        if (first_numeric && first_text) {
            std::ostringstream msg;
            msg << path.string() << ": non-numeric value '" << rows[*first_text][col] << "' in numeric column '"
                << header[col] << "' (data row " << (*first_text + 1) << ", column " << (col + 1) << ")";
            throw DataError(msg.str());
        }
        if (first_text) {
            std::set<std::string> tokens;
            for (const auto& r : rows)
                if (!missing(r[col])) tokens.insert(r[col]);
            auto levels = sorted_labels(tokens);
            std::map<std::string, double> code;
            for (std::size_t k = 0; k < levels.size(); ++k) code[levels[k]] = static_cast<double>(k);
            for (Index i = 0; i < m; ++i) {
                const auto& token = rows[static_cast<std::size_t>(i)][col];
                ds.values(i, f) = missing(token) ? kNaN : code.at(token);
            }
            text_levels[static_cast<std::size_t>(f)] = std::move(levels);
        } else {
            for (Index i = 0; i < m; ++i) {
                const auto& token = rows[static_cast<std::size_t>(i)][col];
                ds.values(i, f) = missing(token) ? kNaN : *parse_number(token);
            }
        }
    }
    ds.features = describe_features(ds.values, names, options.discrete_limit);
    for (Index f = 0; f < p; ++f) {
        auto& levels = text_levels[static_cast<std::size_t>(f)];
        if (levels.empty()) continue;
        auto& d = ds.features[static_cast<std::size_t>(f)];
        // text columns stay categorical regardless of the discrete limit
        d.kind = FeatureKind::discrete;
        d.levels.clear();
        for (std::size_t k = 0; k < levels.size(); ++k) d.levels.push_back(static_cast<double>(k));
        d.level_names = std::move(levels);
    }

    std::set<std::string> class_tokens;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& token = rows[i][*class_col];
        if (missing(token))
            throw DataError(path.string() + ": missing class label in data row " + std::to_string(i + 1));
        class_tokens.insert(token);
    }
    ds.class_names = sorted_labels(class_tokens);
    std::map<std::string, int> class_code;
    for (std::size_t k = 0; k < ds.class_names.size(); ++k) class_code[ds.class_names[k]] = static_cast<int>(k);
    for (const auto& r : rows) ds.classes.push_back(class_code.at(r[*class_col]));

    for (std::size_t i = 0; i < rows.size(); ++i)
        ds.ids.push_back(id_col ? rows[i][*id_col] : std::to_string(i));
    if (true_col) {
        ds.true_subgroups.emplace();
        for (const auto& r : rows) ds.true_subgroups->push_back(r[*true_col]);
    }
    ds.validate();
    return ds;
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::vector<std::string>>>& extra_columns)
{
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    for (const auto& f : ds.features) out << csv_escape(f.name) << ',';
    out << "Class,InstanceID";
    if (ds.true_subgroups) out << ",TrueCluster";
    for (const auto& [name, _] : extra_columns) out << ',' << csv_escape(name);
    out << '\n';
    for (Index i = 0; i < ds.instance_count(); ++i) {
        const auto row = static_cast<std::size_t>(i);
        for (Index f = 0; f < ds.feature_count(); ++f) {
            const double v = ds.values(i, f);
            if (!is_missing(v)) out << csv_escape(ds.features[static_cast<std::size_t>(f)].value_label(v));
            out << ',';
        }
        out << csv_escape(ds.class_names[static_cast<std::size_t>(ds.classes[row])]) << ','
            << csv_escape(ds.ids[row]);
        if (ds.true_subgroups) out << ',' << csv_escape((*ds.true_subgroups)[row]);
        for (const auto& [_, values] : extra_columns) out << ',' << csv_escape(values[row]);
        out << '\n';
    }
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

std::vector<CvSplit> cv_partition(const Dataset& ds, int n, std::uint64_t seed)
{
    if (n < 2) throw ConfigError("cv_partition: fold count must be at least 2");
    const auto counts = ds.class_histogram();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] > 0 && counts[c] < n)
            throw DataError("cv_partition: class '" + ds.class_names[c] + "' has " + std::to_string(counts[c]) +
                            " instances, fewer than " + std::to_string(n) + " folds");
    }
    Rng rng(seed);
    std::vector<int> fold_of(static_cast<std::size_t>(ds.instance_count()), 0);
    int cursor = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        std::vector<Index> members;
        for (Index i = 0; i < ds.instance_count(); ++i)
            if (ds.classes[static_cast<std::size_t>(i)] == static_cast<int>(c)) members.push_back(i);
        shuffle(members, rng);
        // the dealing cursor carries across classes so fold sizes differ by at most one
        for (Index i : members) {
            fold_of[static_cast<std::size_t>(i)] = cursor;
            cursor = (cursor + 1) % n;
        }
    }
    std::vector<CvSplit> splits(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) splits[static_cast<std::size_t>(k)].fold_index = k;
    for (Index i = 0; i < ds.instance_count(); ++i) {
        const int k = fold_of[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) {
            auto& s = splits[static_cast<std::size_t>(j)];
            (j == k ? s.test_rows : s.train_rows).push_back(i);
        }
    }
    return splits;
}

int mux_class(const std::vector<int>& bits, int address_bits)
{
    if (address_bits < 1 || address_bits > 20) throw ConfigError("mux: address bit count must be in [1, 20]");
    const std::size_t expected = static_cast<std::size_t>(address_bits) + (std::size_t{1} << address_bits);
    if (bits.size() != expected)
        throw DataError("mux: expected " + std::to_string(expected) + " bits, got " + std::to_string(bits.size()));
    std::size_t v = 0;
    for (int k = 0; k < address_bits; ++k) v = (v << 1) | static_cast<std::size_t>(bits[static_cast<std::size_t>(k)] != 0);
    return bits[static_cast<std::size_t>(address_bits) + v] != 0 ? 1 : 0;
}

namespace {

Dataset binary_dataset(RowMatrixXd values, std::vector<int> classes, const std::vector<std::string>& names)
{
    Dataset ds;
    ds.features.reserve(names.size());
    for (const auto& name : names) {
        FeatureDescriptor d;
        d.name = name;
        d.kind = FeatureKind::discrete;
        d.levels = {0.0, 1.0};
        d.min = 0.0;
        d.max = 1.0;
        ds.features.push_back(std::move(d));
    }
    ds.values = std::move(values);
    ds.classes = std::move(classes);
    ds.class_names = {"0", "1"};
    for (Index i = 0; i < ds.values.rows(); ++i) ds.ids.push_back(std::to_string(i));
    return ds;
}

} // namespace

Dataset generate_mux(int address_bits, Index n_instances, std::uint64_t seed)
{
    if (address_bits < 1 || address_bits > 20) throw ConfigError("mux: address bit count must be in [1, 20]");
    if (n_instances < 1) throw ConfigError("mux: instance count must be positive");
    const int registers = 1 << address_bits;
    const int width = address_bits + registers;
    std::vector<std::string> names;
    for (int k = 0; k < address_bits; ++k) names.push_back(bit_name('A', k));
    for (int k = 0; k < registers; ++k) names.push_back(bit_name('R', k));

    Rng rng(seed);
    RowMatrixXd values(n_instances, width);
    std::vector<int> classes;
    std::vector<std::string> groups;
    std::vector<int> bits(static_cast<std::size_t>(width));
    for (Index i = 0; i < n_instances; ++i) {
        for (int f = 0; f < width; ++f) {
            bits[static_cast<std::size_t>(f)] = static_cast<int>(rng() >> 63);
            values(i, f) = bits[static_cast<std::size_t>(f)];
        }
        classes.push_back(mux_class(bits, address_bits));
        int address = 0;
        for (int k = 0; k < address_bits; ++k) address = (address << 1) | bits[static_cast<std::size_t>(k)];
        groups.push_back(std::to_string(address));
    }
    auto ds = binary_dataset(std::move(values), std::move(classes), names);
    ds.true_subgroups = std::move(groups);
    return ds;
}

SimulationModel univariate_model(int n_features, double penetrance_gap)
{
    if (n_features < 1) throw ConfigError("univariate: need at least one feature");
    if (!(penetrance_gap > 0.0 && penetrance_gap <= 1.0))
        throw ConfigError("univariate: penetrance gap must be in (0, 1]");
    SimulationModel m;
    m.kind = ModelKind::univariate;
    m.predictive = {0};
    m.strength = penetrance_gap;
    m.feature_names.push_back("M0P1");
    for (int k = 0; k + 1 < n_features; ++k) m.feature_names.push_back(bit_name('N', k));
    return m;
}

SimulationModel xor_model(int n_features, int n_interacting, double label_noise)
{
    if (n_interacting != 2 && n_interacting != 3) throw ConfigError("xor: interacting feature count must be 2 or 3");
    if (n_interacting >= n_features) throw ConfigError("xor: interacting features must be fewer than all features");
    if (!(label_noise >= 0.0 && label_noise < 0.5)) throw ConfigError("xor: label noise must be in [0, 0.5)");
    SimulationModel m;
    m.kind = ModelKind::xor_parity;
    m.strength = label_noise;
    for (int k = 0; k < n_interacting; ++k) {
        m.predictive.push_back(k);
        m.feature_names.push_back("M" + std::to_string(k) + "P" + std::to_string(k + 1));
    }
    for (int k = 0; k + n_interacting < n_features; ++k) m.feature_names.push_back(bit_name('N', k));
    return m;
}

Dataset simulate(const SimulationModel& model, Index n_instances, std::uint64_t seed)
{
    if (n_instances < 1) throw ConfigError("simulate: instance count must be positive");
    const auto p = static_cast<Index>(model.feature_names.size());
    for (int c : model.predictive)
        if (c < 0 || c >= p) throw ConfigError("simulate: predictive column out of range");
    Rng rng(seed);
    RowMatrixXd values(n_instances, p);
    std::vector<int> classes;
    classes.reserve(static_cast<std::size_t>(n_instances));
    for (Index i = 0; i < n_instances; ++i) {
        for (Index f = 0; f < p; ++f) values(i, f) = static_cast<double>(rng() >> 63);
        int label = 0;
        if (model.kind == ModelKind::univariate) {
            const bool on = values(i, model.predictive.front()) != 0.0;
            const double p1 = on ? 0.5 + model.strength / 2.0 : 0.5 - model.strength / 2.0;
            label = uniform01(rng) < p1 ? 1 : 0;
        } else {
            for (int c : model.predictive) label ^= static_cast<int>(values(i, c));
            if (uniform01(rng) < model.strength) label ^= 1;
        }
        classes.push_back(label);
    }
    return binary_dataset(std::move(values), std::move(classes), model.feature_names);
}

Dataset generate_xor(int n_features, int n_interacting, Index n_instances, double label_noise, std::uint64_t seed)
{
    return simulate(xor_model(n_features, n_interacting, label_noise), n_instances, seed);
}

Dataset generate_univariate(int n_features, Index n_instances, double penetrance_gap, std::uint64_t seed)
{
    return simulate(univariate_model(n_features, penetrance_gap), n_instances, seed);
}

std::vector<SimulationModel> heterogeneous_models(ModelKind kind, int n_models, int order, int n_features,
                                                  double strength)
{
    if (n_models < 1) throw ConfigError("heterogeneous: need at least one model");
    if (kind == ModelKind::univariate) order = 1;
    if (kind == ModelKind::xor_parity && order != 2 && order != 3)
        throw ConfigError("heterogeneous: xor order must be 2 or 3");
    if (n_models * order > n_features) throw ConfigError("heterogeneous: too few features for the models");
    std::vector<std::string> names;
    for (int k = 0; k < n_models; ++k)
        for (int j = 0; j < order; ++j) names.push_back("M" + std::to_string(k) + "P" + std::to_string(j));
    for (int k = 0; n_models * order + k < n_features; ++k) names.push_back(bit_name('N', k));
    std::vector<SimulationModel> out;
    for (int k = 0; k < n_models; ++k) {
        SimulationModel m;
        m.kind = kind;
        m.feature_names = names;
        m.strength = strength;
        for (int j = 0; j < order; ++j) m.predictive.push_back(k * order + j);
        out.push_back(std::move(m));
    }
    return out;
}

Dataset generate_heterogeneous(const std::vector<std::pair<SimulationModel, double>>& subgenerators,
                               Index n_instances, std::uint64_t seed)
{
    if (subgenerators.empty()) throw ConfigError("heterogeneous: no subgenerators");
    double total = 0.0;
    for (const auto& [model, share] : subgenerators) {
        if (share < 0.0) throw ConfigError("heterogeneous: negative proportion");
        total += share;
        if (model.feature_names != subgenerators.front().first.feature_names)
            throw DataError("heterogeneous: subgenerator feature schemas differ");
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("heterogeneous: proportions must sum to 1");

    std::vector<Index> sizes;
    Index assigned = 0;
    for (const auto& [_, share] : subgenerators) {
        sizes.push_back(static_cast<Index>(std::llround(share * static_cast<double>(n_instances))));
        assigned += sizes.back();
    }
    sizes.front() += n_instances - assigned;
    if (sizes.front() < 0) throw ConfigError("heterogeneous: proportions do not fit the instance count");

    const auto p = static_cast<Index>(subgenerators.front().first.feature_names.size());
    RowMatrixXd values(n_instances, p);
    std::vector<int> classes;
    std::vector<std::string> groups;
    Index row = 0;
    for (std::size_t k = 0; k < subgenerators.size(); ++k) {
        if (sizes[k] == 0) continue;
        const auto part = simulate(subgenerators[k].first, sizes[k], derive_seed(seed, k));
        values.middleRows(row, sizes[k]) = part.values;
        classes.insert(classes.end(), part.classes.begin(), part.classes.end());
        groups.insert(groups.end(), static_cast<std::size_t>(sizes[k]), std::to_string(k));
        row += sizes[k];
    }
    auto ds = binary_dataset(std::move(values), std::move(classes), subgenerators.front().first.feature_names);
    ds.true_subgroups = std::move(groups);
    return ds;
}

} // namespace lcsdive
