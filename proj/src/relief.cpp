#include "lcsdive/relief.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace lcsdive {

double feature_difference(const FeatureDescriptor& feature, double a, double b)
{
    if (is_missing(a) || is_missing(b)) return 1.0;
    if (feature.kind == FeatureKind::discrete) return a == b ? 0.0 : 1.0;
    const double range = feature.range();
    return range > 0.0 ? std::abs(a - b) / range : 0.0;
}

FeatureWeights multisurf(const Dataset& train, std::optional<Index> subsample, std::uint64_t seed, int workers)
{
    const Index m = train.instance_count();
    const Index p = train.feature_count();
    if (m < 3) throw DataError("multisurf: need at least 3 instances");
    const auto histogram = train.class_histogram();
    if (std::count_if(histogram.begin(), histogram.end(), [](int c) { return c > 0; }) < 2)
        throw DataError("multisurf: training data contains a single class");
    for (Index f = 0; f < p; ++f)
        if (train.values.col(f).array().isNaN().all())
            throw DataError("multisurf: feature '" + train.features[static_cast<std::size_t>(f)].name +
                            "' is entirely missing");

    std::vector<Index> targets(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) targets[static_cast<std::size_t>(i)] = i;
    if (subsample && *subsample < m) {
        Rng rng(seed);
        shuffle(targets, rng);
        targets.resize(static_cast<std::size_t>(std::max<Index>(1, *subsample)));
        std::sort(targets.begin(), targets.end());
    }

    Eigen::VectorXd prior(train.class_count());
    for (int c = 0; c < train.class_count(); ++c)
        prior(c) = static_cast<double>(histogram[static_cast<std::size_t>(c)]) / static_cast<double>(m);

    // Per-target contributions are reduced in target order so the result is independent of `workers`.
    const auto t = static_cast<Index>(targets.size());
    Eigen::MatrixXd contribution = Eigen::MatrixXd::Zero(p, t);
    parallel_for(t, workers, [&](Index k) {
        const Index i = targets[static_cast<std::size_t>(k)];
        Eigen::MatrixXd diff(p, m);
        Eigen::VectorXd distance(m);
        for (Index j = 0; j < m; ++j) {
            for (Index f = 0; f < p; ++f)
                diff(f, j) = j == i ? 0.0
                                    : feature_difference(train.features[static_cast<std::size_t>(f)],
                                                         train.values(i, f), train.values(j, f));
            distance(j) = diff.col(j).mean();
        }
        double mean = 0.0;
        for (Index j = 0; j < m; ++j)
            if (j != i) mean += distance(j);
        mean /= static_cast<double>(m - 1);
        double var = 0.0;
        for (Index j = 0; j < m; ++j)
            if (j != i) var += (distance(j) - mean) * (distance(j) - mean);
        const double threshold = mean - std::sqrt(var / static_cast<double>(m - 1)) / 2.0;

        const int ci = train.classes[static_cast<std::size_t>(i)];
        auto acc = contribution.col(k);
        for (Index j = 0; j < m; ++j) {
            if (j == i || !(distance(j) < threshold)) continue;
            const int cj = train.classes[static_cast<std::size_t>(j)];
            if (cj == ci)
                acc -= diff.col(j);
            else
                acc += diff.col(j) * (prior(cj) / (1.0 - prior(ci)));
        }
    });

    FeatureWeights w;
    w.scores = Eigen::VectorXd::Zero(p);
    for (Index k = 0; k < t; ++k) w.scores += contribution.col(k);
    w.scores /= static_cast<double>(t);
    return normalize_weights(std::move(w));
}

FeatureWeights normalize_weights(FeatureWeights w)
{
    const Index p = w.scores.size();
    if (p == 0) {
        w.normalized.resize(0);
        return w;
    }
    const double lo = w.scores.minCoeff();
    const double hi = w.scores.maxCoeff();
    if (!(hi > lo)) {
        w.normalized = Eigen::VectorXd::Constant(p, 1.0 / static_cast<double>(p));
        return w;
    }
    w.normalized = (w.scores.array() - lo) / (hi - lo);
    w.normalized /= w.normalized.sum();
    return w;
}

void write_weights_csv(const FeatureWeights& w, const Dataset& ds, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << "feature,score,normalized\n";
    for (Index f = 0; f < w.scores.size(); ++f)
        out << csv_escape(ds.features[static_cast<std::size_t>(f)].name) << ',' << format_double(w.scores(f)) << ','
            << format_double(w.normalized(f)) << '\n';
}

} // namespace lcsdive
