#pragma once

// Reference implementations written directly from the definitions, without the
// caches and reductions used by the library.

#include "lcsdive/cluster.hpp"
#include "lcsdive/data.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace oracle {

using lcsdive::Index;

inline double diff(const lcsdive::FeatureDescriptor& f, double a, double b)
{
    if (a != a || b != b) return 1.0;
    if (f.kind == lcsdive::FeatureKind::discrete) return a == b ? 0.0 : 1.0;
    return f.max > f.min ? std::abs(a - b) / (f.max - f.min) : 0.0;
}

/// Raw MultiSURF scores using every instance as a target.
inline Eigen::VectorXd multisurf(const lcsdive::Dataset& ds)
{
    const Index m = ds.instance_count(), p = ds.feature_count();
    Eigen::MatrixXd dist(m, m);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) {
            double s = 0.0;
            for (Index f = 0; f < p; ++f) s += diff(ds.features[f], ds.values(i, f), ds.values(j, f));
            dist(i, j) = s / static_cast<double>(p);
        }
    std::vector<double> prior(ds.class_names.size(), 0.0);
    for (int c : ds.classes) prior[c] += 1.0 / static_cast<double>(m);

    Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
    for (Index i = 0; i < m; ++i) {
        std::vector<double> others;
        for (Index j = 0; j < m; ++j)
            if (j != i) others.push_back(dist(i, j));
        double mean = 0.0;
        for (double d : others) mean += d;
        mean /= static_cast<double>(others.size());
        double ss = 0.0;
        for (double d : others) ss += (d - mean) * (d - mean);
        const double radius = mean - std::sqrt(ss / static_cast<double>(others.size())) / 2.0;
        const int ci = ds.classes[i];
        for (Index j = 0; j < m; ++j) {
            if (j == i || dist(i, j) >= radius) continue;
            const int cj = ds.classes[j];
            for (Index f = 0; f < p; ++f) {
                const double d = diff(ds.features[f], ds.values(i, f), ds.values(j, f));
                score(f) += cj == ci ? -d : d * prior[cj] / (1.0 - prior[ci]);
            }
        }
    }
    return score / static_cast<double>(m);
}

/// O(m^3) Ward agglomeration: exhaustive scan for the first minimal pair, Lance-Williams update.
inline lcsdive::Dendrogram ward(const Eigen::MatrixXd& d)
{
    const Index m = d.rows();
    lcsdive::Dendrogram tree;
    tree.leaf_count = m;
    Eigen::MatrixXd w = d.cwiseAbs2();
    std::vector<Index> size(m, 1), id(m);
    std::vector<bool> alive(m, true);
    for (Index i = 0; i < m; ++i) id[i] = i;
    for (Index step = 0; step + 1 < m; ++step) {
        Index bi = -1, bj = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < m; ++i)
            for (Index j = i + 1; j < m; ++j)
                if (alive[i] && alive[j] && w(i, j) < best) {
                    best = w(i, j);
                    bi = i;
                    bj = j;
                }
        tree.merges.push_back({id[bi], id[bj], std::sqrt(std::max(best, 0.0)), size[bi] + size[bj]});
        for (Index k = 0; k < m; ++k) {
            if (!alive[k] || k == bi || k == bj) continue;
            const double ni = size[bi], nj = size[bj], nk = size[k];
            const double v = ((ni + nk) * w(k, bi) + (nj + nk) * w(k, bj) - nk * best) / (ni + nj + nk);
            w(k, bi) = w(bi, k) = std::max(v, 0.0);
        }
        size[bi] += size[bj];
        alive[bj] = false;
        id[bi] = m + step;
    }
    return tree;
}

inline double adjusted_rand_index(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    std::map<std::pair<std::string, std::string>, double> joint;
    std::map<std::string, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1;
        ra[a[i]] += 1;
        rb[b[i]] += 1;
    }
    auto pairs = [](double x) { return x * (x - 1) / 2; };
    double index = 0, sa = 0, sb = 0;
    for (const auto& [_, v] : joint) index += pairs(v);
    for (const auto& [_, v] : ra) sa += pairs(v);
    for (const auto& [_, v] : rb) sb += pairs(v);
    const double expected = sa * sb / pairs(static_cast<double>(a.size()));
    const double top = 0.5 * (sa + sb);
    return top == expected ? 1.0 : (index - expected) / (top - expected);
}

} // namespace oracle
