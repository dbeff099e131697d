#include "lcsdive/lcs.hpp"

#include <algorithm>
#include <cmath>

namespace lcsdive {

const FeatureSpec* Rule::find(int feature) const
{
    auto it = std::lower_bound(condition.begin(), condition.end(), feature,
                               [](const FeatureSpec& s, int f) { return s.feature < f; });
    return it != condition.end() && it->feature == feature ? &*it : nullptr;
}

void Rule::refresh(double nu)
{
    accuracy = match_count > 0 ? static_cast<double>(correct_count) / static_cast<double>(match_count) : 0.0;
    fitness = std::pow(accuracy, nu);
}

void Hyperparams::validate() const
{
    if (iterations < 1) throw ConfigError("lcs: iterations must be >= 1");
    if (N < 1) throw ConfigError("lcs: N must be >= 1");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("lcs: beta must be in (0, 1]");
    if (!(nu >= 1.0)) throw ConfigError("lcs: nu must be >= 1");
    if (!(chi >= 0.0 && chi <= 1.0)) throw ConfigError("lcs: chi must be in [0, 1]");
    if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError("lcs: mu must be in [0, 1]");
    if (theta_GA < 0.0 || theta_del < 0.0 || theta_sub < 0.0) throw ConfigError("lcs: thresholds must be >= 0");
    if (rsl_override && *rsl_override < 1) throw ConfigError("lcs: rsl_override must be >= 1");
}

std::int64_t Model::micro_size() const
{
    std::int64_t n = 0;
    for (const auto& r : population) n += r.numerosity;
    return n;
}

int compute_rsl(const Dataset& train, int N, std::optional<int> rsl_override)
{
    if (rsl_override) return *rsl_override;
    const auto p = static_cast<int>(train.feature_count());
    if (N < 2) throw ConfigError("compute_rsl: N must be >= 2");
    double states = 0.0;
    for (const auto& f : train.features) states += f.state_count();
    states /= std::max(1, p);
    if (!(states > 1.0)) return p;
    const double raw = std::log(static_cast<double>(N)) / std::log(states);
    const int limit = static_cast<int>(std::ceil(raw - 1e-9));
    return std::clamp(limit, 1, std::max(1, p));
}

bool matches(const Rule& rule, const Eigen::Ref<const Eigen::RowVectorXd>& instance)
{
    for (const auto& spec : rule.condition) {
        const double v = instance(spec.feature);
        if (is_missing(v)) continue;
        if (!spec.contains(v)) return false;
    }
    return true;
}

void ft_update(Eigen::Ref<Eigen::RowVectorXd> ft_row, const std::vector<const Rule*>& correct_set, double beta)
{
    double mass = 0.0;
    for (const Rule* r : correct_set) mass += r->fitness * r->numerosity;
    if (!(mass > 0.0)) return;
    Eigen::RowVectorXd share = Eigen::RowVectorXd::Zero(ft_row.size());
    std::vector<bool> specified(static_cast<std::size_t>(ft_row.size()), false);
    for (const Rule* r : correct_set) {
        for (const auto& s : r->condition) {
            share(s.feature) += r->fitness * r->numerosity;
            specified[static_cast<std::size_t>(s.feature)] = true;
        }
    }
    for (Index f = 0; f < ft_row.size(); ++f) {
        if (!specified[static_cast<std::size_t>(f)]) continue;
        const double target = share(f) / mass;
        ft_row(f) += beta * (target - ft_row(f));
    }
}

std::vector<double> blend_weights(const Eigen::VectorXd& ek, const Eigen::RowVectorXd* ft_row)
{
    const auto p = static_cast<std::size_t>(ek.size());
    std::vector<double> w(p);
    const double ek_sum = ek.sum();
    double ft_sum = ft_row ? ft_row->sum() : 0.0;
    for (std::size_t f = 0; f < p; ++f) {
        const auto fi = static_cast<Index>(f);
        const double e = ek_sum > 0.0 ? ek(fi) / ek_sum : 1.0 / static_cast<double>(p);
        const double t = ft_sum > 0.0 ? (*ft_row)(fi) / ft_sum : 1.0 / static_cast<double>(p);
        w[f] = 0.5 * e + 0.5 * t;
    }
    return w;
}

namespace {

FeatureSpec make_spec(const FeatureDescriptor& d, int feature, double v, Rng& rng)
{
    FeatureSpec s;
    s.feature = feature;
    if (d.kind == FeatureKind::discrete) {
        s.lo = s.hi = v;
        return s;
    }
    const double r = uniform(rng, 0.1, 0.5) * d.range();
    s.interval = true;
    s.lo = v - r;
    s.hi = v + r;
    return s;
}

} // namespace

Rule cover(const Eigen::Ref<const Eigen::RowVectorXd>& instance, int label, const std::vector<FeatureDescriptor>& features,
           const Eigen::VectorXd& ek, const Eigen::RowVectorXd* ft_row, int rsl, Rng& rng, std::int64_t iteration)
{
    if (rsl < 1) throw ConfigError("cover: rsl must be >= 1");
    const auto weights = blend_weights(ek, ft_row);
    std::vector<int> candidates;
    std::vector<double> candidate_weights;
    for (std::size_t f = 0; f < features.size(); ++f) {
        if (is_missing(instance(static_cast<Index>(f)))) continue;
        candidates.push_back(static_cast<int>(f));
        candidate_weights.push_back(weights[f]);
    }

    Rule rule;
    rule.label = label;
    rule.numerosity = 1;
    rule.match_count = 1;
    rule.correct_count = 1;
    rule.accuracy = 1.0;
    rule.fitness = 1.0;
    rule.ga_timestamp = iteration;
    rule.init_timestamp = iteration;

    if (candidates.empty()) {
        // Every value missing: fall back to one random feature fixed at its domain midpoint.
        const auto f = static_cast<int>(uniform_int(rng, 0, static_cast<std::int64_t>(features.size()) - 1));
        const auto& d = features[static_cast<std::size_t>(f)];
        double mid = 0.5 * (d.min + d.max);
        if (d.kind == FeatureKind::discrete && !d.levels.empty()) mid = d.levels[d.levels.size() / 2];
        rule.condition.push_back(make_spec(d, f, mid, rng));
        return rule;
    }

    const auto limit = std::min<std::int64_t>(rsl, static_cast<std::int64_t>(candidates.size()));
    const auto count = uniform_int(rng, 1, limit);
    for (std::int64_t k = 0; k < count; ++k) {
        const auto pick = static_cast<std::size_t>(sample_weighted(rng, candidate_weights));
        const int f = candidates[pick];
        rule.condition.push_back(make_spec(features[static_cast<std::size_t>(f)], f, instance(f), rng));
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
        candidate_weights.erase(candidate_weights.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    std::sort(rule.condition.begin(), rule.condition.end(),
              [](const FeatureSpec& a, const FeatureSpec& b) { return a.feature < b.feature; });
    return rule;
}

bool more_general(const Rule& general, const Rule& specific)
{
    if (general.condition.size() > specific.condition.size()) return false;
    bool wider = false;
    for (const auto& g : general.condition) {
        const FeatureSpec* s = specific.find(g.feature);
        if (!s) return false;
        if (!g.interval) {
            if (s->interval || s->lo != g.lo) return false;
        } else {
            if (!s->interval || s->lo < g.lo || s->hi > g.hi) return false;
            if (s->lo > g.lo || s->hi < g.hi) wider = true;
        }
    }
    return general.condition.size() < specific.condition.size() || wider;
}

bool subsumes(const Rule& general, const Rule& specific, const Hyperparams& hp)
{
    return general.label == specific.label && static_cast<double>(general.match_count) > hp.theta_sub &&
           general.accuracy > hp.acc_sub && more_general(general, specific);
}

} // namespace lcsdive
