#include "lcsdive/lcs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lcsdive {

namespace {

void sort_condition(RuleCondition& c)
{
    std::sort(c.begin(), c.end(), [](const FeatureSpec& a, const FeatureSpec& b) { return a.feature < b.feature; });
}

std::size_t tournament(const std::vector<std::size_t>& correct_set, const std::vector<Rule>& population, Rng& rng)
{
    const auto size = std::max<std::size_t>(1, static_cast<std::size_t>(0.2 * static_cast<double>(correct_set.size())));
    std::vector<std::size_t> pool = correct_set;
    // partial Fisher-Yates draws `size` entrants without replacement
    for (std::size_t k = 0; k < size; ++k) {
        const auto j = static_cast<std::size_t>(
            uniform_int(rng, static_cast<std::int64_t>(k), static_cast<std::int64_t>(pool.size()) - 1));
        std::swap(pool[k], pool[j]);
    }
    std::size_t best = pool[0];
    for (std::size_t k = 1; k < size; ++k) {
        const std::size_t c = pool[k];
        const double fc = population[c].fitness;
        const double fb = population[best].fitness;
        if (fc > fb || (fc == fb && c < best)) best = c;
    }
    return best;
}

void uniform_crossover(RuleCondition& a, RuleCondition& b, Rng& rng)
{
    RuleCondition out_a, out_b;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        const int fa = i < a.size() ? a[i].feature : std::numeric_limits<int>::max();
        const int fb = j < b.size() ? b[j].feature : std::numeric_limits<int>::max();
        const bool swap = uniform01(rng) < 0.5;
        if (fa == fb) {
            out_a.push_back(swap ? b[j] : a[i]);
            out_b.push_back(swap ? a[i] : b[j]);
            ++i;
            ++j;
        } else if (fa < fb) {
            (swap ? out_b : out_a).push_back(a[i++]);
        } else {
            (swap ? out_a : out_b).push_back(b[j++]);
        }
    }
    a = std::move(out_a);
    b = std::move(out_b);
}

/// Drops lowest-EK specs above the limit; re-specifies the highest-EK observed feature when empty.
void repair(RuleCondition& c, const Eigen::Ref<const Eigen::RowVectorXd>& instance, const DiscoveryContext& ctx,
            Rng& rng)
{
    while (static_cast<int>(c.size()) > ctx.rsl) {
        auto worst = std::min_element(c.begin(), c.end(), [&](const FeatureSpec& x, const FeatureSpec& y) {
            return ctx.ek(x.feature) < ctx.ek(y.feature);
        });
        c.erase(worst);
    }
    if (!c.empty()) return;
    int best = -1;
    for (Index f = 0; f < ctx.ek.size(); ++f)
        if (!is_missing(instance(f)) && (best < 0 || ctx.ek(f) > ctx.ek(best))) best = static_cast<int>(f);
    if (best < 0) best = 0;
    const auto& d = ctx.features[static_cast<std::size_t>(best)];
    FeatureSpec s;
    s.feature = best;
    const double v = is_missing(instance(best)) ? 0.5 * (d.min + d.max) : instance(best);
    if (d.kind == FeatureKind::continuous) {
        const double r = uniform(rng, 0.1, 0.5) * d.range();
        s.interval = true;
        s.lo = v - r;
        s.hi = v + r;
    } else {
        s.lo = s.hi = v;
    }
    c.push_back(s);
}

void mutate(RuleCondition& c, const Eigen::Ref<const Eigen::RowVectorXd>& instance, const std::vector<double>& weights,
            const DiscoveryContext& ctx, Rng& rng)
{
    const auto p = static_cast<int>(ctx.features.size());
    const double max_w = *std::max_element(weights.begin(), weights.end());
    int events = 0;
    for (int f = 0; f < p; ++f)
        if (uniform01(rng) < ctx.hp.mu) ++events;

    for (int e = 0; e < events; ++e) {
        std::vector<int> addable;
        std::vector<double> add_w;
        for (int f = 0; f < p; ++f) {
            const bool specified = std::any_of(c.begin(), c.end(), [f](const FeatureSpec& s) { return s.feature == f; });
            if (specified || is_missing(instance(f))) continue;
            addable.push_back(f);
            add_w.push_back(weights[static_cast<std::size_t>(f)]);
        }
        const bool can_add = static_cast<int>(c.size()) < ctx.rsl && !addable.empty();
        const bool can_remove = c.size() > 1;
        if (!can_add && !can_remove) break;
        const bool add = can_add && (!can_remove || uniform01(rng) < 0.5);
        if (add) {
            const int f = addable[static_cast<std::size_t>(sample_weighted(rng, add_w))];
            const auto& d = ctx.features[static_cast<std::size_t>(f)];
            FeatureSpec s;
            s.feature = f;
            const double v = instance(f);
            if (d.kind == FeatureKind::continuous) {
                const double r = uniform(rng, 0.1, 0.5) * d.range();
                s.interval = true;
                s.lo = v - r;
                s.hi = v + r;
            } else {
                s.lo = s.hi = v;
            }
            c.push_back(s);
            sort_condition(c);
        } else {
            // low-weight features are the likelier ones to be generalized away
            std::vector<double> remove_w;
            for (const auto& s : c)
                remove_w.push_back(1.0 - (max_w > 0.0 ? weights[static_cast<std::size_t>(s.feature)] / max_w : 0.0) +
                                   1e-3);
            c.erase(c.begin() + sample_weighted(rng, remove_w));
        }
    }

    for (auto& s : c) {
        if (!s.interval || !(uniform01(rng) < ctx.hp.mu)) continue;
        const double range = ctx.features[static_cast<std::size_t>(s.feature)].range();
        s.lo += (uniform01(rng) < 0.5 ? -1.0 : 1.0) * uniform(rng, 0.0, 0.1 * range);
        s.hi += (uniform01(rng) < 0.5 ? -1.0 : 1.0) * uniform(rng, 0.0, 0.1 * range);
        if (s.lo > s.hi) std::swap(s.lo, s.hi);
        const double v = instance(s.feature);
        if (!is_missing(v)) {
            s.lo = std::min(s.lo, v);
            s.hi = std::max(s.hi, v);
        }
    }
}

} // namespace

void run_ga(const std::vector<std::size_t>& correct_set, std::vector<Rule>& population,
            const Eigen::Ref<const Eigen::RowVectorXd>& instance, int label, const Eigen::RowVectorXd* ft_row,
            const DiscoveryContext& ctx, std::int64_t iteration, Rng& rng)
{
    if (correct_set.empty()) return;
    for (std::size_t k : correct_set) population[k].ga_timestamp = iteration;

    const std::size_t p1 = tournament(correct_set, population, rng);
    const std::size_t p2 = tournament(correct_set, population, rng);
    RuleCondition c1 = population[p1].condition;
    RuleCondition c2 = population[p2].condition;
    if (uniform01(rng) < ctx.hp.chi && c1 != c2) {
        uniform_crossover(c1, c2, rng);
        repair(c1, instance, ctx, rng);
        repair(c2, instance, ctx, rng);
    }
    const auto weights = blend_weights(ctx.ek, ft_row);
    mutate(c1, instance, weights, ctx, rng);
    mutate(c2, instance, weights, ctx, rng);

    const double avg_size = 0.5 * (population[p1].avg_match_set_size + population[p2].avg_match_set_size);
    for (RuleCondition* c : {&c1, &c2}) {
        Rule child;
        child.condition = std::move(*c);
        child.label = label;
        child.avg_match_set_size = avg_size;
        child.ga_timestamp = iteration;
        child.init_timestamp = iteration;
        child.refresh(ctx.hp.nu);

        auto same = std::find_if(population.begin(), population.end(),
                                 [&](const Rule& r) { return r.same_condition(child); });
        if (same != population.end()) {
            ++same->numerosity;
        } else if (subsumes(population[p1], child, ctx.hp)) {
            ++population[p1].numerosity;
        } else if (subsumes(population[p2], child, ctx.hp)) {
            ++population[p2].numerosity;
        } else {
            population.push_back(std::move(child));
        }
    }
}

void delete_rules(std::vector<Rule>& population, int N, const Hyperparams& hp, Rng& rng)
{
    std::int64_t micro = 0;
    for (const auto& r : population) micro += r.numerosity;
    std::vector<double> votes;
    while (micro > N && !population.empty()) {
        double fitness_mass = 0.0;
        for (const auto& r : population) fitness_mass += r.fitness * r.numerosity;
        const double mean_fitness = fitness_mass / static_cast<double>(micro);
        votes.assign(population.size(), 0.0);
        for (std::size_t k = 0; k < population.size(); ++k) {
            const auto& r = population[k];
            double vote = r.avg_match_set_size * r.numerosity;
            // zero-fitness rules are scored as if holding a small initial fitness
            const double per_copy = std::max(r.fitness, 0.01) / r.numerosity;
            if (static_cast<double>(r.match_count) > hp.theta_del && per_copy < 0.1 * mean_fitness)
                vote *= mean_fitness / per_copy;
            votes[k] = vote;
        }
        const auto victim = static_cast<std::size_t>(sample_weighted(rng, votes));
        if (--population[victim].numerosity == 0)
            population.erase(population.begin() + static_cast<std::ptrdiff_t>(victim));
        --micro;
    }
}

Model fit(const Dataset& train, const Hyperparams& hp, const FeatureWeights& ek)
{
    hp.validate();
    const Index m = train.instance_count();
    const Index p = train.feature_count();
    if (m == 0) throw DataError("fit: empty training set");
    const auto hist = train.class_histogram();
    if (std::count_if(hist.begin(), hist.end(), [](int c) { return c > 0; }) < 2)
        throw DataError("fit: training data must contain at least two classes");
    if (ek.normalized.size() != p) throw ConfigError("fit: expert knowledge length does not match feature count");

    Model model;
    model.hyperparams = hp;
    model.features = train.features;
    model.class_names = train.class_names;
    model.majority_class = train.majority_class();
    model.rsl = compute_rsl(train, std::max(2, hp.N), hp.rsl_override);
    model.ft.ids = train.ids;
    model.ft.scores = RowMatrixXd::Zero(m, p);

    const DiscoveryContext ctx{model.features, ek.normalized, model.hyperparams, model.rsl};
    auto& population = model.population;
    Rng rng(hp.seed);

    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index{0});
    shuffle(order, rng);
    std::size_t cursor = 0;
    std::int64_t epoch_correct = 0, epoch_seen = 0;

    std::vector<std::size_t> match_set, correct_set;
    std::vector<const Rule*> correct_ptrs;
    std::vector<double> votes(static_cast<std::size_t>(train.class_count()));

    for (std::int64_t it = 0; it < hp.iterations; ++it) {
        if (cursor == order.size()) {
            model.training_log.push_back(static_cast<double>(epoch_correct) / static_cast<double>(epoch_seen));
            epoch_correct = epoch_seen = 0;
            shuffle(order, rng);
            cursor = 0;
        }
        const Index row = order[cursor++];
        const auto instance = train.values.row(row);
        const int label = train.classes[static_cast<std::size_t>(row)];

        match_set.clear();
        for (std::size_t k = 0; k < population.size(); ++k)
            if (matches(population[k], instance)) match_set.push_back(k);

        std::fill(votes.begin(), votes.end(), 0.0);
        std::int64_t match_micro = 0;
        bool has_correct = false;
        for (std::size_t k : match_set) {
            const auto& r = population[k];
            votes[static_cast<std::size_t>(r.label)] += r.fitness * r.numerosity;
            match_micro += r.numerosity;
            has_correct = has_correct || r.label == label;
        }
        int guess = model.majority_class;
        double best = 0.0;
        for (std::size_t c = 0; c < votes.size(); ++c)
            if (votes[c] > best) {
                best = votes[c];
                guess = static_cast<int>(c);
            }
        epoch_correct += guess == label;
        ++epoch_seen;

        for (std::size_t k : match_set) {
            auto& r = population[k];
            ++r.match_count;
            if (r.label == label) ++r.correct_count;
            r.refresh(hp.nu);
            const auto size = static_cast<double>(match_micro);
            if (static_cast<double>(r.match_count) < 1.0 / hp.beta)
                r.avg_match_set_size += (size - r.avg_match_set_size) / static_cast<double>(r.match_count);
            else
                r.avg_match_set_size += hp.beta * (size - r.avg_match_set_size);
        }

        const Eigen::RowVectorXd ft_row = model.ft.scores.row(row);
        if (!has_correct) {
            Rule fresh = cover(instance, label, model.features, ek.normalized, &ft_row, model.rsl, rng, it);
            fresh.avg_match_set_size = static_cast<double>(match_micro + 1);
            fresh.refresh(hp.nu);
            population.push_back(std::move(fresh));
            match_set.push_back(population.size() - 1);
        }

        correct_set.clear();
        correct_ptrs.clear();
        double stamp_mass = 0.0;
        std::int64_t correct_micro = 0;
        for (std::size_t k : match_set) {
            const auto& r = population[k];
            if (r.label != label) continue;
            correct_set.push_back(k);
            correct_ptrs.push_back(&r);
            stamp_mass += static_cast<double>(it - r.ga_timestamp) * r.numerosity;
            correct_micro += r.numerosity;
        }
        ft_update(model.ft.scores.row(row), correct_ptrs, hp.beta);

        if (stamp_mass / static_cast<double>(correct_micro) > hp.theta_GA) {
            const Eigen::RowVectorXd updated = model.ft.scores.row(row);
            run_ga(correct_set, population, instance, label, &updated, ctx, it, rng);
        }
        delete_rules(population, hp.N, hp, rng);
    }
    if (epoch_seen > 0)
        model.training_log.push_back(static_cast<double>(epoch_correct) / static_cast<double>(epoch_seen));
    return model;
}

} // namespace lcsdive
