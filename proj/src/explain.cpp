#include "deskrl/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

namespace deskrl {

void AttributionConfig::check() const {
    if (baseline_size < 1) throw validation_error("baseline_size must be at least 1");
    if (n_permutations < 1) throw validation_error("n_permutations must be at least 1");
}

std::vector<SlotGroup> default_groups(const ObservationLayout& layout) {
    std::vector<SlotGroup> groups;
    for (std::size_t i = 0; i < layout.slots.size(); ++i) {
        const SlotInfo& slot = layout.slots[i];
        if (slot.kind != SlotKind::feature) continue;
        std::string name = slot.column;
        if (slot.lag > 0) name += "_lag" + num_str(slot.lag);
        groups.push_back({std::move(name), {i}});
    }
    return groups;
}

std::vector<std::vector<double>> sample_baselines(const FeatureMatrix& m,
                                                  const FeatureSpec& spec, DateRange span,
                                                  std::size_t count, std::uint64_t seed) {
    span.check();
    if (count < 1) throw validation_error("baseline count must be at least 1");
    ObservationBuilder builder(m, spec);

    std::vector<std::size_t> candidates;
    for (std::size_t t = m.row_lower_bound(span.begin); t < m.n_rows(); ++t) {
        if (span.end < m.dates[t]) break;
        if (t >= builder.min_index()) candidates.push_back(t);
    }
    if (candidates.empty())
        throw validation_error("baseline span covers no usable matrix rows");

    Rng rng(seed);
    std::vector<std::vector<double>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t t = candidates[rng.uniform_index(candidates.size())];
        int position = static_cast<int>(rng.uniform_index(3)) - 1;
        out.push_back(builder.build(t, position).x);
    }
    return out;
}

namespace {

void check_attribution_inputs(const std::vector<double>& x,
                              const std::vector<std::vector<double>>& baselines,
                              const std::vector<SlotGroup>& groups) {
    if (baselines.empty()) throw validation_error("baseline set is empty");
    for (const auto& b : baselines)
        if (b.size() != x.size())
            throw validation_error("baseline size does not match the observation");
    if (groups.empty()) throw validation_error("no attribution groups given");
    std::vector<char> seen(x.size(), 0);
    for (const SlotGroup& g : groups) {
        if (g.slots.empty())
            throw validation_error("attribution group " + g.name + " has no slots");
        for (std::size_t s : g.slots) {
            if (s >= x.size())
                throw validation_error("attribution group " + g.name +
                                       " references slot " + num_str(s) +
                                       " outside the observation");
            if (seen[s])
                throw validation_error("attribution groups overlap at slot " + num_str(s));
            seen[s] = 1;
        }
    }
}

std::vector<std::string> group_names(const std::vector<SlotGroup>& groups) {
    std::vector<std::string> names;
    names.reserve(groups.size());
    for (const SlotGroup& g : groups) names.push_back(g.name);
    return names;
}

}  // namespace

AttributionResult exact_shapley(const ValueFn& f, const std::vector<double>& x,
                                const std::vector<std::vector<double>>& baselines,
                                const std::vector<SlotGroup>& groups) {
    check_attribution_inputs(x, baselines, groups);
    const std::size_t n_groups = groups.size();
    if (n_groups > 15)
        throw validation_error("exact enumeration is limited to 15 groups; "
                               "use sampled_shapley");

    // v[mask] = mean over baselines of f with the masked groups taken from x.
    const std::uint32_t n_masks = 1u << n_groups;
    std::vector<double> v(n_masks, 0.0);
    for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
        double acc = 0.0;
        for (const auto& b : baselines) {
            std::vector<double> z = x;
            for (std::size_t g = 0; g < n_groups; ++g) {
                if (mask & (1u << g)) continue;
                for (std::size_t s : groups[g].slots) z[s] = b[s];
            }
            acc += f(z);
        }
        v[mask] = acc / static_cast<double>(baselines.size());
    }

    std::vector<double> fact(n_groups + 1, 1.0);
    for (std::size_t i = 1; i <= n_groups; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);

    AttributionResult res;
    res.names = group_names(groups);
    res.phi.assign(n_groups, 0.0);
    res.se.assign(n_groups, 0.0);
    for (std::size_t g = 0; g < n_groups; ++g) {
        double phi = 0.0;
        for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
            if (mask & (1u << g)) continue;
            std::size_t s = static_cast<std::size_t>(std::popcount(mask));
            double w = fact[s] * fact[n_groups - s - 1] / fact[n_groups];
            phi += w * (v[mask | (1u << g)] - v[mask]);
        }
        res.phi[g] = phi;
    }
    res.base = v[0];
    res.value = f(x);
    return res;
}

AttributionResult sampled_shapley(const ValueFn& f, const std::vector<double>& x,
                                  const std::vector<std::vector<double>>& baselines,
                                  const std::vector<SlotGroup>& groups,
                                  std::size_t n_permutations, std::uint64_t seed) {
    check_attribution_inputs(x, baselines, groups);
    if (n_permutations < 1) throw validation_error("n_permutations must be at least 1");
    const std::size_t n_groups = groups.size();

    // Base value: every group replaced by the baseline, position slots kept.
    double base = 0.0;
    for (const auto& b : baselines) {
        std::vector<double> z = x;
        for (const SlotGroup& g : groups)
            for (std::size_t s : g.slots) z[s] = b[s];
        base += f(z);
    }
    base /= static_cast<double>(baselines.size());

    Rng rng(seed);
    std::vector<std::size_t> order(n_groups);
    std::vector<double> sum(n_groups, 0.0), sumsq(n_groups, 0.0);
    for (std::size_t trial = 0; trial < n_permutations; ++trial) {
        const auto& b = baselines[rng.uniform_index(baselines.size())];
        for (std::size_t i = 0; i < n_groups; ++i) order[i] = i;
        for (std::size_t i = n_groups; i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_index(i)]);

        std::vector<double> z = x;
        for (const SlotGroup& g : groups)
            for (std::size_t s : g.slots) z[s] = b[s];
        double prev = f(z);
        for (std::size_t g : order) {
            for (std::size_t s : groups[g].slots) z[s] = x[s];
            double cur = f(z);
            double marginal = cur - prev;
            sum[g] += marginal;
            sumsq[g] += marginal * marginal;
            prev = cur;
        }
    }

    AttributionResult res;
    res.names = group_names(groups);
    res.phi.assign(n_groups, 0.0);
    res.se.assign(n_groups, 0.0);
    const double n = static_cast<double>(n_permutations);
    for (std::size_t g = 0; g < n_groups; ++g) {
        res.phi[g] = sum[g] / n;
        if (n_permutations > 1) {
            double var = (sumsq[g] - n * res.phi[g] * res.phi[g]) / (n - 1.0);
            res.se[g] = std::sqrt(std::max(var, 0.0) / n);
        }
    }
    res.base = base;
    res.value = f(x);
    return res;
}

// ---------------------------------------------------------------------------
// greedy walks over a span
// ---------------------------------------------------------------------------

namespace {

struct WalkStep {
    std::size_t row;
    Observation obs;
    int action;  // target position
    std::array<double, 3> q;
};

std::vector<WalkStep> greedy_walk(const QNetwork& net, const FeatureMatrix& m,
                                  const FeatureSpec& spec, DateRange span) {
    span.check();
    ObservationBuilder builder(m, spec);
    std::size_t t = std::max(builder.min_index(), m.row_lower_bound(span.begin));

    std::vector<WalkStep> steps;
    int position = 0;
    for (; t < m.n_rows() && !(span.end < m.dates[t]); ++t) {
        Observation obs = builder.build(t, position);
        std::vector<double> q = forward(net, obs.x);
        Action a = act_greedy(net, obs.x);
        position = to_int(a);
        steps.push_back({t, std::move(obs), position, {q[0], q[1], q[2]}});
    }
    if (steps.empty()) throw validation_error("span covers no usable matrix rows");
    return steps;
}

ValueFn q_of_action(const QNetwork& net, int action) {
    std::size_t idx = static_cast<std::size_t>(action + 1);
    return [&net, idx](const std::vector<double>& z) { return forward(net, z)[idx]; };
}

}  // namespace

std::string ImportanceTable::to_csv() const {
    std::string out = "group,mean_abs_phi\n";
    for (const ImportanceRow& r : rows) out += r.group + "," + num_str(r.mean_abs_phi) + "\n";
    return out;
}

ImportanceTable aggregate_importance(const QNetwork& net, const FeatureMatrix& m,
                                     const FeatureSpec& spec, DateRange span,
                                     const std::vector<std::vector<double>>& baselines,
                                     const AttributionConfig& cfg) {
    cfg.check();
    std::vector<WalkStep> steps = greedy_walk(net, m, spec, span);
    std::vector<SlotGroup> groups = default_groups(*steps.front().obs.layout);

    std::vector<double> acc(groups.size(), 0.0);
    for (const WalkStep& step : steps) {
        AttributionResult res =
            sampled_shapley(q_of_action(net, step.action), step.obs.x, baselines, groups,
                            cfg.n_permutations, derive_seed(cfg.seed, step.row));
        for (std::size_t g = 0; g < groups.size(); ++g) acc[g] += std::abs(res.phi[g]);
    }

    ImportanceTable table;
    for (std::size_t g = 0; g < groups.size(); ++g)
        table.rows.push_back({groups[g].name, acc[g] / static_cast<double>(steps.size())});
    std::sort(table.rows.begin(), table.rows.end(),
              [](const ImportanceRow& a, const ImportanceRow& b) {
                  if (a.mean_abs_phi != b.mean_abs_phi) return a.mean_abs_phi > b.mean_abs_phi;
                  return a.group < b.group;
              });
    if (cfg.top_k > 0 && table.rows.size() > cfg.top_k) table.rows.resize(cfg.top_k);
    return table;
}

std::string DecisionTimeline::to_csv() const {
    std::string out = "date,action,q_sell,q_hold,q_buy";
    for (std::size_t j = 1; j <= top_m; ++j)
        out += ",top" + num_str(j) + "_name,top" + num_str(j) + "_phi";
    out += "\n";
    for (const TimelineRow& r : rows) {
        out += r.date.to_string() + "," + num_str(r.action) + "," + num_str(r.q[0]) + "," +
               num_str(r.q[1]) + "," + num_str(r.q[2]);
        for (const auto& [name, phi] : r.top) out += "," + name + "," + num_str(phi);
        out += "\n";
    }
    return out;
}

DecisionTimeline decision_timeline(const QNetwork& net, const FeatureMatrix& m,
                                   const FeatureSpec& spec, DateRange span,
                                   const std::vector<std::vector<double>>& baselines,
                                   const AttributionConfig& cfg) {
    cfg.check();
    std::vector<WalkStep> steps = greedy_walk(net, m, spec, span);
    std::vector<SlotGroup> groups = default_groups(*steps.front().obs.layout);

    DecisionTimeline timeline;
    timeline.top_m = std::min(cfg.timeline_top_m, groups.size());
    for (const WalkStep& step : steps) {
        TimelineRow row;
        row.date = m.dates[step.row];
        row.action = step.action;
        row.q = step.q;
        if (timeline.top_m > 0) {
            AttributionResult res =
                sampled_shapley(q_of_action(net, step.action), step.obs.x, baselines,
                                groups, cfg.n_permutations, derive_seed(cfg.seed, step.row));
            std::vector<std::size_t> idx(groups.size());
            for (std::size_t g = 0; g < idx.size(); ++g) idx[g] = g;
            std::sort(idx.begin(), idx.end(), [&res](std::size_t a, std::size_t b) {
                double fa = std::abs(res.phi[a]), fb = std::abs(res.phi[b]);
                if (fa != fb) return fa > fb;
                return res.names[a] < res.names[b];
            });
            for (std::size_t j = 0; j < timeline.top_m; ++j)
                row.top.emplace_back(res.names[idx[j]], res.phi[idx[j]]);
        }
        timeline.rows.push_back(std::move(row));
    }
    return timeline;
}

}  // namespace deskrl
