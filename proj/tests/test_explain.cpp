#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "deskrl/explain.hpp"

using namespace deskrl;

namespace {

FeatureSpec tiny_spec() {
    FeatureSpec f;
    f.lookback = 1;
    f.rsi_period = 2;
    f.macd_fast = 1;
    f.macd_slow = 2;
    f.macd_signal = 1;
    f.ema_spread_span = 2;
    f.var_horizons = {1};
    f.vol_ewma_span = 2;
    f.noise_fraction = 0.0;
    return f;
}

FeatureMatrix varied_matrix(int length, std::uint64_t seed) {
    SyntheticSpec gen;
    gen.length = length;
    gen.seed = seed;
    PriceSeries s = generate(gen);
    FeatureMatrix raw = build_feature_matrix(s, {}, tiny_spec());
    Normalizer norm = fit_normalizer(raw, {raw.dates.front(), raw.dates.back()});
    return apply_normalizer(raw, norm);
}

// Single linear layer with chosen weights; everything else zero.
QNetwork weighted_net(std::size_t input, const std::vector<std::pair<std::size_t, double>>& buy_w,
                      double hold_bias = 0.0) {
    Rng rng(1);
    QNetwork net = QNetwork::make({input, 3}, rng);
    std::vector<double> flat(net.n_params(), 0.0);
    for (auto [slot, w] : buy_w) flat[2 * input + slot] = w;
    flat[3 * input + 1] = hold_bias;
    set_params(net, flat);
    return net;
}

std::vector<SlotGroup> singleton_groups(std::size_t n) {
    std::vector<SlotGroup> g;
    for (std::size_t i = 0; i < n; ++i) g.push_back({"g" + num_str(i), {i}});
    return g;
}

// Mean over baselines of f with the coalition's slots taken from x.
double coalition_value(const ValueFn& f, const std::vector<double>& x,
                       const std::vector<std::vector<double>>& baselines,
                       const std::vector<SlotGroup>& groups,
                       const std::vector<bool>& in_coalition) {
    double acc = 0.0;
    for (const auto& b : baselines) {
        std::vector<double> z = x;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (in_coalition[g]) continue;
            for (std::size_t s : groups[g].slots) z[s] = b[s];
        }
        acc += f(z);
    }
    return acc / static_cast<double>(baselines.size());
}

// Independent oracle: average the marginal of each group over every
// permutation of the group order, which is the textbook definition.
std::vector<double> permutation_oracle(const ValueFn& f, const std::vector<double>& x,
                                       const std::vector<std::vector<double>>& baselines,
                                       const std::vector<SlotGroup>& groups) {
    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> phi(groups.size(), 0.0);
    std::size_t n_perms = 0;
    do {
        std::vector<bool> in(groups.size(), false);
        double prev = coalition_value(f, x, baselines, groups, in);
        for (std::size_t g : order) {
            in[g] = true;
            double cur = coalition_value(f, x, baselines, groups, in);
            phi[g] += cur - prev;
            prev = cur;
        }
        ++n_perms;
    } while (std::next_permutation(order.begin(), order.end()));
    for (double& p : phi) p /= static_cast<double>(n_perms);
    return phi;
}

const ValueFn kCurvy = [](const std::vector<double>& z) {
    return std::tanh(z[0] + 0.5 * z[1]) + z[1] * z[2] - 0.3 * z[2] * z[2] + 0.1 * z[0];
};

}  // namespace

// ---------------------------------------------------------------------------
// exact mode axioms
// ---------------------------------------------------------------------------

TEST_CASE("linear value functions split by their weights") {
    ValueFn f = [](const std::vector<double>& z) {
        return 1.0 * z[0] + 2.0 * z[1] - 1.0 * z[2] + 3.0 * z[3] + 0.7;
    };
    std::vector<double> x = {0.5, -1.0, 2.0, 0.25};
    std::vector<std::vector<double>> base = {{0.0, 0.0, 0.0, 0.0}};
    std::vector<SlotGroup> groups = {{"pair", {0, 1}}, {"solo", {2}}};

    AttributionResult r = exact_shapley(f, x, base, groups);
    CHECK(r.phi[0] == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(r.phi[1] == doctest::Approx(-2.0).epsilon(1e-12));
    // Slot 3 is ungrouped, so it stays pinned to x inside the base value.
    CHECK(r.base == doctest::Approx(0.7 + 3.0 * 0.25).epsilon(1e-12));
    CHECK(r.value == doctest::Approx(f(x)).epsilon(1e-12));
    CHECK(r.se == std::vector<double>{0.0, 0.0});
}

TEST_CASE("groups the function ignores get exactly zero") {
    ValueFn f = [](const std::vector<double>& z) { return z[0] * z[0]; };
    std::vector<double> x = {1.5, -2.0};
    std::vector<std::vector<double>> base = {{0.3, 0.9}, {-0.2, 4.0}};
    AttributionResult r = exact_shapley(f, x, base, singleton_groups(2));
    CHECK(r.phi[1] == 0.0);
    CHECK(r.phi[0] == doctest::Approx(r.value - r.base).epsilon(1e-12));
}

TEST_CASE("interchangeable groups get equal credit") {
    ValueFn f = [](const std::vector<double>& z) { return z[0] * z[1] + z[0] + z[1]; };
    std::vector<double> x = {0.8, 0.8, -3.0};
    std::vector<std::vector<double>> base = {{0.2, 0.2, 1.0}, {-0.4, -0.4, 2.0}};
    AttributionResult r = exact_shapley(f, x, base, singleton_groups(3));
    CHECK(r.phi[0] == doctest::Approx(r.phi[1]).epsilon(1e-12));
}

TEST_CASE("exact attributions are efficient on a nonlinear fixture") {
    std::vector<double> x = {0.9, -0.6, 1.4};
    std::vector<std::vector<double>> base = {{0.1, 0.2, -0.5}, {-1.0, 0.4, 0.0},
                                             {0.3, -0.3, 0.8}};
    AttributionResult r = exact_shapley(kCurvy, x, base, singleton_groups(3));
    double total = r.phi[0] + r.phi[1] + r.phi[2];
    CHECK(total == doctest::Approx(r.value - r.base).epsilon(1e-9));
}

TEST_CASE("exact mode matches an independent permutation enumeration") {
    std::vector<double> x = {0.9, -0.6, 1.4};
    std::vector<std::vector<double>> base = {{0.1, 0.2, -0.5}, {-1.0, 0.4, 0.0}};
    std::vector<SlotGroup> groups = {{"a", {0}}, {"b", {1}}, {"c", {2}}};

    AttributionResult r = exact_shapley(kCurvy, x, base, groups);
    std::vector<double> want = permutation_oracle(kCurvy, x, base, groups);
    for (std::size_t g = 0; g < 3; ++g)
        CHECK(r.phi[g] == doctest::Approx(want[g]).epsilon(1e-9));
}

TEST_CASE("oversized and malformed group sets are rejected") {
    ValueFn f = [](const std::vector<double>& z) { return z[0]; };
    std::vector<double> x(16, 1.0);
    std::vector<std::vector<double>> base = {std::vector<double>(16, 0.0)};
    CHECK_THROWS_WITH_AS(exact_shapley(f, x, base, singleton_groups(16)),
                         doctest::Contains("sampled_shapley"), validation_error);

    std::vector<double> x3 = {1.0, 2.0, 3.0};
    std::vector<std::vector<double>> b3 = {{0.0, 0.0, 0.0}};
    CHECK_THROWS_AS(exact_shapley(f, x3, b3, {}), validation_error);
    CHECK_THROWS_AS(exact_shapley(f, x3, {}, singleton_groups(2)), validation_error);
    CHECK_THROWS_AS(exact_shapley(f, x3, b3, {{"a", {0, 1}}, {"b", {1}}}), validation_error);
    CHECK_THROWS_AS(exact_shapley(f, x3, b3, {{"a", {7}}}), validation_error);
    CHECK_THROWS_AS(exact_shapley(f, x3, {{0.0}}, singleton_groups(2)), validation_error);
}

// ---------------------------------------------------------------------------
// sampled mode
// ---------------------------------------------------------------------------

TEST_CASE("sampling agrees with enumeration within three standard errors") {
    std::vector<double> x = {0.9, -0.6, 1.4, 0.2, -1.1};
    std::vector<std::vector<double>> base = {{0.1, 0.2, -0.5, 0.0, 0.3},
                                             {-1.0, 0.4, 0.0, 1.0, -0.2},
                                             {0.3, -0.3, 0.8, -0.6, 0.5}};
    ValueFn f = [](const std::vector<double>& z) {
        return std::tanh(z[0] + 0.5 * z[1]) + z[1] * z[2] - 0.3 * z[3] * z[4] + 0.2 * z[4];
    };
    auto groups = singleton_groups(5);
    AttributionResult want = exact_shapley(f, x, base, groups);
    AttributionResult got = sampled_shapley(f, x, base, groups, 4000, 7);
    for (std::size_t g = 0; g < 5; ++g)
        CHECK(std::abs(got.phi[g] - want.phi[g]) <= 3.0 * got.se[g] + 1e-9);
    CHECK(got.base == doctest::Approx(want.base).epsilon(1e-12));

    double total = 0.0, tol = 0.0;
    for (std::size_t g = 0; g < 5; ++g) {
        total += got.phi[g];
        tol += got.se[g] * got.se[g];
    }
    CHECK(std::abs(total - (got.value - got.base)) <= 3.0 * std::sqrt(tol) + 1e-9);
}

TEST_CASE("standard errors shrink like the square root of effort") {
    std::vector<double> x = {0.9, -0.6, 1.4};
    std::vector<std::vector<double>> base = {{0.1, 0.2, -0.5}, {-1.0, 0.4, 0.0}};
    auto groups = singleton_groups(3);
    AttributionResult small = sampled_shapley(kCurvy, x, base, groups, 500, 11);
    AttributionResult big = sampled_shapley(kCurvy, x, base, groups, 2000, 12);
    double mean_small = (small.se[0] + small.se[1] + small.se[2]) / 3.0;
    double mean_big = (big.se[0] + big.se[1] + big.se[2]) / 3.0;
    REQUIRE(mean_big > 0.0);
    double ratio = mean_small / mean_big;
    CHECK(ratio > 1.6);
    CHECK(ratio < 2.4);
}

TEST_CASE("sampling is deterministic per seed") {
    std::vector<double> x = {0.9, -0.6, 1.4};
    std::vector<std::vector<double>> base = {{0.1, 0.2, -0.5}, {-1.0, 0.4, 0.0}};
    auto groups = singleton_groups(3);
    AttributionResult a = sampled_shapley(kCurvy, x, base, groups, 200, 5);
    AttributionResult b = sampled_shapley(kCurvy, x, base, groups, 200, 5);
    AttributionResult c = sampled_shapley(kCurvy, x, base, groups, 200, 6);
    CHECK(a.phi == b.phi);
    CHECK(a.se == b.se);
    CHECK(a.phi != c.phi);
    CHECK_THROWS_AS(sampled_shapley(kCurvy, x, base, groups, 0, 5), validation_error);
}

// ---------------------------------------------------------------------------
// grouping and baselines
// ---------------------------------------------------------------------------

TEST_CASE("default groups cover exactly the feature slots") {
    FeatureMatrix m = varied_matrix(60, 3);
    ObservationBuilder builder(m, tiny_spec());
    const ObservationLayout& layout = *builder.layout();
    std::vector<SlotGroup> groups = default_groups(layout);

    std::vector<char> covered(layout.size(), 0);
    for (const SlotGroup& g : groups) {
        REQUIRE(g.slots.size() == 1);
        covered[g.slots[0]] = 1;
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
        CAPTURE(i);
        CHECK(covered[i] == (layout.slots[i].kind == SlotKind::feature ? 1 : 0));
        if (layout.slots[i].kind != SlotKind::feature) continue;
        const SlotInfo& slot = layout.slots[i];
        std::string want =
            slot.lag > 0 ? slot.column + "_lag" + num_str(slot.lag) : slot.column;
        std::size_t g = 0;
        while (groups[g].slots[0] != i) ++g;
        CHECK(groups[g].name == want);
    }
    CHECK(groups.size() == layout.size() - 3);
}

TEST_CASE("baseline sampling is reproducible and well formed") {
    FeatureMatrix m = varied_matrix(60, 3);
    DateRange span = {m.dates.front(), m.dates.back()};
    auto a = sample_baselines(m, tiny_spec(), span, 12, 9);
    auto b = sample_baselines(m, tiny_spec(), span, 12, 9);
    CHECK(a == b);
    CHECK(a.size() == 12);

    std::size_t obs_size = ObservationBuilder(m, tiny_spec()).layout()->size();
    for (const auto& obs : a) {
        REQUIRE(obs.size() == obs_size);
        double one_hot = obs[obs_size - 3] + obs[obs_size - 2] + obs[obs_size - 1];
        CHECK(one_hot == 1.0);
    }

    CHECK_THROWS_AS(sample_baselines(m, tiny_spec(), span, 0, 9), validation_error);
    Date far = Date::from_ymd(2030, 1, 1);
    CHECK_THROWS_AS(sample_baselines(m, tiny_spec(), {far, far.plus_days(10)}, 4, 9),
                    validation_error);
}

// ---------------------------------------------------------------------------
// aggregation and timelines
// ---------------------------------------------------------------------------

TEST_CASE("a planted dominant feature ranks first") {
    FeatureMatrix m = varied_matrix(90, 5);
    ObservationBuilder builder(m, tiny_spec());
    std::vector<SlotGroup> groups = default_groups(*builder.layout());

    // Weight ten on one feature slot of the buy output; everything else zero.
    std::size_t slot = groups[2].slots[0];
    QNetwork net = weighted_net(builder.layout()->size(), {{slot, 10.0}});

    DateRange span = {m.dates.front(), m.dates.back()};
    auto baselines = sample_baselines(m, tiny_spec(), span, 8, 21);
    AttributionConfig cfg;
    cfg.n_permutations = 150;
    cfg.top_k = 0;
    cfg.seed = 5;
    ImportanceTable table = aggregate_importance(net, m, tiny_spec(), span, baselines, cfg);

    REQUIRE(table.rows.size() == groups.size());
    CHECK(table.rows.front().group == groups[2].name);
    CHECK(table.rows.front().mean_abs_phi > 0.0);

    cfg.top_k = 3;
    CHECK(aggregate_importance(net, m, tiny_spec(), span, baselines, cfg).rows.size() == 3);
}

TEST_CASE("a constant network yields all-zero importance ranked by name") {
    FeatureMatrix m = varied_matrix(60, 3);
    ObservationBuilder builder(m, tiny_spec());
    QNetwork net = weighted_net(builder.layout()->size(), {}, 0.5);

    DateRange span = {m.dates.front(), m.dates.back()};
    auto baselines = sample_baselines(m, tiny_spec(), span, 4, 2);
    AttributionConfig cfg;
    cfg.n_permutations = 20;
    cfg.top_k = 0;
    ImportanceTable table = aggregate_importance(net, m, tiny_spec(), span, baselines, cfg);

    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        CHECK(table.rows[i].mean_abs_phi == 0.0);
        if (i > 0) CHECK(table.rows[i - 1].group < table.rows[i].group);
    }
    std::string csv = table.to_csv();
    CHECK(csv.rfind("group,mean_abs_phi\n", 0) == 0);
    CHECK(csv.find(table.rows[0].group + ",0\n") != std::string::npos);
}

TEST_CASE("timelines cover the span and follow the greedy policy") {
    FeatureMatrix m = varied_matrix(70, 8);
    FeatureSpec spec = tiny_spec();
    ObservationBuilder builder(m, spec);
    QNetwork net = weighted_net(builder.layout()->size(), {{2, 4.0}, {5, -3.0}}, 0.1);

    DateRange span = {m.dates.front(), m.dates.back()};
    auto baselines = sample_baselines(m, spec, span, 4, 2);
    AttributionConfig cfg;
    cfg.timeline_top_m = 0;
    DecisionTimeline tl = decision_timeline(net, m, spec, span, baselines, cfg);

    CHECK(tl.rows.size() == m.n_rows() - builder.min_index());
    CHECK(tl.top_m == 0);
    std::string csv = tl.to_csv();
    CHECK(csv.rfind("date,action,q_sell,q_hold,q_buy\n", 0) == 0);

    int position = 0;
    for (std::size_t k = 0; k < tl.rows.size(); ++k) {
        Observation obs = builder.build(builder.min_index() + k, position);
        std::vector<double> q = forward(net, obs.x);
        Action a = act_greedy(net, obs.x);
        CHECK(tl.rows[k].action == to_int(a));
        CHECK(tl.rows[k].q[0] == q[0]);
        CHECK(tl.rows[k].q[1] == q[1]);
        CHECK(tl.rows[k].q[2] == q[2]);
        CHECK(tl.rows[k].date == m.dates[builder.min_index() + k]);
        position = to_int(a);
    }
}

TEST_CASE("spot dates match a direct attribution with the derived seed") {
    FeatureMatrix m = varied_matrix(70, 8);
    FeatureSpec spec = tiny_spec();
    ObservationBuilder builder(m, spec);
    std::vector<SlotGroup> groups = default_groups(*builder.layout());
    QNetwork net = weighted_net(builder.layout()->size(), {{2, 4.0}, {5, -3.0}}, 0.1);

    DateRange span = {m.dates.front(), m.dates.back()};
    auto baselines = sample_baselines(m, spec, span, 4, 2);
    AttributionConfig cfg;
    cfg.n_permutations = 80;
    cfg.timeline_top_m = 2;
    cfg.seed = 13;
    DecisionTimeline tl = decision_timeline(net, m, spec, span, baselines, cfg);
    REQUIRE(tl.rows.size() > 3);
    CHECK(tl.to_csv().rfind("date,action,q_sell,q_hold,q_buy,"
                            "top1_name,top1_phi,top2_name,top2_phi\n", 0) == 0);

    // Re-derive the observation at the third row by replaying the walk.
    std::size_t k = 2;
    int position = 0;
    for (std::size_t i = 0; i < k; ++i)
        position = to_int(act_greedy(net, builder.build(builder.min_index() + i, position).x));
    std::size_t row = builder.min_index() + k;
    Observation obs = builder.build(row, position);
    int action = to_int(act_greedy(net, obs.x));
    REQUIRE(tl.rows[k].action == action);

    std::size_t q_idx = static_cast<std::size_t>(action + 1);
    ValueFn f = [&net, q_idx](const std::vector<double>& z) { return forward(net, z)[q_idx]; };
    AttributionResult direct = sampled_shapley(f, obs.x, baselines, groups,
                                               cfg.n_permutations, derive_seed(cfg.seed, row));

    std::vector<std::size_t> idx(groups.size());
    for (std::size_t g = 0; g < idx.size(); ++g) idx[g] = g;
    std::sort(idx.begin(), idx.end(), [&direct](std::size_t a, std::size_t b) {
        double fa = std::abs(direct.phi[a]), fb = std::abs(direct.phi[b]);
        if (fa != fb) return fa > fb;
        return direct.names[a] < direct.names[b];
    });
    REQUIRE(tl.rows[k].top.size() == 2);
    CHECK(tl.rows[k].top[0].first == direct.names[idx[0]]);
    CHECK(tl.rows[k].top[0].second == direct.phi[idx[0]]);
    CHECK(tl.rows[k].top[1].first == direct.names[idx[1]]);
    CHECK(tl.rows[k].top[1].second == direct.phi[idx[1]]);
}

TEST_CASE("spans without usable rows are rejected") {
    FeatureMatrix m = varied_matrix(60, 3);
    ObservationBuilder builder(m, tiny_spec());
    QNetwork net = weighted_net(builder.layout()->size(), {});
    DateRange span = {m.dates.front(), m.dates.back()};
    auto baselines = sample_baselines(m, tiny_spec(), span, 4, 2);

    Date far = Date::from_ymd(2031, 1, 1);
    AttributionConfig cfg;
    CHECK_THROWS_AS(
        decision_timeline(net, m, tiny_spec(), {far, far.plus_days(5)}, baselines, cfg),
        validation_error);
    AttributionConfig bad;
    bad.baseline_size = 0;
    CHECK_THROWS_AS(aggregate_importance(net, m, tiny_spec(), span, baselines, bad),
                    validation_error);
}
