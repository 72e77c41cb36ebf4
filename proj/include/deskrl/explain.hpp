#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "deskrl/common.hpp"
#include "deskrl/dqn.hpp"
#include "deskrl/features.hpp"

namespace deskrl {

// Shapley attribution for the Q-network: distributes f(x) minus a baseline
// expectation across named groups of observation slots. Exact enumeration is
// available for small group counts, permutation sampling at scale.
//
// Ungrouped slots (the position one-hot) are pinned to the explained
// observation in every coalition, so the base value is the mean of f over the
// baseline set with those slots held fixed, and in exact mode efficiency
// sum(phi) = f(x) - base holds to machine precision.

struct SlotGroup {
    std::string name;
    std::vector<std::size_t> slots;
};

struct AttributionConfig {
    std::size_t baseline_size = 100;    // observations sampled into the baseline set
    std::size_t n_permutations = 2000;  // sampling effort per explained observation
    std::size_t top_k = 10;             // importance table rows; 0 keeps every group
    std::size_t timeline_top_m = 3;     // signed top groups exported per timeline row
    std::uint64_t seed = 1;

    void check() const;
};

struct AttributionResult {
    std::vector<std::string> names;  // group names, in input order
    std::vector<double> phi;         // Shapley value per group
    std::vector<double> se;          // Monte Carlo standard errors; zero in exact mode
    double value = 0.0;              // f(x)
    double base = 0.0;               // mean f over baselines, ungrouped slots pinned
};

using ValueFn = std::function<double(const std::vector<double>&)>;

// One singleton group per feature slot, named column or column_lagN; position
// slots are excluded from attribution.
std::vector<SlotGroup> default_groups(const ObservationLayout& layout);

// Draws count observations with replacement from the matrix rows inside span,
// pairing each with a uniformly random book position.
std::vector<std::vector<double>> sample_baselines(const FeatureMatrix& m,
                                                  const FeatureSpec& spec, DateRange span,
                                                  std::size_t count, std::uint64_t seed);

// Full subset enumeration; rejects more than 15 groups.
AttributionResult exact_shapley(const ValueFn& f, const std::vector<double>& x,
                                const std::vector<std::vector<double>>& baselines,
                                const std::vector<SlotGroup>& groups);

// Permutation-sampling estimator of the same quantity, with per-group
// standard errors from the spread of per-permutation marginals.
AttributionResult sampled_shapley(const ValueFn& f, const std::vector<double>& x,
                                  const std::vector<std::vector<double>>& baselines,
                                  const std::vector<SlotGroup>& groups,
                                  std::size_t n_permutations, std::uint64_t seed);

struct ImportanceRow {
    std::string group;
    double mean_abs_phi = 0.0;
};

struct ImportanceTable {
    std::vector<ImportanceRow> rows;  // mean |phi| descending, then name ascending

    std::string to_csv() const;  // "group,mean_abs_phi"
};

struct TimelineRow {
    Date date;
    int action = 0;             // target position in {-1, 0, 1}
    std::array<double, 3> q{};  // sell, hold, buy
    std::vector<std::pair<std::string, double>> top;  // top groups by |phi|, signed
};

struct DecisionTimeline {
    std::vector<TimelineRow> rows;
    std::size_t top_m = 0;

    std::string to_csv() const;  // date,action,q_sell,q_hold,q_buy,top1_name,top1_phi,...
};

// Both walks start flat, follow the greedy policy row by row, and attribute
// the chosen action's Q-value. The per-date sampling seed is
// derive_seed(cfg.seed, matrix row index), so a spot date can be reproduced
// with a direct sampled_shapley call; callers build the baseline set from
// training-span observations to keep evaluation rows out of it.
ImportanceTable aggregate_importance(const QNetwork& net, const FeatureMatrix& m,
                                     const FeatureSpec& spec, DateRange span,
                                     const std::vector<std::vector<double>>& baselines,
                                     const AttributionConfig& cfg);

DecisionTimeline decision_timeline(const QNetwork& net, const FeatureMatrix& m,
                                   const FeatureSpec& spec, DateRange span,
                                   const std::vector<std::vector<double>>& baselines,
                                   const AttributionConfig& cfg);

}  // namespace deskrl
