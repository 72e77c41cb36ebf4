#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deskrl/baselines.hpp"
#include "deskrl/common.hpp"
#include "deskrl/dqn.hpp"
#include "deskrl/env.hpp"
#include "deskrl/features.hpp"
#include "deskrl/market_data.hpp"

namespace deskrl {

// ---------------------------------------------------------------------------
// fold layout
// ---------------------------------------------------------------------------

enum class WalkScheme { anchored, sliding };

struct WalkForwardSpec {
    WalkScheme scheme = WalkScheme::anchored;
    int train_years = 4;  // minimum span when anchored, fixed span when sliding
    int test_years = 1;
    DateRange span;  // dataset span; partial first/last years are dropped
    // Optional far-future span evaluated with every fold's policy (skipped
    // for folds it would overlap).
    std::optional<DateRange> extra_eval;

    void check() const;
};

struct Fold {
    DateRange train;
    DateRange test;
};

// Calendar-year folds: anchored grows the train span from the first full
// year, sliding keeps it at exactly train_years. One fold per test block
// until the last fully covered year.
std::vector<Fold> make_folds(const WalkForwardSpec& spec);

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

struct Drawdown {
    double value = 0.0;  // max over t of running peak minus equity
    double pct = 0.0;    // same, as % of that peak; 0 unless the peak is > 0
};

Drawdown max_drawdown(const std::vector<double>& equity);

// Total position change including the entry from flat.
double turnover_of(const std::vector<int>& positions);

// Running cumulative sum of per-step rewards.
std::vector<double> equity_curve(const std::vector<double>& rewards);

struct FoldMetrics {
    Fold fold;
    bool failed = false;
    std::string error;  // set when failed
    SharpeResult sharpe;
    Drawdown drawdown;
    double cumulative_pnl = 0.0;
    double turnover = 0.0;
    std::optional<SharpeResult> extra_sharpe;  // far-future span, when evaluated
    EpisodeRecord record;                      // full test-span record
};

struct Aggregate {
    double mean = 0.0;
    double sd = 0.0;  // population sd across folds
};

Aggregate aggregate_of(const std::vector<double>& values);

struct MetricsReport {
    std::string name;
    std::vector<FoldMetrics> folds;
    // Across non-failed folds.
    Aggregate sharpe;
    Aggregate drawdown;
    Aggregate pnl;
    Aggregate turnover;

    std::size_t n_failed() const;
    double total_pnl() const;  // summed over non-failed folds
    std::string to_json() const;
    // Concatenated test-span curve. CSV schema: date,fold,position,reward,equity
    void equity_csv(const std::string& path) const;
};

// Recompute the aggregate blocks from the fold list.
void finalize(MetricsReport& report);

// ---------------------------------------------------------------------------
// walk-forward driver
// ---------------------------------------------------------------------------

// Everything a strategy may look at for one fold. The matrix is normalized
// with the normalizer and PCA axis fitted on the train span only.
struct FoldContext {
    const PriceSeries& prices;
    const std::vector<FundamentalSeries>& fundamentals;
    const FeatureMatrix& matrix;
    const Normalizer& normalizer;
    const EnvConfig& env_cfg;
    Fold fold;
    std::size_t train_begin = 0;  // inclusive matrix rows covered by the fold
    std::size_t train_end = 0;
    std::size_t test_begin = 0;
    std::size_t test_end = 0;
    std::uint64_t seed = 0;  // derived per fold
};

using StrategyFactory = std::function<PolicyFn(const FoldContext&)>;

// Per fold: rebuild the matrix with train-span fits, hand it to the factory,
// roll the returned policy over the test rows, and score it. A fold that
// throws is recorded as failed rather than dropped.
MetricsReport run_walk_forward(const PriceSeries& prices,
                               const std::vector<FundamentalSeries>& fundamentals,
                               const WalkForwardSpec& wf, const EnvConfig& env_cfg,
                               const StrategyFactory& factory, std::uint64_t seed,
                               const std::string& name);

// Bundled strategies.
StrategyFactory always_flat_strategy();
StrategyFactory buy_and_hold_factory();
StrategyFactory macd_factory(int fast = 12, int slow = 26, int signal_span = 9);
StrategyFactory bollinger_factory(int period = 20, double width = 2.0);
StrategyFactory selector_factory(SelectorConfig cfg);
// Trains a fresh agent on the fold's train rows; the fold seed overrides
// cfg.seed so agents differ across folds but reruns do not.
StrategyFactory dqn_factory(TrainConfig cfg);

// ---------------------------------------------------------------------------
// cross-strategy summary
// ---------------------------------------------------------------------------

struct SummaryRow {
    std::string name;
    double sharpe_mean = 0.0;
    double sharpe_sd = 0.0;
    double drawdown_mean = 0.0;
    double total_pnl = 0.0;
};

// One row per report, sorted by name. Scatter reading: x = sharpe_mean,
// y = drawdown_mean, color = total_pnl.
std::vector<SummaryRow> summary(const std::vector<MetricsReport>& reports);
// CSV schema: name,sharpe_mean,sharpe_sd,drawdown_mean,total_pnl
std::string summary_csv(const std::vector<SummaryRow>& rows);

}  // namespace deskrl
