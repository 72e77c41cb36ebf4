#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deskrl/common.hpp"
#include "deskrl/env.hpp"
#include "deskrl/market_data.hpp"

namespace deskrl {

// Date-indexed target positions in {-1, 0, +1}, defined only once the
// underlying indicator's warm-up is complete.
struct IndicatorSignal {
    std::vector<Date> dates;
    std::vector<int> positions;

    std::size_t size() const { return positions.size(); }
    // Position at the given date; 0 with defined=false outside coverage.
    int at(Date d, bool* defined = nullptr) const;

    // CSV schema: date,position
    void to_csv(const std::string& path) const;
};

// Constant long book over the whole series.
IndicatorSignal buy_and_hold(const PriceSeries& prices);

// Sign of the MACD histogram: above zero long, below zero short, zero flat.
IndicatorSignal macd_strategy(const PriceSeries& prices, int fast = 12, int slow = 26,
                              int signal_span = 9);

struct BollingerBands {
    std::vector<double> lower;   // NaN during warm-up
    std::vector<double> middle;
    std::vector<double> upper;
};

// Rolling mean +- width * rolling population sd over the trailing window.
BollingerBands bollinger_bands(const std::vector<double>& close, int period, double width);

// Mean reversion: close under the lower band goes long, over the upper band
// goes short, in between the previous target is held (initially flat).
IndicatorSignal bollinger_strategy(const PriceSeries& prices, int period = 20,
                                   double width = 2.0);

// Shaped step rewards of a signal walked over the close series, starting
// flat; the entry cost is charged at the first evaluated step. The optional
// range clips evaluation to signal dates inside it.
EpisodeRecord evaluate_signal(const IndicatorSignal& sig, const PriceSeries& prices,
                              double tc);
EpisodeRecord evaluate_signal(const IndicatorSignal& sig, const PriceSeries& prices,
                              double tc, DateRange range);

// Adapts a date-indexed signal to the rollout interface; rows whose date the
// signal does not cover map to flat.
PolicyFn signal_policy(const IndicatorSignal& sig, const FeatureMatrix& m);

// Tabular Q selector that each step follows one of the two indicator
// strategies. State: (histogram sign, band position, current position).
struct SelectorConfig {
    int macd_fast = 12;
    int macd_slow = 26;
    int macd_signal = 9;
    int boll_period = 20;
    double boll_width = 2.0;
    double tc = 0.1;
    // A short horizon and heavy exploration keep the tiny table stable;
    // emission is greedy, so training epsilon costs nothing at test time.
    double gamma = 0.5;
    double lr = 0.2;
    double epsilon = 0.5;
    int sweeps = 30;  // full passes over the training span
    std::uint64_t seed = 1;

    void check() const;
};

// Trains on the train span (Q starts at zero; zero sweeps leave the default
// follow-MACD policy) and emits the greedy policy over the test span.
IndicatorSignal rl_selector(const PriceSeries& prices, DateRange train_span,
                            DateRange test_span, const SelectorConfig& cfg);

}  // namespace deskrl
