#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deskrl/common.hpp"

namespace deskrl {

// Daily candle, prices in pence/therm.
struct Candle {
    Date date;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double volume = 0.0;  // contract count, nonnegative
};

// Candles with strictly increasing dates.
struct PriceSeries {
    std::vector<Candle> candles;

    std::size_t size() const { return candles.size(); }
    const Candle& operator[](std::size_t i) const { return candles[i]; }
    Date first_date() const { return candles.front().date; }
    Date last_date() const { return candles.back().date; }

    // Index of the first candle with date >= d (candles.size() if none).
    std::size_t lower_bound(Date d) const;
    // Index of the candle at exactly d; throws validation_error if absent.
    std::size_t index_of(Date d) const;
};

// Named date->value series. Interior gaps are forward-filled at load time;
// values are never filled backward.
struct FundamentalSeries {
    std::string name;
    std::vector<Date> dates;    // strictly increasing
    std::vector<double> values; // same length as dates

    // Last value observed on or before d; defined=false before the first date.
    double value_asof(Date d, bool& defined) const;
};

enum class Regime { gbm, ou, regime_switch };

Regime parse_regime(std::string_view name);
std::string regime_name(Regime r);

// Synthetic daily series spec. Drift and volatility are annualized for the
// GBM regimes; kappa/long_run_level/daily_vol drive the OU regime in daily
// price units.
struct SyntheticSpec {
    Regime regime = Regime::gbm;
    double drift = 0.05;            // annualized log drift (gbm, regime_switch)
    double volatility = 0.2;        // annualized (gbm, regime_switch); daily price sd for ou
    double kappa = 0.05;            // ou mean-reversion speed per day
    double long_run_level = 50.0;   // ou long-run price level
    double switch_prob = 0.01;      // per-day regime flip probability
    std::uint64_t seed = 1;
    int length = 252;               // number of trading days, >= 2
    Date start_date = Date::from_ymd(2009, 1, 1);
    double start_price = 50.0;
    double intraday_noise = 0.005;  // bound on the open/high/low noise fraction
};

// One invariant violation found by validate().
struct ValidationIssue {
    Date date;
    std::string rule;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const { return issues.empty(); }
    std::string to_string() const;
};

PriceSeries load_candles_csv(const std::string& path);
void save_candles_csv(const PriceSeries& series, const std::string& path);

std::vector<FundamentalSeries> load_fundamentals_csv(const std::string& path);
void save_fundamentals_csv(const std::vector<FundamentalSeries>& series,
                           const std::string& path);

// Deterministic synthetic series on a weekday calendar.
PriceSeries generate(const SyntheticSpec& spec);

// Slow-moving stand-ins for demand/production style series, loosely coupled
// to the price level. One series per lag in `lags`.
std::vector<FundamentalSeries> generate_fundamentals(const PriceSeries& prices,
                                                     const std::vector<int>& lags,
                                                     std::uint64_t seed);

ValidationReport validate(const PriceSeries& series);

}  // namespace deskrl
