#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deskrl/common.hpp"
#include "deskrl/market_data.hpp"

namespace deskrl {

// Observation parameters. Transaction costs live in EnvConfig, not here.
struct FeatureSpec {
    bool include_fundamentals = false;
    int ema_spread_span = 63;
    int rsi_period = 14;
    int macd_fast = 12;
    int macd_slow = 26;
    int macd_signal = 9;
    std::vector<int> var_horizons = {21, 42, 63, 252};
    int vol_ewma_span = 60;
    int lookback = 3;
    double noise_fraction = 0.01;

    void check() const;  // throws validation_error on a bad field
};

struct FeatureColumn {
    std::string name;
    std::vector<double> values;  // aligned to FeatureMatrix::dates
    // True when the value at t needs no day-t close/high/low/volume, so the
    // slot may appear in the day-t part of an observation.
    bool day_t_visible = false;
};

struct FeatureMatrix {
    std::vector<Date> dates;
    std::vector<FeatureColumn> columns;
    bool normalized = false;
    // Unscaled close prices aligned to dates; rewards are computed from these
    // even when the feature columns are z-scored.
    std::vector<double> raw_close;

    std::size_t n_rows() const { return dates.size(); }
    std::size_t n_cols() const { return columns.size(); }
    std::size_t column_index(std::string_view name) const;  // throws if absent
    const FeatureColumn& column(std::string_view name) const;
    // Index of the row at exactly d; throws if absent.
    std::size_t row_of(Date d) const;
    // First row with date >= d (n_rows() if none).
    std::size_t row_lower_bound(Date d) const;

    void to_csv(const std::string& path) const;
};

// ---------------------------------------------------------------------------
// indicator primitives
// ---------------------------------------------------------------------------

// Exponential moving average, smoothing 2/(span+1), seeded with the first
// value. Defined for every index; empty input gives empty output.
std::vector<double> ema(const std::vector<double>& xs, int span);

struct MacdResult {
    std::vector<double> macd;
    std::vector<double> signal;
    std::vector<double> histogram;
};

// fast == slow is allowed and yields identically zero lines.
MacdResult macd(const std::vector<double>& close, int fast, int slow, int signal_span);

// Wilder-smoothed RSI in [0, 100]; NaN for t < period. The 0/0 gain/loss case
// reads 50.
std::vector<double> rsi(const std::vector<double>& xs, int period);

struct VolAdjusted {
    std::vector<double> values;            // NaN for t < horizon
    std::vector<std::uint8_t> degenerate;  // 1 where sigma was floored
};

// (close_t - close_{t-h}) / (sigma_t * sqrt(h)); sigma_t is the EWMA standard
// deviation of daily close differences using data up to and including day t.
VolAdjusted vol_adjusted_return(const std::vector<double>& close, int horizon,
                                int vol_ewma_span);

struct PcaResult {
    std::vector<double> values;    // projection of every matrix row
    std::vector<double> loadings;  // per input column, unit axis
    double explained_share = 0.0;
    bool fallback = false;         // rank-deficient fit block
    std::string warning;
};

// First principal axis of the standardized fit-range block; all rows are
// projected onto that fixed axis. Sign fixed so the close-column loading is
// nonnegative.
PcaResult pca_first_component(const FeatureMatrix& m, DateRange fit);

// ---------------------------------------------------------------------------
// matrix assembly and normalization
// ---------------------------------------------------------------------------

// Columns: open/high/low/close/volume, close_diff, macd triple, rsi_close,
// rsi_volume, ema_spread, var_<h>d per horizon, pca_1, then fundamentals when
// enabled. Front rows with any undefined warm-up value are dropped. The PCA
// axis is fitted on pca_fit (whole span when absent); pass the training span
// to keep folds leak-free.
FeatureMatrix build_feature_matrix(const PriceSeries& prices,
                                   const std::vector<FundamentalSeries>& fundamentals,
                                   const FeatureSpec& spec,
                                   std::optional<DateRange> pca_fit = std::nullopt);

struct Normalizer {
    DateRange fit_range{};
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<double> sd;  // floored at kSdFloor

    static constexpr double kSdFloor = 1e-12;
    double sd_for(std::string_view column) const;  // throws if absent
};

Normalizer fit_normalizer(const FeatureMatrix& m, DateRange range);
FeatureMatrix apply_normalizer(const FeatureMatrix& m, const Normalizer& n);

// ---------------------------------------------------------------------------
// observations
// ---------------------------------------------------------------------------

enum class SlotKind { feature, position };

struct SlotInfo {
    SlotKind kind;
    std::string column;  // feature column, or pos_short/pos_flat/pos_long
    int lag;             // days back; 0 = day-t slot
};

struct ObservationLayout {
    std::vector<SlotInfo> slots;
    bool unit_scale = false;  // built from a normalized matrix

    std::size_t size() const { return slots.size(); }
};

struct Observation {
    std::vector<double> x;
    std::shared_ptr<const ObservationLayout> layout;

    std::size_t size() const { return x.size(); }
};

// Caches layout and column lookups; build() is the per-step hot path.
class ObservationBuilder {
public:
    ObservationBuilder(const FeatureMatrix& m, const FeatureSpec& spec);

    // Smallest valid t (the lookback window must fit).
    std::size_t min_index() const { return static_cast<std::size_t>(lookback_); }
    Observation build(std::size_t t, int position) const;
    const std::shared_ptr<const ObservationLayout>& layout() const { return layout_; }

private:
    const FeatureMatrix* m_;
    int lookback_;
    std::vector<std::size_t> day_t_cols_;
    std::shared_ptr<const ObservationLayout> layout_;
};

// One-shot convenience over ObservationBuilder. Full rows for t-L..t-1, then
// day-t slots (open only among raw prices), then the position one-hot.
Observation build_observation(const FeatureMatrix& m, std::size_t t, int position,
                              const FeatureSpec& spec);

// Zero-mean Gaussian noise, per-slot sd = noise_fraction x fit-range sd of the
// slot (unit for normalized matrices). Position slots are left untouched.
Observation add_noise(const Observation& obs, const Normalizer& norm,
                      double noise_fraction, Rng& rng);

}  // namespace deskrl
