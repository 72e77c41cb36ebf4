#include "deskrl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deskrl/features.hpp"

namespace deskrl {

static const double kNaN = std::numeric_limits<double>::quiet_NaN();

int IndicatorSignal::at(Date d, bool* defined) const {
    auto it = std::lower_bound(dates.begin(), dates.end(), d);
    bool hit = it != dates.end() && *it == d;
    if (defined) *defined = hit;
    return hit ? positions[static_cast<std::size_t>(it - dates.begin())] : 0;
}

void IndicatorSignal::to_csv(const std::string& path) const {
    std::string out = "date,position\n";
    for (std::size_t i = 0; i < dates.size(); ++i) {
        out += dates[i].to_string();
        out += ',';
        out += std::to_string(positions[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

static std::vector<double> closes_of(const PriceSeries& s) {
    std::vector<double> out;
    out.reserve(s.candles.size());
    for (const auto& c : s.candles) out.push_back(c.close);
    return out;
}

IndicatorSignal buy_and_hold(const PriceSeries& prices) {
    IndicatorSignal sig;
    for (const auto& c : prices.candles) {
        sig.dates.push_back(c.date);
        sig.positions.push_back(1);
    }
    return sig;
}

IndicatorSignal macd_strategy(const PriceSeries& prices, int fast, int slow,
                              int signal_span) {
    MacdResult r = macd(closes_of(prices), fast, slow, signal_span);
    IndicatorSignal sig;
    for (std::size_t i = 0; i < prices.candles.size(); ++i) {
        sig.dates.push_back(prices.candles[i].date);
        double h = r.histogram[i];
        sig.positions.push_back(h > 0.0 ? 1 : h < 0.0 ? -1 : 0);
    }
    return sig;
}

BollingerBands bollinger_bands(const std::vector<double>& close, int period, double width) {
    if (period < 1) throw validation_error("bollinger_bands: period must be >= 1");
    if (width < 0.0) throw validation_error("bollinger_bands: width must be >= 0");
    if (close.size() < static_cast<std::size_t>(period))
        throw validation_error("bollinger_bands: insufficient data, need at least " +
                               std::to_string(period) + " points");
    std::size_t n = close.size();
    BollingerBands b;
    b.lower.assign(n, kNaN);
    b.middle.assign(n, kNaN);
    b.upper.assign(n, kNaN);
    for (std::size_t i = static_cast<std::size_t>(period) - 1; i < n; ++i) {
        double mean = 0.0;
        for (std::size_t k = i + 1 - static_cast<std::size_t>(period); k <= i; ++k)
            mean += close[k];
        mean /= period;
        double var = 0.0;
        for (std::size_t k = i + 1 - static_cast<std::size_t>(period); k <= i; ++k)
            var += (close[k] - mean) * (close[k] - mean);
        double sd = std::sqrt(var / period);
        b.middle[i] = mean;
        b.lower[i] = mean - width * sd;
        b.upper[i] = mean + width * sd;
    }
    return b;
}

IndicatorSignal bollinger_strategy(const PriceSeries& prices, int period, double width) {
    std::vector<double> close = closes_of(prices);
    BollingerBands b = bollinger_bands(close, period, width);
    IndicatorSignal sig;
    int pos = 0;
    for (std::size_t i = static_cast<std::size_t>(period) - 1; i < close.size(); ++i) {
        if (close[i] < b.lower[i]) pos = 1;
        else if (close[i] > b.upper[i]) pos = -1;
        sig.dates.push_back(prices.candles[i].date);
        sig.positions.push_back(pos);
    }
    return sig;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

EpisodeRecord evaluate_signal(const IndicatorSignal& sig, const PriceSeries& prices,
                              double tc, DateRange range) {
    if (tc < 0.0) throw validation_error("evaluate_signal: tc must be >= 0");
    if (sig.dates.empty()) throw validation_error("evaluate_signal: empty signal");
    range.check();

    EpisodeRecord rec;
    int pos = 0;
    bool first = true;
    for (std::size_t i = 0; i < sig.dates.size(); ++i) {
        Date d = sig.dates[i];
        if (d < range.begin || range.end < d) continue;
        std::size_t k = prices.index_of(d);  // throws if the date is missing
        if (first) {
            rec.start_index = k;
            first = false;
        }
        double r = k > 0 ? prices.candles[k].close - prices.candles[k - 1].close : 0.0;
        int a = sig.positions[i];
        rec.dates.push_back(d);
        rec.raw_returns.push_back(r);
        rec.rewards.push_back(pos * r - tc * std::abs(a - pos));
        rec.positions.push_back(a);
        pos = a;
    }
    if (rec.rewards.empty())
        throw validation_error("evaluate_signal: no signal dates inside " +
                               range.begin.to_string() + ".." + range.end.to_string());
    return rec;
}

EpisodeRecord evaluate_signal(const IndicatorSignal& sig, const PriceSeries& prices,
                              double tc) {
    if (sig.dates.empty()) throw validation_error("evaluate_signal: empty signal");
    return evaluate_signal(sig, prices, tc, {sig.dates.front(), sig.dates.back()});
}

PolicyFn signal_policy(const IndicatorSignal& sig, const FeatureMatrix& m) {
    // Copy what the policy needs so callers may drop their instances.
    auto dates = m.dates;
    return [sig, dates](const Observation&, std::size_t t) {
        if (t >= dates.size()) throw validation_error("signal_policy: row out of range");
        return action_from_int(sig.at(dates[t]));
    };
}

// ---------------------------------------------------------------------------
// indicator selector
// ---------------------------------------------------------------------------

void SelectorConfig::check() const {
    auto need = [](bool ok, const char* msg) {
        if (!ok) throw validation_error(std::string("SelectorConfig: ") + msg);
    };
    need(macd_fast >= 1 && macd_signal >= 1, "macd spans must be >= 1");
    need(macd_fast < macd_slow, "macd_fast must be below macd_slow");
    need(boll_period >= 1, "boll_period must be >= 1");
    need(boll_width >= 0.0, "boll_width must be >= 0");
    need(tc >= 0.0, "tc must be >= 0");
    need(gamma >= 0.0 && gamma <= 1.0, "gamma must be in [0, 1]");
    need(lr >= 0.0 && lr <= 1.0, "lr must be in [0, 1]");
    need(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must be in [0, 1]");
    need(sweeps >= 0, "sweeps must be >= 0");
}

namespace {

// State: histogram sign (2) x band position (3) x current position (3).
constexpr int kStates = 18;
constexpr int kActions = 2;  // 0 = follow MACD, 1 = follow the bands

int state_of(double histogram, double close, double lower, double upper, int pos) {
    int hist_bucket = histogram >= 0.0 ? 1 : 0;
    int band_bucket = close < lower ? 0 : close > upper ? 2 : 1;
    return (hist_bucket * 3 + band_bucket) * 3 + (pos + 1);
}

int greedy_action(const std::vector<double>& q, int s) {
    return q[s * kActions] >= q[s * kActions + 1] ? 0 : 1;  // ties follow MACD
}

}  // namespace

IndicatorSignal rl_selector(const PriceSeries& prices, DateRange train_span,
                            DateRange test_span, const SelectorConfig& cfg) {
    cfg.check();
    train_span.check();
    test_span.check();
    if (!(train_span.end < test_span.begin))
        throw validation_error("rl_selector: training span must end before the test span");

    std::vector<double> close = closes_of(prices);
    MacdResult md = macd(close, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal);
    BollingerBands bands = bollinger_bands(close, cfg.boll_period, cfg.boll_width);
    IndicatorSignal macd_sig = macd_strategy(prices, cfg.macd_fast, cfg.macd_slow,
                                             cfg.macd_signal);
    IndicatorSignal boll_sig = bollinger_strategy(prices, cfg.boll_period, cfg.boll_width);

    // Usable rows need a previous close and completed band warm-up. The train
    // span is clipped forward to warm-up (folds start at the dataset start);
    // the test span must be fully covered since every step emits a position.
    std::size_t first_ok = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.boll_period) - 1);
    auto row_range = [&](DateRange span, const char* what) {
        std::size_t lo = prices.lower_bound(span.begin);
        std::size_t hi = prices.lower_bound(span.end.plus_days(1));
        if (lo >= hi)
            throw validation_error(std::string("rl_selector: no rows inside the ") + what +
                                   " span");
        return std::pair<std::size_t, std::size_t>{lo, hi};  // half-open
    };
    auto [train_lo, train_hi] = row_range(train_span, "train");
    auto [test_lo, test_hi] = row_range(test_span, "test");
    train_lo = std::max(train_lo, first_ok);
    if (train_lo >= train_hi)
        throw validation_error("rl_selector: training span has no rows past indicator warm-up");
    if (test_lo < first_ok)
        throw validation_error("rl_selector: test span starts before indicator warm-up completes");

    auto followed = [&](int action, std::size_t k) {
        Date d = prices.candles[k].date;
        return action == 0 ? macd_sig.at(d) : boll_sig.at(d);
    };

    std::vector<double> q(kStates * kActions, 0.0);
    Rng rng(cfg.seed);
    for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
        int pos = 0;
        for (std::size_t k = train_lo; k < train_hi; ++k) {
            int s = state_of(md.histogram[k], close[k], bands.lower[k], bands.upper[k], pos);
            int a = greedy_action(q, s);
            if (rng.uniform() < cfg.epsilon) a = static_cast<int>(rng.uniform_index(kActions));
            int next_pos = followed(a, k);
            double r = close[k] - close[k - 1];
            double reward = pos * r - cfg.tc * std::abs(next_pos - pos);
            double target = reward;
            if (k + 1 < train_hi) {
                int s2 = state_of(md.histogram[k + 1], close[k + 1], bands.lower[k + 1],
                                  bands.upper[k + 1], next_pos);
                target += cfg.gamma * std::max(q[s2 * kActions], q[s2 * kActions + 1]);
            }
            q[s * kActions + a] += cfg.lr * (target - q[s * kActions + a]);
            pos = next_pos;
        }
    }

    IndicatorSignal out;
    int pos = 0;
    for (std::size_t k = test_lo; k < test_hi; ++k) {
        int s = state_of(md.histogram[k], close[k], bands.lower[k], bands.upper[k], pos);
        pos = followed(greedy_action(q, s), k);
        out.dates.push_back(prices.candles[k].date);
        out.positions.push_back(pos);
    }
    return out;
}

}  // namespace deskrl
