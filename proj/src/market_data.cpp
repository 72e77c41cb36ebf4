#include "deskrl/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace deskrl {

std::size_t PriceSeries::lower_bound(Date d) const {
    auto it = std::lower_bound(candles.begin(), candles.end(), d,
                               [](const Candle& c, Date x) { return c.date < x; });
    return static_cast<std::size_t>(it - candles.begin());
}

std::size_t PriceSeries::index_of(Date d) const {
    std::size_t i = lower_bound(d);
    if (i == candles.size() || candles[i].date != d)
        throw validation_error("no candle at date " + d.to_string());
    return i;
}

double FundamentalSeries::value_asof(Date d, bool& defined) const {
    auto it = std::upper_bound(dates.begin(), dates.end(), d);
    if (it == dates.begin()) {
        defined = false;
        return 0.0;
    }
    defined = true;
    return values[static_cast<std::size_t>(it - dates.begin()) - 1];
}

Regime parse_regime(std::string_view name) {
    if (name == "gbm") return Regime::gbm;
    if (name == "ou") return Regime::ou;
    if (name == "regime_switch") return Regime::regime_switch;
    throw validation_error("unknown regime '" + std::string(name) +
                           "' (want gbm, ou or regime_switch)");
}

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::gbm: return "gbm";
        case Regime::ou: return "ou";
        case Regime::regime_switch: return "regime_switch";
    }
    return "?";
}

std::string ValidationReport::to_string() const {
    std::ostringstream ss;
    for (const auto& i : issues) ss << i.date.to_string() << ": " << i.rule << "\n";
    return ss.str();
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

static const char* kCandleHeader = "date,open,high,low,close,volume";

PriceSeries load_candles_csv(const std::string& path) {
    std::string text = read_text_file(path);
    std::vector<std::string_view> lines = split(text, '\n');
    if (lines.empty() || trim(lines[0]) != kCandleHeader)
        throw validation_error(path + ": bad header, want '" + kCandleHeader + "'");

    PriceSeries out;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        std::string_view line = trim(lines[ln]);
        if (line.empty()) continue;
        std::vector<std::string_view> cells = split(line, ',');
        if (cells.size() != 6)
            throw validation_error(path + ":" + std::to_string(ln + 1) +
                                   ": expected 6 fields, got " + std::to_string(cells.size()));
        Candle c;
        c.date = Date::parse(trim(cells[0]));
        double* fields[5] = {&c.open, &c.high, &c.low, &c.close, &c.volume};
        for (int k = 0; k < 5; ++k)
            if (!parse_double(cells[static_cast<std::size_t>(k) + 1], *fields[k]))
                throw validation_error(path + ":" + std::to_string(ln + 1) +
                                       ": non-numeric field " + std::to_string(k + 2));
        out.candles.push_back(c);
    }

    std::stable_sort(out.candles.begin(), out.candles.end(),
                     [](const Candle& a, const Candle& b) { return a.date < b.date; });
    ValidationReport rep = validate(out);
    if (!rep.ok())
        throw validation_error(path + ": invalid series\n" + rep.to_string());
    return out;
}

void save_candles_csv(const PriceSeries& series, const std::string& path) {
    std::string out;
    out += kCandleHeader;
    out += '\n';
    for (const Candle& c : series.candles) {
        out += c.date.to_string();
        out += ',';
        out += num_str(c.open);
        out += ',';
        out += num_str(c.high);
        out += ',';
        out += num_str(c.low);
        out += ',';
        out += num_str(c.close);
        out += ',';
        out += num_str(c.volume);
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<FundamentalSeries> load_fundamentals_csv(const std::string& path) {
    std::string text = read_text_file(path);
    std::vector<std::string_view> lines = split(text, '\n');
    if (lines.empty()) throw validation_error(path + ": empty file");
    std::vector<std::string_view> header = split(trim(lines[0]), ',');
    if (header.size() < 2 || trim(header[0]) != "date")
        throw validation_error(path + ": bad header, want 'date,<name>,...'");

    std::size_t ncols = header.size() - 1;
    std::vector<FundamentalSeries> out(ncols);
    for (std::size_t j = 0; j < ncols; ++j) out[j].name = std::string(trim(header[j + 1]));

    Date prev{INT32_MIN};
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        std::string_view line = trim(lines[ln]);
        if (line.empty()) continue;
        std::vector<std::string_view> cells = split(line, ',');
        if (cells.size() != header.size())
            throw validation_error(path + ":" + std::to_string(ln + 1) + ": expected " +
                                   std::to_string(header.size()) + " fields");
        Date d = Date::parse(trim(cells[0]));
        if (d <= prev && prev.serial != INT32_MIN)
            throw validation_error(path + ":" + std::to_string(ln + 1) +
                                   ": dates must be strictly increasing");
        prev = d;
        for (std::size_t j = 0; j < ncols; ++j) {
            std::string_view cell = trim(cells[j + 1]);
            if (cell.empty()) {
                // Missing: carry the last value forward; leading gaps shrink
                // the series instead of filling backward.
                if (!out[j].values.empty()) {
                    out[j].dates.push_back(d);
                    out[j].values.push_back(out[j].values.back());
                }
                continue;
            }
            double v = 0.0;
            if (!parse_double(cell, v))
                throw validation_error(path + ":" + std::to_string(ln + 1) + ": column '" +
                                       out[j].name + "': non-numeric cell");
            out[j].dates.push_back(d);
            out[j].values.push_back(v);
        }
    }
    return out;
}

void save_fundamentals_csv(const std::vector<FundamentalSeries>& series,
                           const std::string& path) {
    if (series.empty()) throw validation_error("save_fundamentals_csv: no series");
    std::string out = "date";
    for (const auto& s : series) {
        out += ',';
        out += s.name;
    }
    out += '\n';
    // Union of all dates, one wide row per date; cells empty before a series
    // starts.
    std::vector<Date> all;
    for (const auto& s : series) all.insert(all.end(), s.dates.begin(), s.dates.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    for (Date d : all) {
        out += d.to_string();
        for (const auto& s : series) {
            out += ',';
            bool defined = false;
            double v = s.value_asof(d, defined);
            if (defined) out += num_str(v);
        }
        out += '\n';
    }
    write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// synthetic generation
// ---------------------------------------------------------------------------

PriceSeries generate(const SyntheticSpec& spec) {
    if (!(spec.volatility > 0.0)) throw validation_error("generate: volatility must be > 0");
    if (spec.length < 2) throw validation_error("generate: length must be >= 2");
    if (spec.intraday_noise < 0.0 || spec.intraday_noise >= 0.5)
        throw validation_error("generate: intraday_noise must be in [0, 0.5)");
    if (!(spec.start_price > 0.0)) throw validation_error("generate: start_price must be > 0");

    Rng rng(spec.seed);
    PriceSeries out;
    out.candles.reserve(static_cast<std::size_t>(spec.length));

    const double dt = 1.0 / 252.0;
    const double floor_price = 1e-6;
    Date d = spec.start_date;
    if (!d.is_weekday()) d = d.next_weekday();
    double close = spec.start_price;
    int trend_sign = 1;  // regime_switch state

    for (int t = 0; t < spec.length; ++t) {
        if (t > 0) {
            switch (spec.regime) {
                case Regime::gbm: {
                    double eps = rng.normal();
                    close *= std::exp((spec.drift - 0.5 * spec.volatility * spec.volatility) * dt +
                                      spec.volatility * std::sqrt(dt) * eps);
                    break;
                }
                case Regime::ou: {
                    double eps = rng.normal();
                    close += spec.kappa * (spec.long_run_level - close) + spec.volatility * eps;
                    break;
                }
                case Regime::regime_switch: {
                    if (rng.uniform() < spec.switch_prob) trend_sign = -trend_sign;
                    double eps = rng.normal();
                    double mu = trend_sign * spec.drift;
                    close *= std::exp((mu - 0.5 * spec.volatility * spec.volatility) * dt +
                                      spec.volatility * std::sqrt(dt) * eps);
                    break;
                }
            }
            if (close < floor_price) close = floor_price;
            d = d.next_weekday();
        }

        Candle c;
        c.date = d;
        c.close = close;
        c.open = t == 0 ? close : close * (1.0 + rng.uniform(-spec.intraday_noise,
                                                             spec.intraday_noise));
        double hi_u = std::fabs(rng.uniform(-spec.intraday_noise, spec.intraday_noise));
        double lo_u = std::fabs(rng.uniform(-spec.intraday_noise, spec.intraday_noise));
        c.high = std::max(c.open, c.close) * (1.0 + hi_u);
        c.low = std::min(c.open, c.close) * (1.0 - lo_u);
        c.volume = std::floor(1000.0 * std::exp(0.25 * rng.normal())) + 1.0;
        out.candles.push_back(c);
    }
    return out;
}

std::vector<FundamentalSeries> generate_fundamentals(const PriceSeries& prices,
                                                     const std::vector<int>& lags,
                                                     std::uint64_t seed) {
    std::vector<FundamentalSeries> out;
    std::size_t n = prices.size();
    for (std::size_t k = 0; k < lags.size(); ++k) {
        Rng rng(derive_seed(seed, k));
        FundamentalSeries s;
        s.name = "fund_" + std::to_string(lags[k]) + "d";
        s.dates.reserve(n);
        s.values.reserve(n);
        // Smoothed lagged price level plus slow OU noise: correlated with the
        // close but not a copy of it.
        double noise = 0.0;
        double smooth = prices[0].close;
        const double alpha = 0.2;
        for (std::size_t t = 0; t < n; ++t) {
            std::size_t src = t >= static_cast<std::size_t>(std::max(lags[k], 0))
                                  ? t - static_cast<std::size_t>(std::max(lags[k], 0))
                                  : 0;
            smooth += alpha * (prices[src].close - smooth);
            noise += 0.1 * (0.0 - noise) + 0.5 * rng.normal();
            s.dates.push_back(prices[t].date);
            s.values.push_back(smooth + noise);
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

ValidationReport validate(const PriceSeries& series) {
    ValidationReport rep;
    Date prev{INT32_MIN};
    for (const Candle& c : series.candles) {
        if (prev.serial != INT32_MIN) {
            if (c.date == prev) rep.issues.push_back({c.date, "duplicate date"});
            else if (c.date < prev) rep.issues.push_back({c.date, "dates not increasing"});
        }
        prev = c.date;
        if (!(c.open > 0.0 && c.high > 0.0 && c.low > 0.0 && c.close > 0.0))
            rep.issues.push_back({c.date, "prices must be positive"});
        if (c.low > std::min(c.open, c.close) + 1e-12)
            rep.issues.push_back({c.date, "low above min(open, close)"});
        if (c.high < std::max(c.open, c.close) - 1e-12)
            rep.issues.push_back({c.date, "high below max(open, close)"});
        if (c.volume < 0.0) rep.issues.push_back({c.date, "negative volume"});
    }
    return rep;
}

}  // namespace deskrl
