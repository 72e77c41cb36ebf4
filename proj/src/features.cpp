#include "deskrl/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace deskrl {

static const double kNaN = std::numeric_limits<double>::quiet_NaN();

void FeatureSpec::check() const {
    auto need = [](bool ok, const char* msg) {
        if (!ok) throw validation_error(std::string("FeatureSpec: ") + msg);
    };
    need(ema_spread_span >= 1, "ema_spread_span must be >= 1");
    need(rsi_period >= 1, "rsi_period must be >= 1");
    need(macd_fast >= 1 && macd_slow >= 1 && macd_signal >= 1, "macd spans must be >= 1");
    need(macd_fast < macd_slow, "macd fast span must be < slow span");
    need(vol_ewma_span >= 1, "vol_ewma_span must be >= 1");
    for (int h : var_horizons) need(h >= 1, "var horizons must be >= 1");
    need(lookback >= 0, "lookback must be >= 0");
    need(noise_fraction >= 0.0 && noise_fraction < 1.0, "noise_fraction must be in [0, 1)");
}

std::size_t FeatureMatrix::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return i;
    throw validation_error("no feature column '" + std::string(name) + "'");
}

const FeatureColumn& FeatureMatrix::column(std::string_view name) const {
    return columns[column_index(name)];
}

std::size_t FeatureMatrix::row_lower_bound(Date d) const {
    auto it = std::lower_bound(dates.begin(), dates.end(), d);
    return static_cast<std::size_t>(it - dates.begin());
}

std::size_t FeatureMatrix::row_of(Date d) const {
    std::size_t i = row_lower_bound(d);
    if (i == dates.size() || dates[i] != d)
        throw validation_error("no feature row at date " + d.to_string());
    return i;
}

void FeatureMatrix::to_csv(const std::string& path) const {
    std::string out = "date";
    for (const auto& c : columns) {
        out += ',';
        out += c.name;
    }
    out += '\n';
    for (std::size_t t = 0; t < dates.size(); ++t) {
        out += dates[t].to_string();
        for (const auto& c : columns) {
            out += ',';
            out += num_str(c.values[t]);
        }
        out += '\n';
    }
    write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// indicator primitives
// ---------------------------------------------------------------------------

std::vector<double> ema(const std::vector<double>& xs, int span) {
    if (span < 1) throw validation_error("ema: span must be >= 1");
    std::vector<double> out;
    if (xs.empty()) return out;
    out.reserve(xs.size());
    double alpha = 2.0 / (span + 1.0);
    double e = xs[0];
    out.push_back(e);
    for (std::size_t i = 1; i < xs.size(); ++i) {
        e = alpha * xs[i] + (1.0 - alpha) * e;
        out.push_back(e);
    }
    return out;
}

MacdResult macd(const std::vector<double>& close, int fast, int slow, int signal_span) {
    if (fast < 1 || slow < 1 || signal_span < 1)
        throw validation_error("macd: spans must be >= 1");
    if (close.size() <= static_cast<std::size_t>(slow))
        throw validation_error("macd: insufficient data, need more than " +
                               std::to_string(slow) + " points");
    MacdResult r;
    std::vector<double> ef = ema(close, fast);
    std::vector<double> es = ema(close, slow);
    r.macd.resize(close.size());
    for (std::size_t i = 0; i < close.size(); ++i) r.macd[i] = ef[i] - es[i];
    r.signal = ema(r.macd, signal_span);
    r.histogram.resize(close.size());
    for (std::size_t i = 0; i < close.size(); ++i) r.histogram[i] = r.macd[i] - r.signal[i];
    return r;
}

std::vector<double> rsi(const std::vector<double>& xs, int period) {
    if (period < 1) throw validation_error("rsi: period must be >= 1");
    if (xs.size() <= static_cast<std::size_t>(period))
        throw validation_error("rsi: insufficient data, need more than " +
                               std::to_string(period) + " points");

    auto to_rsi = [](double ag, double al) {
        if (ag == 0.0 && al == 0.0) return 50.0;
        if (al == 0.0) return 100.0;
        return 100.0 - 100.0 / (1.0 + ag / al);
    };

    std::vector<double> out(xs.size(), kNaN);
    double avg_gain = 0.0;
    double avg_loss = 0.0;
    for (int i = 1; i <= period; ++i) {
        double d = xs[static_cast<std::size_t>(i)] - xs[static_cast<std::size_t>(i) - 1];
        avg_gain += std::max(d, 0.0);
        avg_loss += std::max(-d, 0.0);
    }
    avg_gain /= period;
    avg_loss /= period;
    out[static_cast<std::size_t>(period)] = to_rsi(avg_gain, avg_loss);
    for (std::size_t i = static_cast<std::size_t>(period) + 1; i < xs.size(); ++i) {
        double d = xs[i] - xs[i - 1];
        avg_gain = (avg_gain * (period - 1) + std::max(d, 0.0)) / period;
        avg_loss = (avg_loss * (period - 1) + std::max(-d, 0.0)) / period;
        out[i] = to_rsi(avg_gain, avg_loss);
    }
    return out;
}

VolAdjusted vol_adjusted_return(const std::vector<double>& close, int horizon,
                                int vol_ewma_span) {
    if (horizon < 1) throw validation_error("vol_adjusted_return: horizon must be >= 1");
    if (vol_ewma_span < 1) throw validation_error("vol_adjusted_return: span must be >= 1");
    if (close.size() <= static_cast<std::size_t>(horizon))
        throw validation_error("vol_adjusted_return: insufficient data for horizon " +
                               std::to_string(horizon));

    VolAdjusted r;
    r.values.assign(close.size(), kNaN);
    r.degenerate.assign(close.size(), 0);

    // EWMA of squared daily differences, seeded with the first one.
    double alpha = 2.0 / (vol_ewma_span + 1.0);
    double var_ewma = 0.0;
    double rt_h = std::sqrt(static_cast<double>(horizon));
    for (std::size_t t = 1; t < close.size(); ++t) {
        double d = close[t] - close[t - 1];
        var_ewma = t == 1 ? d * d : alpha * d * d + (1.0 - alpha) * var_ewma;
        if (t < static_cast<std::size_t>(horizon)) continue;
        double sigma = std::sqrt(var_ewma);
        if (sigma < 1e-12) {
            r.values[t] = 0.0;
            r.degenerate[t] = 1;
        } else {
            r.values[t] = (close[t] - close[t - static_cast<std::size_t>(horizon)]) /
                          (sigma * rt_h);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// PCA first component
// ---------------------------------------------------------------------------

// Cyclic Jacobi for small symmetric matrices. Returns eigenvalues in `a`'s
// diagonal and eigenvectors as columns of `v`.
static void jacobi_eigen(std::vector<std::vector<double>>& a,
                         std::vector<std::vector<double>>& v) {
    std::size_t n = a.size();
    v.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-24) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a[p][q]) < 1e-300) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
}

PcaResult pca_first_component(const FeatureMatrix& m, DateRange fit) {
    if (m.n_cols() < 2) throw validation_error("pca: need at least 2 columns");
    std::size_t r0 = m.row_lower_bound(fit.begin);
    std::size_t r1 = m.row_lower_bound(fit.end.plus_days(1));  // one past
    if (r0 >= r1) throw validation_error("pca: fit range outside matrix dates");
    std::size_t nfit = r1 - r0;
    if (nfit < 2) throw validation_error("pca: fit range must cover at least 2 rows");

    std::size_t ncol = m.n_cols();
    std::size_t nrow = m.n_rows();

    // Standardize on the fit range; columns that are constant there are
    // zeroed everywhere so they cannot blow up out of range.
    std::vector<double> mean(ncol, 0.0), scale(ncol, 0.0), rawvar(ncol, 0.0);
    for (std::size_t j = 0; j < ncol; ++j) {
        const auto& xs = m.columns[j].values;
        double mu = 0.0;
        for (std::size_t t = r0; t < r1; ++t) mu += xs[t];
        mu /= static_cast<double>(nfit);
        double var = 0.0;
        for (std::size_t t = r0; t < r1; ++t) var += (xs[t] - mu) * (xs[t] - mu);
        var /= static_cast<double>(nfit);
        mean[j] = mu;
        rawvar[j] = var;
        scale[j] = var < 1e-24 ? 0.0 : 1.0 / std::sqrt(var);
    }

    // Covariance of the standardized fit block.
    std::vector<std::vector<double>> cov(ncol, std::vector<double>(ncol, 0.0));
    for (std::size_t j = 0; j < ncol; ++j) {
        for (std::size_t k = j; k < ncol; ++k) {
            double s = 0.0;
            const auto& xj = m.columns[j].values;
            const auto& xk = m.columns[k].values;
            for (std::size_t t = r0; t < r1; ++t)
                s += (xj[t] - mean[j]) * scale[j] * (xk[t] - mean[k]) * scale[k];
            cov[j][k] = cov[k][j] = s / static_cast<double>(nfit);
        }
    }
    double trace = 0.0;
    for (std::size_t j = 0; j < ncol; ++j) trace += cov[j][j];

    std::vector<std::vector<double>> diag = cov, vecs;
    jacobi_eigen(diag, vecs);
    std::size_t top = 0;
    for (std::size_t j = 1; j < ncol; ++j)
        if (diag[j][j] > diag[top][top]) top = j;

    PcaResult out;
    if (diag[top][top] < 1e-12) {
        // Nothing varies on the fit range: fall back to the single
        // highest-raw-variance column, standardized.
        std::size_t best = 0;
        for (std::size_t j = 1; j < ncol; ++j)
            if (rawvar[j] > rawvar[best]) best = j;
        out.fallback = true;
        out.warning = "pca: rank-deficient fit block, falling back to column '" +
                      m.columns[best].name + "'";
        out.loadings.assign(ncol, 0.0);
        out.loadings[best] = 1.0;
        out.explained_share = 0.0;
        out.values.resize(nrow);
        for (std::size_t t = 0; t < nrow; ++t)
            out.values[t] = (m.columns[best].values[t] - mean[best]) * scale[best];
        return out;
    }

    out.loadings.resize(ncol);
    for (std::size_t j = 0; j < ncol; ++j) out.loadings[j] = vecs[j][top];
    out.explained_share = trace > 0.0 ? diag[top][top] / trace : 0.0;

    // Sign convention: nonnegative close loading; fall back to the largest
    // absolute loading when there is no close column or its loading is ~0.
    std::size_t ref = 0;
    bool have_close = false;
    for (std::size_t j = 0; j < ncol; ++j)
        if (m.columns[j].name == "close") {
            ref = j;
            have_close = true;
            break;
        }
    if (!have_close || std::fabs(out.loadings[ref]) < 1e-14) {
        ref = 0;
        for (std::size_t j = 1; j < ncol; ++j)
            if (std::fabs(out.loadings[j]) > std::fabs(out.loadings[ref])) ref = j;
    }
    if (out.loadings[ref] < 0.0)
        for (double& l : out.loadings) l = -l;

    out.values.resize(nrow);
    for (std::size_t t = 0; t < nrow; ++t) {
        double s = 0.0;
        for (std::size_t j = 0; j < ncol; ++j)
            s += (m.columns[j].values[t] - mean[j]) * scale[j] * out.loadings[j];
        out.values[t] = s;
    }
    return out;
}

// ---------------------------------------------------------------------------
// matrix assembly
// ---------------------------------------------------------------------------

FeatureMatrix build_feature_matrix(const PriceSeries& prices,
                                   const std::vector<FundamentalSeries>& fundamentals,
                                   const FeatureSpec& spec,
                                   std::optional<DateRange> pca_fit) {
    spec.check();
    ValidationReport rep = validate(prices);
    if (!rep.ok()) throw validation_error("build_feature_matrix: invalid prices\n" + rep.to_string());
    std::size_t n = prices.size();
    if (n < 2) throw validation_error("build_feature_matrix: need at least 2 candles");

    std::vector<double> open(n), high(n), low(n), close(n), volume(n);
    for (std::size_t i = 0; i < n; ++i) {
        open[i] = prices[i].open;
        high[i] = prices[i].high;
        low[i] = prices[i].low;
        close[i] = prices[i].close;
        volume[i] = prices[i].volume;
    }

    FeatureMatrix m;
    m.dates.reserve(n);
    for (std::size_t i = 0; i < n; ++i) m.dates.push_back(prices[i].date);

    auto add = [&m](std::string name, std::vector<double> vals, bool day_t_visible) {
        m.columns.push_back({std::move(name), std::move(vals), day_t_visible});
    };

    add("open", open, true);  // the one raw price known at decision time
    add("high", high, false);
    add("low", low, false);
    add("close", close, false);
    add("volume", volume, false);

    std::vector<double> close_diff(n, kNaN);
    for (std::size_t i = 1; i < n; ++i) close_diff[i] = close[i] - close[i - 1];
    add("close_diff", std::move(close_diff), false);

    MacdResult mr = macd(close, spec.macd_fast, spec.macd_slow, spec.macd_signal);
    add("macd", std::move(mr.macd), false);
    add("macd_signal", std::move(mr.signal), false);
    add("macd_hist", std::move(mr.histogram), false);

    add("rsi_close", rsi(close, spec.rsi_period), false);
    add("rsi_volume", rsi(volume, spec.rsi_period), false);

    std::vector<double> spread = ema(close, spec.ema_spread_span);
    for (std::size_t i = 0; i < n; ++i) spread[i] = close[i] - spread[i];
    add("ema_spread", std::move(spread), false);

    for (int h : spec.var_horizons) {
        VolAdjusted va = vol_adjusted_return(close, h, spec.vol_ewma_span);
        add("var_" + std::to_string(h) + "d", std::move(va.values), false);
    }

    if (spec.include_fundamentals) {
        for (const auto& f : fundamentals) {
            std::vector<double> vals(n, kNaN);
            for (std::size_t i = 0; i < n; ++i) {
                bool defined = false;
                double v = f.value_asof(m.dates[i], defined);
                if (defined) vals[i] = v;
            }
            add(f.name, std::move(vals), false);
        }
    }

    // Drop front rows until every column is defined.
    std::size_t warmup = 0;
    for (const auto& c : m.columns) {
        std::size_t first = 0;
        while (first < n && std::isnan(c.values[first])) ++first;
        warmup = std::max(warmup, first);
    }
    if (warmup >= n)
        throw validation_error("build_feature_matrix: series shorter than feature warm-up");
    if (warmup > 0) {
        m.dates.erase(m.dates.begin(), m.dates.begin() + static_cast<std::ptrdiff_t>(warmup));
        for (auto& c : m.columns)
            c.values.erase(c.values.begin(), c.values.begin() + static_cast<std::ptrdiff_t>(warmup));
    }

    m.raw_close.assign(m.column("close").values.begin(), m.column("close").values.end());

    // PCA of the technical block, fitted on the requested span only (training
    // span in walk-forward use) so later rows cannot shape the axis.
    std::size_t n_tech = m.n_cols() - (spec.include_fundamentals ? fundamentals.size() : 0);
    FeatureMatrix tech;
    tech.dates = m.dates;
    tech.columns.assign(m.columns.begin(), m.columns.begin() + static_cast<std::ptrdiff_t>(n_tech));
    DateRange fitr = pca_fit.value_or(DateRange{m.dates.front(), m.dates.back()});
    fitr.begin = std::max(fitr.begin, m.dates.front());
    fitr.end = std::min(fitr.end, m.dates.back());
    if (fitr.end < fitr.begin)
        throw validation_error("build_feature_matrix: pca fit range outside data");
    PcaResult pca = pca_first_component(tech, fitr);
    FeatureColumn pcol{"pca_1", std::move(pca.values), false};
    m.columns.insert(m.columns.begin() + static_cast<std::ptrdiff_t>(n_tech), std::move(pcol));

    return m;
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

double Normalizer::sd_for(std::string_view column) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == column) return sd[i];
    throw validation_error("normalizer: unknown column '" + std::string(column) + "'");
}

Normalizer fit_normalizer(const FeatureMatrix& m, DateRange range) {
    std::size_t r0 = m.row_lower_bound(range.begin);
    std::size_t r1 = m.row_lower_bound(range.end.plus_days(1));
    if (r0 >= r1) throw validation_error("fit_normalizer: empty fit range");
    std::size_t nfit = r1 - r0;

    Normalizer n;
    n.fit_range = DateRange{m.dates[r0], m.dates[r1 - 1]};
    for (const auto& c : m.columns) {
        double mu = 0.0;
        for (std::size_t t = r0; t < r1; ++t) mu += c.values[t];
        mu /= static_cast<double>(nfit);
        double var = 0.0;
        for (std::size_t t = r0; t < r1; ++t) var += (c.values[t] - mu) * (c.values[t] - mu);
        var /= static_cast<double>(nfit);
        n.names.push_back(c.name);
        n.mean.push_back(mu);
        n.sd.push_back(std::max(std::sqrt(var), Normalizer::kSdFloor));
    }
    return n;
}

FeatureMatrix apply_normalizer(const FeatureMatrix& m, const Normalizer& n) {
    if (m.n_cols() != n.names.size())
        throw validation_error("apply_normalizer: column count mismatch");
    FeatureMatrix out = m;
    for (std::size_t j = 0; j < out.columns.size(); ++j) {
        if (out.columns[j].name != n.names[j])
            throw validation_error("apply_normalizer: column '" + out.columns[j].name +
                                   "' does not match normalizer column '" + n.names[j] + "'");
        for (double& v : out.columns[j].values) v = (v - n.mean[j]) / n.sd[j];
    }
    out.normalized = true;
    return out;
}

// ---------------------------------------------------------------------------
// observations
// ---------------------------------------------------------------------------

ObservationBuilder::ObservationBuilder(const FeatureMatrix& m, const FeatureSpec& spec)
    : m_(&m), lookback_(spec.lookback) {
    spec.check();
    auto layout = std::make_shared<ObservationLayout>();
    layout->unit_scale = m.normalized;
    for (int lag = lookback_; lag >= 1; --lag)
        for (const auto& c : m.columns)
            layout->slots.push_back({SlotKind::feature, c.name, lag});
    for (std::size_t j = 0; j < m.n_cols(); ++j)
        if (m.columns[j].day_t_visible) {
            day_t_cols_.push_back(j);
            layout->slots.push_back({SlotKind::feature, m.columns[j].name, 0});
        }
    layout->slots.push_back({SlotKind::position, "pos_short", 0});
    layout->slots.push_back({SlotKind::position, "pos_flat", 0});
    layout->slots.push_back({SlotKind::position, "pos_long", 0});
    layout_ = std::move(layout);
}

Observation ObservationBuilder::build(std::size_t t, int position) const {
    if (position < -1 || position > 1)
        throw validation_error("build_observation: position must be -1, 0 or +1");
    if (t < static_cast<std::size_t>(lookback_))
        throw validation_error("build_observation: insufficient history at index " +
                               std::to_string(t));
    if (t >= m_->n_rows())
        throw validation_error("build_observation: index past end of matrix");

    Observation obs;
    obs.layout = layout_;
    obs.x.reserve(layout_->size());
    for (int lag = lookback_; lag >= 1; --lag)
        for (const auto& c : m_->columns)
            obs.x.push_back(c.values[t - static_cast<std::size_t>(lag)]);
    for (std::size_t j : day_t_cols_) obs.x.push_back(m_->columns[j].values[t]);
    double onehot[3] = {0.0, 0.0, 0.0};
    onehot[position + 1] = 1.0;
    obs.x.push_back(onehot[0]);
    obs.x.push_back(onehot[1]);
    obs.x.push_back(onehot[2]);
    return obs;
}

Observation build_observation(const FeatureMatrix& m, std::size_t t, int position,
                              const FeatureSpec& spec) {
    return ObservationBuilder(m, spec).build(t, position);
}

Observation add_noise(const Observation& obs, const Normalizer& norm,
                      double noise_fraction, Rng& rng) {
    if (noise_fraction < 0.0 || noise_fraction >= 1.0)
        throw validation_error("add_noise: noise_fraction must be in [0, 1)");
    Observation out = obs;
    if (noise_fraction == 0.0) return out;
    if (!obs.layout) throw validation_error("add_noise: observation has no layout");
    for (std::size_t i = 0; i < out.x.size(); ++i) {
        const SlotInfo& slot = obs.layout->slots[i];
        if (slot.kind != SlotKind::feature) continue;
        double sd = obs.layout->unit_scale ? 1.0 : norm.sd_for(slot.column);
        out.x[i] += noise_fraction * sd * rng.normal();
    }
    return out;
}

}  // namespace deskrl
