#include "deskrl/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "json.hpp"

namespace deskrl {

// ---------------------------------------------------------------------------
// fold layout
// ---------------------------------------------------------------------------

void WalkForwardSpec::check() const {
    if (train_years < 1) throw validation_error("WalkForwardSpec: train_years must be >= 1");
    if (test_years < 1) throw validation_error("WalkForwardSpec: test_years must be >= 1");
    span.check();
    if (extra_eval) extra_eval->check();
}

std::vector<Fold> make_folds(const WalkForwardSpec& spec) {
    spec.check();
    int y0 = spec.span.begin.year();
    if (Date::from_ymd(y0, 1, 1) < spec.span.begin) ++y0;  // partial first year dropped
    int y1 = spec.span.end.year();
    if (spec.span.end < Date::from_ymd(y1, 12, 31)) --y1;  // partial last year dropped

    int full_years = y1 - y0 + 1;
    if (full_years < spec.train_years + spec.test_years)
        throw validation_error("make_folds: span covers " + std::to_string(full_years) +
                               " full years, need at least " +
                               std::to_string(spec.train_years + spec.test_years));

    std::vector<Fold> folds;
    for (int test_y = y0 + spec.train_years; test_y + spec.test_years - 1 <= y1;
         test_y += spec.test_years) {
        Fold f;
        int train_y0 = spec.scheme == WalkScheme::anchored ? y0 : test_y - spec.train_years;
        f.train = {Date::from_ymd(train_y0, 1, 1), Date::from_ymd(test_y - 1, 12, 31)};
        f.test = {Date::from_ymd(test_y, 1, 1),
                  Date::from_ymd(test_y + spec.test_years - 1, 12, 31)};
        folds.push_back(f);
    }
    return folds;
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

Drawdown max_drawdown(const std::vector<double>& equity) {
    if (equity.empty()) throw validation_error("max_drawdown: empty equity curve");
    Drawdown out;
    double peak = equity.front();
    double peak_at_max = peak;
    for (double e : equity) {
        peak = std::max(peak, e);
        if (peak - e > out.value) {
            out.value = peak - e;
            peak_at_max = peak;
        }
    }
    if (peak_at_max > 0.0) out.pct = 100.0 * out.value / peak_at_max;
    return out;
}

double turnover_of(const std::vector<int>& positions) {
    double total = 0.0;
    int prev = 0;
    for (int p : positions) {
        total += std::abs(p - prev);
        prev = p;
    }
    return total;
}

std::vector<double> equity_curve(const std::vector<double>& rewards) {
    std::vector<double> out;
    out.reserve(rewards.size());
    double sum = 0.0;
    for (double r : rewards) out.push_back(sum += r);
    return out;
}

Aggregate aggregate_of(const std::vector<double>& values) {
    Aggregate a;
    if (values.empty()) return a;
    for (double v : values) a.mean += v;
    a.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(var / static_cast<double>(values.size()));
    return a;
}

std::size_t MetricsReport::n_failed() const {
    std::size_t n = 0;
    for (const auto& f : folds) n += f.failed ? 1 : 0;
    return n;
}

double MetricsReport::total_pnl() const {
    double sum = 0.0;
    for (const auto& f : folds)
        if (!f.failed) sum += f.cumulative_pnl;
    return sum;
}

void finalize(MetricsReport& report) {
    std::vector<double> sharpes, drawdowns, pnls, turnovers;
    for (const auto& f : report.folds) {
        if (f.failed) continue;
        sharpes.push_back(f.sharpe.value);
        drawdowns.push_back(f.drawdown.value);
        pnls.push_back(f.cumulative_pnl);
        turnovers.push_back(f.turnover);
    }
    report.sharpe = aggregate_of(sharpes);
    report.drawdown = aggregate_of(drawdowns);
    report.pnl = aggregate_of(pnls);
    report.turnover = aggregate_of(turnovers);
}

static nlohmann::json range_json(const DateRange& r) {
    return {{"begin", r.begin.to_string()}, {"end", r.end.to_string()}};
}

static nlohmann::json aggregate_json(const Aggregate& a) {
    return {{"mean", a.mean}, {"sd", a.sd}};
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["aggregate"] = {{"sharpe", aggregate_json(sharpe)},
                      {"drawdown", aggregate_json(drawdown)},
                      {"pnl", aggregate_json(pnl)},
                      {"turnover", aggregate_json(turnover)}};
    j["total_pnl"] = total_pnl();
    j["n_failed"] = n_failed();
    nlohmann::json folds_j = nlohmann::json::array();
    for (const auto& f : folds) {
        nlohmann::json fj;
        fj["train"] = range_json(f.fold.train);
        fj["test"] = range_json(f.fold.test);
        fj["failed"] = f.failed;
        if (f.failed) {
            fj["error"] = f.error;
        } else {
            fj["sharpe"] = {{"value", f.sharpe.value}, {"degenerate", f.sharpe.degenerate}};
            fj["drawdown"] = {{"value", f.drawdown.value}, {"pct", f.drawdown.pct}};
            fj["pnl"] = f.cumulative_pnl;
            fj["turnover"] = f.turnover;
            if (f.extra_sharpe)
                fj["extra_sharpe"] = {{"value", f.extra_sharpe->value},
                                      {"degenerate", f.extra_sharpe->degenerate}};
        }
        folds_j.push_back(std::move(fj));
    }
    j["folds"] = std::move(folds_j);
    return j.dump(2) + "\n";
}

void MetricsReport::equity_csv(const std::string& path) const {
    std::string out = "date,fold,position,reward,equity\n";
    double equity = 0.0;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        const auto& f = folds[i];
        if (f.failed) continue;
        for (std::size_t k = 0; k < f.record.size(); ++k) {
            equity += f.record.rewards[k];
            out += f.record.dates[k].to_string();
            out += ',';
            out += std::to_string(i);
            out += ',';
            out += std::to_string(f.record.positions[k]);
            out += ',';
            out += num_str(f.record.rewards[k]);
            out += ',';
            out += num_str(equity);
            out += '\n';
        }
    }
    write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// walk-forward driver
// ---------------------------------------------------------------------------

MetricsReport run_walk_forward(const PriceSeries& prices,
                               const std::vector<FundamentalSeries>& fundamentals,
                               const WalkForwardSpec& wf, const EnvConfig& env_cfg,
                               const StrategyFactory& factory, std::uint64_t seed,
                               const std::string& name) {
    env_cfg.check();
    std::vector<Fold> folds = make_folds(wf);

    MetricsReport report;
    report.name = name;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        FoldMetrics fm;
        fm.fold = folds[i];
        try {
            FeatureMatrix raw =
                build_feature_matrix(prices, fundamentals, env_cfg.features, folds[i].train);
            Normalizer norm = fit_normalizer(raw, folds[i].train);
            FeatureMatrix m = apply_normalizer(raw, norm);

            std::size_t train_begin = m.row_lower_bound(folds[i].train.begin);
            std::size_t test_begin = m.row_lower_bound(folds[i].test.begin);
            std::size_t test_end_x = m.row_lower_bound(folds[i].test.end.plus_days(1));
            if (train_begin >= test_begin)
                throw validation_error("fold has no matrix rows in the train span");
            if (test_begin >= test_end_x)
                throw validation_error("fold has no matrix rows in the test span");

            FoldContext ctx{prices,    fundamentals,    m,         norm,
                            env_cfg,   folds[i],        train_begin, test_begin - 1,
                            test_begin, test_end_x - 1, derive_seed(seed, i)};
            PolicyFn policy = factory(ctx);

            fm.record = run_policy(policy, m, test_begin, test_end_x - 1, env_cfg);
            fm.sharpe = sharpe_of(fm.record.rewards);
            fm.drawdown = max_drawdown(equity_curve(fm.record.rewards));
            fm.cumulative_pnl = fm.record.cumulative_reward();
            fm.turnover = turnover_of(fm.record.positions);

            if (wf.extra_eval && folds[i].train.end < wf.extra_eval->begin) {
                std::size_t xb = m.row_lower_bound(wf.extra_eval->begin);
                std::size_t xe = m.row_lower_bound(wf.extra_eval->end.plus_days(1));
                if (xb < xe) {
                    EpisodeRecord extra = run_policy(policy, m, xb, xe - 1, env_cfg);
                    fm.extra_sharpe = sharpe_of(extra.rewards);
                }
            }
        } catch (const std::exception& e) {
            fm.failed = true;
            fm.error = e.what();
            fm.record = EpisodeRecord{};
        }
        report.folds.push_back(std::move(fm));
    }
    finalize(report);
    return report;
}

// ---------------------------------------------------------------------------
// strategies
// ---------------------------------------------------------------------------

StrategyFactory always_flat_strategy() {
    return [](const FoldContext&) -> PolicyFn {
        return [](const Observation&, std::size_t) { return Action::hold; };
    };
}

StrategyFactory buy_and_hold_factory() {
    return [](const FoldContext& ctx) -> PolicyFn {
        return signal_policy(buy_and_hold(ctx.prices), ctx.matrix);
    };
}

StrategyFactory macd_factory(int fast, int slow, int signal_span) {
    return [fast, slow, signal_span](const FoldContext& ctx) -> PolicyFn {
        return signal_policy(macd_strategy(ctx.prices, fast, slow, signal_span), ctx.matrix);
    };
}

StrategyFactory bollinger_factory(int period, double width) {
    return [period, width](const FoldContext& ctx) -> PolicyFn {
        return signal_policy(bollinger_strategy(ctx.prices, period, width), ctx.matrix);
    };
}

StrategyFactory selector_factory(SelectorConfig cfg) {
    return [cfg](const FoldContext& ctx) -> PolicyFn {
        SelectorConfig c = cfg;
        c.seed = ctx.seed;
        // Emit from the test start to the last matrix date so an extra
        // far-future evaluation span, when configured, is covered too.
        DateRange span = {ctx.fold.test.begin, ctx.matrix.dates.back()};
        return signal_policy(rl_selector(ctx.prices, ctx.fold.train, span, c), ctx.matrix);
    };
}

StrategyFactory dqn_factory(TrainConfig cfg) {
    return [cfg](const FoldContext& ctx) -> PolicyFn {
        TrainConfig tc = cfg;
        tc.seed = ctx.seed;
        TrainResult res = train(ctx.matrix, ctx.train_begin, ctx.train_end, ctx.env_cfg, tc);
        auto net = std::make_shared<QNetwork>(std::move(res.net));
        return [net](const Observation& obs, std::size_t) { return act_greedy(*net, obs.x); };
    };
}

// ---------------------------------------------------------------------------
// summary
// ---------------------------------------------------------------------------

std::vector<SummaryRow> summary(const std::vector<MetricsReport>& reports) {
    std::vector<SummaryRow> rows;
    for (const auto& r : reports) {
        SummaryRow row;
        row.name = r.name;
        row.sharpe_mean = r.sharpe.mean;
        row.sharpe_sd = r.sharpe.sd;
        row.drawdown_mean = r.drawdown.mean;
        row.total_pnl = r.total_pnl();
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(),
              [](const SummaryRow& a, const SummaryRow& b) { return a.name < b.name; });
    return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out = "name,sharpe_mean,sharpe_sd,drawdown_mean,total_pnl\n";
    for (const auto& r : rows) {
        out += r.name;
        out += ',';
        out += num_str(r.sharpe_mean);
        out += ',';
        out += num_str(r.sharpe_sd);
        out += ',';
        out += num_str(r.drawdown_mean);
        out += ',';
        out += num_str(r.total_pnl);
        out += '\n';
    }
    return out;
}

}  // namespace deskrl
