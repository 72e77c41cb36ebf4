#include "deskrl/commands.hpp"

#include <algorithm>
#include <filesystem>

#include "json.hpp"

#include "deskrl/svg.hpp"

namespace deskrl {

namespace {

// Fixed streams off the global seed; every stochastic component gets its own.
constexpr std::uint64_t kStreamData = 1;
constexpr std::uint64_t kStreamFundamentals = 2;
constexpr std::uint64_t kStreamTrain = 3;
constexpr std::uint64_t kStreamWalk = 4;
constexpr std::uint64_t kStreamAttribution = 5;
constexpr std::uint64_t kStreamBaselines = 6;
constexpr std::uint64_t kStreamAgent0 = 100;  // + agent index

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    return cfg.out_dir + "/" + name;
}

void ensure_out_dir(const RunConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec)
        throw runtime_failure("cannot create output directory " + cfg.out_dir + ": " +
                              ec.message());
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    std::vector<std::string> inputs, std::vector<std::string> outputs) {
    nlohmann::json j;
    j["command"] = command;
    j["config_hash"] = hex64(config_hash(cfg));
    j["seed"] = cfg.seed;
    std::sort(inputs.begin(), inputs.end());
    std::sort(outputs.begin(), outputs.end());
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    write_text_file(out_path(cfg, "manifest_" + command + ".json"), j.dump(2) + "\n");
}

struct LoadedData {
    PriceSeries prices;
    std::vector<FundamentalSeries> fundamentals;
    std::vector<std::string> inputs;  // file paths that fed the run
};

SyntheticSpec seeded_synth(const RunConfig& cfg) {
    SyntheticSpec synth = cfg.synth;
    synth.seed = derive_seed(cfg.seed, kStreamData);
    return synth;
}

LoadedData load_inputs(const RunConfig& cfg) {
    LoadedData d;
    if (!cfg.data_csv.empty()) {
        d.prices = load_candles_csv(cfg.data_csv);
        d.inputs.push_back(cfg.data_csv);
    } else {
        d.prices = generate(seeded_synth(cfg));
    }
    if (cfg.features.include_fundamentals) {
        if (!cfg.fundamentals_csv.empty()) {
            d.fundamentals = load_fundamentals_csv(cfg.fundamentals_csv);
            d.inputs.push_back(cfg.fundamentals_csv);
        } else {
            d.fundamentals = generate_fundamentals(
                d.prices, {0, 2}, derive_seed(cfg.seed, kStreamFundamentals));
        }
    }
    return d;
}

DateRange resolve_span(const RunConfig& cfg, const PriceSeries& prices) {
    if (cfg.span_begin) return {*cfg.span_begin, *cfg.span_end};
    return {prices.first_date(), prices.last_date()};
}

WalkForwardSpec resolve_walk(const RunConfig& cfg, const PriceSeries& prices) {
    WalkForwardSpec wf;
    wf.scheme = cfg.scheme;
    wf.train_years = cfg.train_years;
    wf.test_years = cfg.test_years;
    wf.span = resolve_span(cfg, prices);
    if (cfg.extra_eval_begin)
        wf.extra_eval = DateRange{*cfg.extra_eval_begin, *cfg.extra_eval_end};
    return wf;
}

// Matrix rows covered by a date range; throws when empty.
std::pair<std::size_t, std::size_t> rows_in(const FeatureMatrix& m, DateRange span,
                                            const std::string& what) {
    std::size_t lo = m.row_lower_bound(span.begin);
    std::size_t hi_excl = m.row_lower_bound(span.end.plus_days(1));
    if (lo >= hi_excl)
        throw validation_error("no matrix rows fall inside the " + what + " span");
    return {lo, hi_excl - 1};
}

Series equity_series(const MetricsReport& report) {
    Series s{"equity", {}, {}};
    double equity = 0.0;
    for (const auto& f : report.folds) {
        if (f.failed) continue;
        for (double r : f.record.rewards) {
            s.x.push_back(static_cast<double>(s.x.size()));
            equity += r;
            s.y.push_back(equity);
        }
    }
    return s;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg) {
    cfg.check();
    ensure_out_dir(cfg);
    PriceSeries prices = generate(seeded_synth(cfg));

    std::vector<std::string> outputs = {out_path(cfg, "candles.csv")};
    save_candles_csv(prices, outputs.front());
    if (cfg.features.include_fundamentals) {
        auto fundamentals = generate_fundamentals(
            prices, {0, 2}, derive_seed(cfg.seed, kStreamFundamentals));
        outputs.push_back(out_path(cfg, "fundamentals.csv"));
        save_fundamentals_csv(fundamentals, outputs.back());
    }
    write_manifest(cfg, "gen-data", {}, outputs);
}

void cmd_train(const RunConfig& cfg) {
    cfg.check();
    ensure_out_dir(cfg);
    LoadedData data = load_inputs(cfg);

    DateRange span = resolve_span(cfg, data.prices);
    FeatureMatrix raw = build_feature_matrix(data.prices, data.fundamentals,
                                             cfg.features, span);
    Normalizer norm = fit_normalizer(raw, span);
    FeatureMatrix m = apply_normalizer(raw, norm);
    auto [lo, hi] = rows_in(m, span, "training");

    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, kStreamTrain);
    TrainResult result = train(m, lo, hi, cfg.env_config(), tc);

    std::string checkpoint = out_path(cfg, "checkpoint.json");
    std::string curve = out_path(cfg, "curve.csv");
    save_checkpoint(result.net, checkpoint);
    result.curve.to_csv(curve);
    write_manifest(cfg, "train", data.inputs, {checkpoint, curve});
}

void cmd_backtest(const RunConfig& cfg, const std::string& strategy) {
    cfg.check();
    StrategyFactory factory;
    if (strategy == "dqn") {
        factory = dqn_factory(cfg.train);
    } else if (strategy == "buyhold") {
        factory = buy_and_hold_factory();
    } else if (strategy == "macd") {
        factory = macd_factory(cfg.features.macd_fast, cfg.features.macd_slow,
                               cfg.features.macd_signal);
    } else if (strategy == "bb") {
        factory = bollinger_factory();
    } else if (strategy == "selector") {
        SelectorConfig sel;
        sel.macd_fast = cfg.features.macd_fast;
        sel.macd_slow = cfg.features.macd_slow;
        sel.macd_signal = cfg.features.macd_signal;
        sel.tc = cfg.tc;
        factory = selector_factory(sel);
    } else {
        throw validation_error("unknown strategy '" + strategy +
                               "'; expected one of dqn, buyhold, macd, bb, selector");
    }

    ensure_out_dir(cfg);
    LoadedData data = load_inputs(cfg);
    WalkForwardSpec wf = resolve_walk(cfg, data.prices);
    MetricsReport report =
        run_walk_forward(data.prices, data.fundamentals, wf, cfg.env_config(), factory,
                         derive_seed(cfg.seed, kStreamWalk), strategy);

    std::vector<std::string> outputs = {out_path(cfg, "report_" + strategy + ".json"),
                                        out_path(cfg, "trades_" + strategy + ".csv")};
    write_text_file(outputs[0], report.to_json());
    report.equity_csv(outputs[1]);

    Series equity = equity_series(report);
    if (!equity.x.empty()) {
        ChartSpec chart;
        chart.title = "walk-forward equity: " + strategy;
        chart.x_label = "test step";
        chart.y_label = "cumulative reward";
        outputs.push_back(out_path(cfg, "equity_" + strategy + ".svg"));
        write_text_file(outputs.back(), render_chart(chart, {equity}));
    }
    write_manifest(cfg, "backtest", data.inputs, outputs);
}

void cmd_ensemble(const RunConfig& cfg) {
    cfg.check();
    ensure_out_dir(cfg);
    LoadedData data = load_inputs(cfg);

    // Agents share the first fold: train on its train span, vote on its test
    // span. Later folds belong to cmd_backtest's per-fold retraining.
    WalkForwardSpec wf = resolve_walk(cfg, data.prices);
    Fold fold = make_folds(wf).front();
    FeatureMatrix raw = build_feature_matrix(data.prices, data.fundamentals,
                                             cfg.features, fold.train);
    Normalizer norm = fit_normalizer(raw, fold.train);
    FeatureMatrix m = apply_normalizer(raw, norm);
    auto [train_lo, train_hi] = rows_in(m, fold.train, "training");
    auto [test_lo, test_hi] = rows_in(m, fold.test, "test");

    std::vector<std::string> outputs;
    std::vector<QNetwork> nets;
    std::vector<TrainingCurve> curves;
    for (std::size_t i = 0; i < cfg.ensemble.n_agents; ++i) {
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, kStreamAgent0 + i);
        TrainResult result = train(m, train_lo, train_hi, cfg.env_config(), tc);
        std::string checkpoint = out_path(cfg, "agent_" + num_str(i) + ".json");
        std::string curve = out_path(cfg, "curve_" + num_str(i) + ".csv");
        save_checkpoint(result.net, checkpoint);
        result.curve.to_csv(curve);
        outputs.push_back(checkpoint);
        outputs.push_back(curve);
        nets.push_back(std::move(result.net));
        curves.push_back(std::move(result.curve));
    }

    FilterOutcome outcome = filter_agents(curves, cfg.ensemble);
    outputs.push_back(out_path(cfg, "filter_report.json"));
    write_text_file(outputs.back(), outcome.to_json());

    std::vector<QNetwork> kept;
    for (std::size_t idx : outcome.kept) kept.push_back(nets[idx]);
    EnsembleRun run = ensemble_run(kept, m, test_lo, test_hi, cfg.env_config(),
                                   cfg.ensemble);
    outputs.push_back(out_path(cfg, "vote_trace.csv"));
    run.trace_csv(outputs.back());

    MetricsReport report;
    report.name = "ensemble";
    FoldMetrics fm;
    fm.fold = fold;
    fm.sharpe = episode_sharpe(run.record);
    fm.drawdown = max_drawdown(equity_curve(run.record.rewards));
    fm.cumulative_pnl = run.record.cumulative_reward();
    fm.turnover = turnover_of(run.record.positions);
    fm.record = run.record;
    report.folds.push_back(std::move(fm));
    finalize(report);
    outputs.push_back(out_path(cfg, "report_ensemble.json"));
    write_text_file(outputs.back(), report.to_json());
    outputs.push_back(out_path(cfg, "trades_ensemble.csv"));
    report.equity_csv(outputs.back());

    write_manifest(cfg, "ensemble", data.inputs, outputs);
}

void cmd_explain(const RunConfig& cfg, const std::string& checkpoint_path) {
    cfg.check();
    QNetwork net = load_checkpoint(checkpoint_path);
    ensure_out_dir(cfg);
    LoadedData data = load_inputs(cfg);
    data.inputs.push_back(checkpoint_path);

    // Fits and baselines come from the configured span (the checkpoint's
    // training data); the walk itself may extend into the far-future span.
    DateRange fit_span = resolve_span(cfg, data.prices);
    FeatureMatrix raw = build_feature_matrix(data.prices, data.fundamentals,
                                             cfg.features, fit_span);
    Normalizer norm = fit_normalizer(raw, fit_span);
    FeatureMatrix m = apply_normalizer(raw, norm);

    auto baselines = sample_baselines(m, cfg.features, fit_span,
                                      cfg.attribution.baseline_size,
                                      derive_seed(cfg.seed, kStreamBaselines));
    DateRange walk_span = fit_span;
    if (cfg.extra_eval_begin) walk_span = {*cfg.extra_eval_begin, *cfg.extra_eval_end};

    AttributionConfig acfg = cfg.attribution;
    acfg.seed = derive_seed(cfg.seed, kStreamAttribution);
    ImportanceTable importance =
        aggregate_importance(net, m, cfg.features, walk_span, baselines, acfg);
    DecisionTimeline timeline =
        decision_timeline(net, m, cfg.features, walk_span, baselines, acfg);

    std::vector<std::string> outputs = {out_path(cfg, "importance.csv"),
                                        out_path(cfg, "timeline.csv"),
                                        out_path(cfg, "snapshot.svg")};
    write_text_file(outputs[0], importance.to_csv());
    write_text_file(outputs[1], timeline.to_csv());

    ChartSpec chart;
    chart.title = "decision snapshot";
    chart.x_label = "test step";
    chart.y_label = "action value";
    Series sell{"q_sell", {}, {}}, hold{"q_hold", {}, {}}, buy{"q_buy", {}, {}},
        action{"action", {}, {}};
    for (std::size_t i = 0; i < timeline.rows.size(); ++i) {
        double x = static_cast<double>(i);
        sell.x.push_back(x);
        sell.y.push_back(timeline.rows[i].q[0]);
        hold.x.push_back(x);
        hold.y.push_back(timeline.rows[i].q[1]);
        buy.x.push_back(x);
        buy.y.push_back(timeline.rows[i].q[2]);
        action.x.push_back(x);
        action.y.push_back(timeline.rows[i].action);
    }
    write_text_file(outputs[2], render_chart(chart, {sell, hold, buy, action}));
    write_manifest(cfg, "explain", data.inputs, outputs);
}

void cmd_report(const RunConfig& cfg, const std::vector<std::string>& report_paths) {
    cfg.check();
    if (report_paths.empty()) throw validation_error("no report files given");
    ensure_out_dir(cfg);

    std::vector<SummaryRow> rows;
    for (const std::string& path : report_paths) {
        std::string text = read_text_file(path);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception&) {
            throw validation_error("report file " + path + " is not valid JSON");
        }
        try {
            SummaryRow r;
            r.name = j.at("name").get<std::string>();
            r.sharpe_mean = j.at("aggregate").at("sharpe").at("mean").get<double>();
            r.sharpe_sd = j.at("aggregate").at("sharpe").at("sd").get<double>();
            r.drawdown_mean = j.at("aggregate").at("drawdown").at("mean").get<double>();
            r.total_pnl = j.at("total_pnl").get<double>();
            rows.push_back(std::move(r));
        } catch (const nlohmann::json::exception&) {
            throw validation_error("report file " + path + " is missing metrics fields");
        }
    }
    std::sort(rows.begin(), rows.end(),
              [](const SummaryRow& a, const SummaryRow& b) { return a.name < b.name; });

    std::vector<std::string> outputs = {out_path(cfg, "summary.csv"),
                                        out_path(cfg, "summary.svg")};
    write_text_file(outputs[0], summary_csv(rows));

    ChartSpec chart;
    chart.scatter = true;
    chart.title = "strategy summary";
    chart.x_label = "Sharpe, mean across folds";
    chart.y_label = "max drawdown, mean across folds";
    std::vector<Series> points;
    for (const SummaryRow& r : rows)
        points.push_back({r.name, {r.sharpe_mean}, {r.drawdown_mean}});
    write_text_file(outputs[1], render_chart(chart, points));

    write_manifest(cfg, "report", report_paths, outputs);
}

}  // namespace deskrl
