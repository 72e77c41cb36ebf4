#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "deskrl.h"

// Thin shell over the C API: parse arguments, build the config handle, run
// one command, map the status straight to the exit code (0 ok, 1 validation,
// 2 runtime failure).

namespace {

std::vector<const char*> c_strings(const std::vector<std::string>& xs) {
    std::vector<const char*> out;
    out.reserve(xs.size());
    for (const std::string& s : xs) out.push_back(s.c_str());
    return out;
}

int report_status(int status) {
    if (status != DRL_OK) std::fprintf(stderr, "error: %s\n", drl_last_error());
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trading research engine: synthetic data, reinforcement learning "
                 "agents, walk-forward backtests, ensembles, attribution"};
    app.require_subcommand(1);
    app.fallthrough();  // let -c/-s appear after the subcommand name

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "run config file (key = value lines)");
    app.add_option("-s,--set", overrides, "override a config key, e.g. -s seed=7")
        ->take_all();

    auto* gen = app.add_subcommand("gen-data", "write a synthetic candle CSV");
    auto* train = app.add_subcommand("train", "train one agent; checkpoint + curve");
    auto* backtest =
        app.add_subcommand("backtest", "walk-forward evaluation of one strategy");
    std::string strategy;
    backtest->add_option("--strategy", strategy, "dqn, buyhold, macd, bb or selector")
        ->required();
    auto* ensemble = app.add_subcommand(
        "ensemble", "train N agents, filter stuck ones, vote out of sample");
    auto* explain =
        app.add_subcommand("explain", "attribute a checkpoint's decisions over time");
    std::string checkpoint;
    explain->add_option("--checkpoint", checkpoint, "checkpoint JSON to explain")
        ->required();
    auto* report =
        app.add_subcommand("report", "summarize backtest reports into table + chart");
    std::vector<std::string> report_paths;
    report->add_option("reports", report_paths, "metrics report JSON files")
        ->expected(-1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : DRL_ERR_VALIDATION;
    }

    auto override_ptrs = c_strings(overrides);
    drl_config* cfg = nullptr;
    int status;
    if (config_path.empty())
        status = drl_config_create(override_ptrs.data(), override_ptrs.size(), &cfg);
    else
        status = drl_config_load(config_path.c_str(), override_ptrs.data(),
                                 override_ptrs.size(), &cfg);
    if (status != DRL_OK) return report_status(status);

    if (gen->parsed()) {
        status = drl_cmd_gen_data(cfg);
    } else if (train->parsed()) {
        status = drl_cmd_train(cfg);
    } else if (backtest->parsed()) {
        status = drl_cmd_backtest(cfg, strategy.c_str());
    } else if (ensemble->parsed()) {
        status = drl_cmd_ensemble(cfg);
    } else if (explain->parsed()) {
        status = drl_cmd_explain(cfg, checkpoint.c_str());
    } else {
        auto path_ptrs = c_strings(report_paths);
        status = drl_cmd_report(cfg, path_ptrs.data(), path_ptrs.size());
    }
    drl_config_free(cfg);
    return report_status(status);
}
