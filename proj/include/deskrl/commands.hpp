#pragma once

#include <string>
#include <vector>

#include "deskrl/run_config.hpp"

namespace deskrl {

// Command layer behind the CLI. Every command validates the config, writes
// its artifacts under cfg.out_dir, and finishes with manifest_<command>.json
// listing inputs, outputs, the canonical config hash and the global seed.
// Reruns with an identical config and seed produce byte-identical artifacts.
//
// Output files per command:
//   gen-data:  candles.csv [, fundamentals.csv]
//   train:     checkpoint.json, curve.csv
//   backtest:  report_<strategy>.json, trades_<strategy>.csv, equity_<strategy>.svg
//   ensemble:  agent_<i>.json, curve_<i>.csv, filter_report.json,
//              report_ensemble.json, trades_ensemble.csv, vote_trace.csv
//   explain:   importance.csv, timeline.csv, snapshot.svg
//   report:    summary.csv, summary.svg

void cmd_gen_data(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_backtest(const RunConfig& cfg, const std::string& strategy);
void cmd_ensemble(const RunConfig& cfg);
void cmd_explain(const RunConfig& cfg, const std::string& checkpoint_path);
void cmd_report(const RunConfig& cfg, const std::vector<std::string>& report_paths);

}  // namespace deskrl
