#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deskrl/backtest.hpp"
#include "deskrl/dqn.hpp"
#include "deskrl/ensemble.hpp"
#include "deskrl/env.hpp"
#include "deskrl/explain.hpp"
#include "deskrl/market_data.hpp"

namespace deskrl {

// Flat declarative run configuration: `key = value` lines with dotted keys
// mirroring the engine's type tree, `#` comments, every key defaulted.
// Unknown keys and malformed values fail naming the key, and the same
// `key=value` syntax serves as the CLI override mechanism.
//
// One global seed drives every stochastic component; per-module seeds are
// derived from it with fixed streams at command time, so they are not
// separate keys.

struct RunConfig {
    std::string data_csv;          // candles from this file; empty = synthetic
    std::string fundamentals_csv;  // optional storage/weather side data
    SyntheticSpec synth;
    FeatureSpec features;
    double tc = 0.1;
    int episode_length = 252;
    TrainConfig train;
    WalkScheme scheme = WalkScheme::anchored;
    int train_years = 4;
    int test_years = 1;
    std::optional<Date> span_begin;  // default: the loaded data's full span
    std::optional<Date> span_end;
    std::optional<Date> extra_eval_begin;
    std::optional<Date> extra_eval_end;
    EnsembleConfig ensemble;
    AttributionConfig attribution;
    std::string out_dir = "out";
    std::uint64_t seed = 1;

    EnvConfig env_config() const;
    void check() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides);
void apply_override(RunConfig& cfg, const std::string& assignment);

// Canonical text form: every key once, sorted, normalized values. Equal
// configs dump identically; the run hash is the FNV-1a of this dump.
std::string dump_run_config(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace deskrl
