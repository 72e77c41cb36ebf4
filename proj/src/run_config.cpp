#include "deskrl/run_config.hpp"

#include <algorithm>

namespace deskrl {

EnvConfig RunConfig::env_config() const {
    EnvConfig env;
    env.tc = tc;
    env.episode_length = episode_length;
    env.features = features;
    return env;
}

void RunConfig::check() const {
    features.check();
    env_config().check();
    train.check();
    ensemble.check();
    attribution.check();
    if (train_years < 1) throw validation_error("walk.train_years must be positive");
    if (test_years < 1) throw validation_error("walk.test_years must be positive");
    if (span_begin.has_value() != span_end.has_value())
        throw validation_error("walk.span_begin and walk.span_end must be set together");
    if (span_begin && span_end && *span_end < *span_begin)
        throw validation_error("walk.span_end precedes walk.span_begin");
    if (extra_eval_begin.has_value() != extra_eval_end.has_value())
        throw validation_error(
            "walk.extra_eval_begin and walk.extra_eval_end must be set together");
    if (extra_eval_begin && extra_eval_end && *extra_eval_end < *extra_eval_begin)
        throw validation_error("walk.extra_eval_end precedes walk.extra_eval_begin");
    if (out_dir.empty()) throw validation_error("out_dir must not be empty");
}

namespace {

[[noreturn]] void bad_value(const std::string& key, std::string_view value) {
    throw validation_error("bad value '" + std::string(value) + "' for config key " + key);
}

double read_double(const std::string& key, std::string_view v) {
    double out = 0.0;
    if (!parse_double(v, out)) bad_value(key, v);
    return out;
}

long long read_long(const std::string& key, std::string_view v) {
    long long out = 0;
    if (!parse_long(v, out)) bad_value(key, v);
    return out;
}

int read_int(const std::string& key, std::string_view v) {
    return static_cast<int>(read_long(key, v));
}

std::size_t read_size(const std::string& key, std::string_view v) {
    long long n = read_long(key, v);
    if (n < 0) bad_value(key, v);
    return static_cast<std::size_t>(n);
}

bool read_bool(const std::string& key, std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    bad_value(key, v);
}

Date read_date(const std::string& key, std::string_view v) {
    try {
        return Date::parse(v);
    } catch (const validation_error&) {
        bad_value(key, v);
    }
}

std::optional<Date> read_opt_date(const std::string& key, std::string_view v) {
    if (v.empty()) return std::nullopt;
    return read_date(key, v);
}

template <typename T, T (*Read)(const std::string&, std::string_view)>
std::vector<T> read_list(const std::string& key, std::string_view v) {
    std::vector<T> out;
    if (trim(v).empty()) bad_value(key, v);
    for (std::string_view part : split(v, ',')) out.push_back(Read(key, trim(part)));
    return out;
}

std::string dump_bool(bool b) { return b ? "true" : "false"; }

std::string dump_opt_date(const std::optional<Date>& d) {
    return d ? d->to_string() : "";
}

template <typename T>
std::string dump_list(const std::vector<T>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += num_str(xs[i]);
    }
    return out;
}

struct Entry {
    const char* key;
    void (*set)(RunConfig&, const std::string&, std::string_view);
    std::string (*get)(const RunConfig&);
};

// Sorted by key; dump_run_config emits in this order.
const Entry kEntries[] = {
    {"attribution.baseline_size",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.attribution.baseline_size = read_size(k, v);
     },
     [](const RunConfig& c) { return num_str(c.attribution.baseline_size); }},
    {"attribution.n_permutations",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.attribution.n_permutations = read_size(k, v);
     },
     [](const RunConfig& c) { return num_str(c.attribution.n_permutations); }},
    {"attribution.timeline_top_m",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.attribution.timeline_top_m = read_size(k, v);
     },
     [](const RunConfig& c) { return num_str(c.attribution.timeline_top_m); }},
    {"attribution.top_k",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.attribution.top_k = read_size(k, v);
     },
     [](const RunConfig& c) { return num_str(c.attribution.top_k); }},
    {"data.csv",
     [](RunConfig& c, const std::string&, std::string_view v) {
         c.data_csv = std::string(v);
     },
     [](const RunConfig& c) { return c.data_csv; }},
    {"data.fundamentals_csv",
     [](RunConfig& c, const std::string&, std::string_view v) {
         c.fundamentals_csv = std::string(v);
     },
     [](const RunConfig& c) { return c.fundamentals_csv; }},
    {"ensemble.agree_pct",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.ensemble.agree_pct = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.ensemble.agree_pct); }},
    {"ensemble.n_agents",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.ensemble.n_agents = read_size(k, v);
     },
     [](const RunConfig& c) { return num_str(c.ensemble.n_agents); }},
    {"ensemble.plateau_tol",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.ensemble.plateau_tol = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.ensemble.plateau_tol); }},
    {"ensemble.tail_fraction",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.ensemble.tail_fraction = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.ensemble.tail_fraction); }},
    {"ensemble.window",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.ensemble.window = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.ensemble.window); }},
    {"env.episode_length",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.episode_length = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.episode_length); }},
    {"env.tc",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.tc = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.tc); }},
    {"features.ema_spread_span",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.features.ema_spread_span = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.features.ema_spread_span); }},
    {"features.include_fundamentals",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.features.include_fundamentals = read_bool(k, v);
     },
     [](const RunConfig& c) { return dump_bool(c.features.include_fundamentals); }},
    {"features.lookback",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.features.lookback = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.features.lookback); }},
    {"features.macd_fast",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.features.macd_fast = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.features.macd_fast); }},
    {"features.macd_signal",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.features.macd_signal = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.features.macd_signal); }},
    {"features.macd_slow",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.features.macd_slow = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.features.macd_slow); }},
    {"features.noise_fraction",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.features.noise_fraction = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.features.noise_fraction); }},
    {"features.rsi_period",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.features.rsi_period = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.features.rsi_period); }},
    {"features.var_horizons",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.features.var_horizons = read_list<int, read_int>(k, v);
     },
     [](const RunConfig& c) { return dump_list(c.features.var_horizons); }},
    {"features.vol_ewma_span",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.features.vol_ewma_span = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.features.vol_ewma_span); }},
    {"out_dir",
     [](RunConfig& c, const std::string&, std::string_view v) {
         c.out_dir = std::string(v);
     },
     [](const RunConfig& c) { return c.out_dir; }},
    {"seed",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         long long n = read_long(k, v);
         if (n < 0) bad_value(k, v);
         c.seed = static_cast<std::uint64_t>(n);
     },
     [](const RunConfig& c) { return num_str(c.seed); }},
    {"synth.drift",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.synth.drift = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.synth.drift); }},
    {"synth.intraday_noise",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.synth.intraday_noise = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.synth.intraday_noise); }},
    {"synth.kappa",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.synth.kappa = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.synth.kappa); }},
    {"synth.length",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.synth.length = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.synth.length); }},
    {"synth.long_run_level",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.synth.long_run_level = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.synth.long_run_level); }},
    {"synth.regime",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         try {
             c.synth.regime = parse_regime(v);
         } catch (const validation_error&) {
             bad_value(k, v);
         }
     },
     [](const RunConfig& c) { return regime_name(c.synth.regime); }},
    {"synth.start_date",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.synth.start_date = read_date(k, v);
     },
     [](const RunConfig& c) { return c.synth.start_date.to_string(); }},
    {"synth.start_price",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.synth.start_price = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.synth.start_price); }},
    {"synth.switch_prob",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.synth.switch_prob = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.synth.switch_prob); }},
    {"synth.volatility",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.synth.volatility = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.synth.volatility); }},
    {"train.batch_size",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.batch_size = read_size(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.batch_size); }},
    {"train.episodes",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.episodes = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.episodes); }},
    {"train.epsilon_decay_episodes",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.epsilon_decay_episodes = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.epsilon_decay_episodes); }},
    {"train.epsilon_end",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.epsilon_end = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.epsilon_end); }},
    {"train.epsilon_start",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.epsilon_start = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.epsilon_start); }},
    {"train.gamma",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.gamma = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.gamma); }},
    {"train.hidden",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.hidden = read_list<std::size_t, read_size>(k, v);
     },
     [](const RunConfig& c) { return dump_list(c.train.hidden); }},
    {"train.lr",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.lr = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.lr); }},
    {"train.priority_alpha",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.priority_alpha = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.priority_alpha); }},
    {"train.priority_beta_start",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.priority_beta_start = read_double(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.priority_beta_start); }},
    {"train.replay_capacity",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.replay_capacity = read_size(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.replay_capacity); }},
    {"train.replay_mode",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         if (v == "uniform")
             c.train.replay_mode = ReplayMode::uniform;
         else if (v == "prioritized")
             c.train.replay_mode = ReplayMode::prioritized;
         else
             bad_value(k, v);
     },
     [](const RunConfig& c) {
         return std::string(c.train.replay_mode == ReplayMode::uniform ? "uniform"
                                                                       : "prioritized");
     }},
    {"train.target_update_steps",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.target_update_steps = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.target_update_steps); }},
    {"train.warmup_transitions",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train.warmup_transitions = read_size(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train.warmup_transitions); }},
    {"walk.extra_eval_begin",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.extra_eval_begin = read_opt_date(k, v);
     },
     [](const RunConfig& c) { return dump_opt_date(c.extra_eval_begin); }},
    {"walk.extra_eval_end",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.extra_eval_end = read_opt_date(k, v);
     },
     [](const RunConfig& c) { return dump_opt_date(c.extra_eval_end); }},
    {"walk.scheme",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         if (v == "anchored")
             c.scheme = WalkScheme::anchored;
         else if (v == "sliding")
             c.scheme = WalkScheme::sliding;
         else
             bad_value(k, v);
     },
     [](const RunConfig& c) {
         return std::string(c.scheme == WalkScheme::anchored ? "anchored" : "sliding");
     }},
    {"walk.span_begin",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.span_begin = read_opt_date(k, v);
     },
     [](const RunConfig& c) { return dump_opt_date(c.span_begin); }},
    {"walk.span_end",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.span_end = read_opt_date(k, v);
     },
     [](const RunConfig& c) { return dump_opt_date(c.span_end); }},
    {"walk.test_years",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.test_years = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.test_years); }},
    {"walk.train_years",
     [](RunConfig& c, const std::string& k, std::string_view v) {
         c.train_years = read_int(k, v);
     },
     [](const RunConfig& c) { return num_str(c.train_years); }},
};

const Entry* find_entry(std::string_view key) {
    for (const Entry& e : kEntries)
        if (key == e.key) return &e;
    return nullptr;
}

void apply_assignment(RunConfig& cfg, std::string_view key, std::string_view value,
                      const std::string& where) {
    const Entry* e = find_entry(key);
    if (!e) throw validation_error("unknown config key: " + std::string(key) + where);
    e->set(cfg, e->key, value);
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::size_t line_no = 0;
    for (std::string_view line : split(text, '\n')) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw validation_error("config line " + num_str(line_no) +
                                   " is not a key = value assignment");
        apply_assignment(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                         " (line " + num_str(line_no) + ")");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides) {
    RunConfig cfg = parse_run_config(read_text_file(path));
    for (const std::string& o : overrides) apply_override(cfg, o);
    return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw validation_error("override '" + assignment + "' is not key=value");
    std::string_view view(assignment);
    apply_assignment(cfg, trim(view.substr(0, eq)), trim(view.substr(eq + 1)),
                     " (override)");
}

std::string dump_run_config(const RunConfig& cfg) {
    std::string out;
    for (const Entry& e : kEntries) out += std::string(e.key) + " = " + e.get(cfg) + "\n";
    return out;
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(dump_run_config(cfg)); }

}  // namespace deskrl
