#include "deskrl.h"

#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "deskrl/commands.hpp"

struct drl_config {
    deskrl::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

int fail(const char* message, int code) {
    g_last_error = message;
    return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return DRL_OK;
    } catch (const deskrl::validation_error& e) {
        return fail(e.what(), DRL_ERR_VALIDATION);
    } catch (const std::exception& e) {
        return fail(e.what(), DRL_ERR_RUNTIME);
    }
}

std::vector<std::string> collect(const char* const* items, size_t n,
                                 const char* what) {
    if (n > 0 && !items)
        throw deskrl::validation_error(std::string(what) + " array is null");
    std::vector<std::string> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        if (!items[i])
            throw deskrl::validation_error(std::string(what) + " entry is null");
        out.emplace_back(items[i]);
    }
    return out;
}

const drl_config& deref(const drl_config* cfg) {
    if (!cfg) throw deskrl::validation_error("config handle is null");
    return *cfg;
}

const char* require(const char* s, const char* what) {
    if (!s) throw deskrl::validation_error(std::string(what) + " is null");
    return s;
}

}  // namespace

extern "C" {

const char* drl_version(void) { return "0.1.0"; }

const char* drl_last_error(void) { return g_last_error.c_str(); }

int drl_config_create(const char* const* overrides, size_t n_overrides,
                      drl_config** out) {
    return guarded([&] {
        if (!out) throw deskrl::validation_error("output handle pointer is null");
        auto names = collect(overrides, n_overrides, "override");
        deskrl::RunConfig cfg;
        for (const std::string& o : names) deskrl::apply_override(cfg, o);
        *out = new drl_config{std::move(cfg)};
    });
}

int drl_config_load(const char* path, const char* const* overrides,
                    size_t n_overrides, drl_config** out) {
    return guarded([&] {
        if (!out) throw deskrl::validation_error("output handle pointer is null");
        require(path, "config path");
        auto names = collect(overrides, n_overrides, "override");
        *out = new drl_config{deskrl::load_run_config(path, names)};
    });
}

void drl_config_free(drl_config* cfg) { delete cfg; }

int drl_config_dump(const drl_config* cfg, char** out) {
    return guarded([&] {
        if (!out) throw deskrl::validation_error("output string pointer is null");
        std::string text = deskrl::dump_run_config(deref(cfg).cfg);
        char* buf = static_cast<char*>(std::malloc(text.size() + 1));
        if (!buf) throw deskrl::runtime_failure("out of memory");
        std::memcpy(buf, text.c_str(), text.size() + 1);
        *out = buf;
    });
}

int drl_config_hash(const drl_config* cfg, uint64_t* out) {
    return guarded([&] {
        if (!out) throw deskrl::validation_error("output hash pointer is null");
        *out = deskrl::config_hash(deref(cfg).cfg);
    });
}

int drl_cmd_gen_data(const drl_config* cfg) {
    return guarded([&] { deskrl::cmd_gen_data(deref(cfg).cfg); });
}

int drl_cmd_train(const drl_config* cfg) {
    return guarded([&] { deskrl::cmd_train(deref(cfg).cfg); });
}

int drl_cmd_backtest(const drl_config* cfg, const char* strategy) {
    return guarded([&] {
        deskrl::cmd_backtest(deref(cfg).cfg, require(strategy, "strategy"));
    });
}

int drl_cmd_ensemble(const drl_config* cfg) {
    return guarded([&] { deskrl::cmd_ensemble(deref(cfg).cfg); });
}

int drl_cmd_explain(const drl_config* cfg, const char* checkpoint_path) {
    return guarded([&] {
        deskrl::cmd_explain(deref(cfg).cfg, require(checkpoint_path, "checkpoint path"));
    });
}

int drl_cmd_report(const drl_config* cfg, const char* const* report_paths,
                   size_t n_reports) {
    return guarded([&] {
        deskrl::cmd_report(deref(cfg).cfg, collect(report_paths, n_reports, "report path"));
    });
}

void drl_string_free(char* s) { std::free(s); }

}  // extern "C"
