#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "deskrl/run_config.hpp"

using namespace deskrl;

TEST_CASE("an empty config file yields the defaults") {
    RunConfig cfg = parse_run_config("");
    CHECK(cfg.data_csv.empty());
    CHECK(cfg.train.episodes == 2000);
    CHECK(cfg.seed == 1);
    CHECK(config_hash(cfg) == config_hash(RunConfig{}));
    cfg.check();
}

TEST_CASE("dotted keys reach every part of the type tree") {
    std::string text =
        "# research run\n"
        "synth.regime = ou\n"
        "synth.length = 1500   # six years\n"
        "synth.kappa = 0.08\n"
        "features.lookback = 2\n"
        "features.var_horizons = 21, 63\n"
        "features.include_fundamentals = true\n"
        "env.tc = 0.05\n"
        "env.episode_length = 100\n"
        "train.hidden = 32,16\n"
        "train.replay_mode = prioritized\n"
        "train.replay_capacity = 100000\n"
        "walk.scheme = sliding\n"
        "walk.span_begin = 2010-01-04\n"
        "walk.span_end = 2019-12-31\n"
        "walk.extra_eval_begin = 2020-01-02\n"
        "walk.extra_eval_end = 2020-06-30\n"
        "ensemble.n_agents = 4\n"
        "attribution.n_permutations = 64\n"
        "out_dir = /tmp/deskrl_run\n"
        "seed = 42\n";
    RunConfig cfg = parse_run_config(text);
    CHECK(cfg.synth.regime == Regime::ou);
    CHECK(cfg.synth.length == 1500);
    CHECK(cfg.synth.kappa == 0.08);
    CHECK(cfg.features.lookback == 2);
    CHECK(cfg.features.var_horizons == std::vector<int>{21, 63});
    CHECK(cfg.features.include_fundamentals);
    CHECK(cfg.tc == 0.05);
    CHECK(cfg.episode_length == 100);
    CHECK(cfg.train.hidden == std::vector<std::size_t>{32, 16});
    CHECK(cfg.train.replay_mode == ReplayMode::prioritized);
    CHECK(cfg.train.replay_capacity == 100000);
    CHECK(cfg.scheme == WalkScheme::sliding);
    REQUIRE(cfg.span_begin.has_value());
    CHECK(cfg.span_begin->to_string() == "2010-01-04");
    CHECK(cfg.extra_eval_end->to_string() == "2020-06-30");
    CHECK(cfg.ensemble.n_agents == 4);
    CHECK(cfg.attribution.n_permutations == 64);
    CHECK(cfg.out_dir == "/tmp/deskrl_run");
    CHECK(cfg.seed == 42);
    cfg.check();
}

TEST_CASE("errors name the offending key or line") {
    CHECK_THROWS_WITH_AS(parse_run_config("no.such.key = 1\n"),
                         doctest::Contains("no.such.key"), validation_error);
    CHECK_THROWS_WITH_AS(parse_run_config("train.episodes = soon\n"),
                         doctest::Contains("train.episodes"), validation_error);
    CHECK_THROWS_WITH_AS(parse_run_config("features.include_fundamentals = yes\n"),
                         doctest::Contains("features.include_fundamentals"),
                         validation_error);
    CHECK_THROWS_WITH_AS(parse_run_config("walk.span_begin = 2020-13-01\n"),
                         doctest::Contains("walk.span_begin"), validation_error);
    CHECK_THROWS_WITH_AS(parse_run_config("synth.regime = lunar\n"),
                         doctest::Contains("synth.regime"), validation_error);
    CHECK_THROWS_WITH_AS(parse_run_config("just some words\n"),
                         doctest::Contains("line 1"), validation_error);
    CHECK_THROWS_AS(parse_run_config("seed = -4\n"), validation_error);
}

TEST_CASE("overrides use the same key syntax") {
    RunConfig cfg;
    apply_override(cfg, "train.episodes=7");
    CHECK(cfg.train.episodes == 7);
    apply_override(cfg, "walk.span_begin=2011-02-01");
    CHECK(cfg.span_begin->to_string() == "2011-02-01");
    apply_override(cfg, "walk.span_begin=");
    CHECK_FALSE(cfg.span_begin.has_value());
    CHECK_THROWS_WITH_AS(apply_override(cfg, "train.episodes"),
                         doctest::Contains("key=value"), validation_error);
    CHECK_THROWS_AS(apply_override(cfg, "nope=1"), validation_error);
}

TEST_CASE("the canonical dump is sorted, complete and idempotent") {
    RunConfig cfg;
    cfg.train.replay_capacity = 100000;
    cfg.seed = 9007199254740993ull;  // above 2^53: must survive the round trip
    std::string dump = dump_run_config(cfg);

    auto lines = split(dump, '\n');
    REQUIRE(lines.back().empty());
    std::vector<std::string> keys;
    for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
        auto eq = lines[i].find('=');
        REQUIRE(eq != std::string_view::npos);
        keys.emplace_back(trim(lines[i].substr(0, eq)));
    }
    CHECK(std::is_sorted(keys.begin(), keys.end()));
    CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());

    RunConfig back = parse_run_config(dump);
    CHECK(dump_run_config(back) == dump);
    CHECK(back.seed == cfg.seed);
    CHECK(back.train.replay_capacity == 100000);
    CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("the hash separates configs that differ in one key") {
    RunConfig a, b;
    b.train.lr = 2e-3;
    CHECK(config_hash(a) != config_hash(b));
    RunConfig c;
    c.train.lr = 2e-3;
    CHECK(config_hash(b) == config_hash(c));
}

TEST_CASE("cross-field rules are enforced by check") {
    RunConfig cfg;
    cfg.span_begin = Date::from_ymd(2010, 1, 1);
    CHECK_THROWS_WITH_AS(cfg.check(), doctest::Contains("span_end"), validation_error);
    cfg.span_end = Date::from_ymd(2009, 1, 1);
    CHECK_THROWS_AS(cfg.check(), validation_error);
    cfg.span_end = Date::from_ymd(2012, 1, 1);
    cfg.check();

    cfg.extra_eval_end = Date::from_ymd(2013, 1, 1);
    CHECK_THROWS_WITH_AS(cfg.check(), doctest::Contains("extra_eval"), validation_error);
    cfg.extra_eval_begin = Date::from_ymd(2012, 6, 1);
    cfg.check();

    RunConfig bad;
    bad.out_dir = "";
    CHECK_THROWS_AS(bad.check(), validation_error);
    RunConfig years;
    years.train_years = 0;
    CHECK_THROWS_AS(years.check(), validation_error);
}

TEST_CASE("config files on disk combine with override lists") {
    std::string path = "/tmp/deskrl_cfg_test.cfg";
    write_text_file(path, "seed = 5\ntrain.episodes = 12\n");
    RunConfig cfg = load_run_config(path, {"train.episodes=3", "env.tc=0"});
    CHECK(cfg.seed == 5);
    CHECK(cfg.train.episodes == 3);
    CHECK(cfg.tc == 0.0);
}
