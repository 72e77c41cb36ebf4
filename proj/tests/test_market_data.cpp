#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "deskrl/market_data.hpp"

using namespace deskrl;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
    fs::path p = fs::temp_directory_path() / (std::string("deskrl_md_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("date parse and format round trip") {
    Date d = Date::parse("2009-01-01");
    CHECK(d.to_string() == "2009-01-01");
    CHECK(d.year() == 2009);
    CHECK(Date::parse("2020-12-31") > d);
    CHECK_THROWS_AS(Date::parse("2009-13-01"), validation_error);
    CHECK_THROWS_AS(Date::parse("2009-02-30"), validation_error);
    CHECK_THROWS_AS(Date::parse("20090101"), validation_error);
    CHECK_THROWS_AS(Date::parse("2009-1-1"), validation_error);
}

TEST_CASE("weekday stepping skips weekends") {
    Date fri = Date::parse("2009-01-02");
    CHECK(fri.is_weekday());
    Date mon = fri.next_weekday();
    CHECK(mon.to_string() == "2009-01-05");
}

TEST_CASE("load_candles_csv parses well-formed rows") {
    fs::path dir = temp_dir("load_ok");
    write_file(dir / "c.csv",
               "date,open,high,low,close,volume\n"
               "2020-01-02,50,51,49,50.5,1000\n"
               "2020-01-03,50.5,52,50,51,1100\n"
               "2020-01-06,51,51.5,50.5,51.2,900\n");
    PriceSeries s = load_candles_csv((dir / "c.csv").string());
    CHECK(s.size() == 3);
    CHECK(s[0].date.to_string() == "2020-01-02");
    CHECK(s[2].close == doctest::Approx(51.2));
    fs::remove_all(dir);
}

TEST_CASE("load_candles_csv rejects bad rows with location") {
    fs::path dir = temp_dir("load_bad");

    write_file(dir / "lowhigh.csv",
               "date,open,high,low,close,volume\n"
               "2020-01-02,50,49,52,50.5,1000\n");
    CHECK_THROWS_WITH_AS(load_candles_csv((dir / "lowhigh.csv").string()),
                         doctest::Contains("2020-01-02"), validation_error);

    write_file(dir / "dup.csv",
               "date,open,high,low,close,volume\n"
               "2020-01-02,50,51,49,50.5,1000\n"
               "2020-01-02,50,51,49,50.5,1000\n");
    CHECK_THROWS_WITH_AS(load_candles_csv((dir / "dup.csv").string()),
                         doctest::Contains("duplicate date"), validation_error);

    write_file(dir / "badnum.csv",
               "date,open,high,low,close,volume\n"
               "2020-01-02,50,51,xx,50.5,1000\n");
    CHECK_THROWS_AS(load_candles_csv((dir / "badnum.csv").string()), validation_error);

    write_file(dir / "badheader.csv", "day,open,high,low,close,volume\n");
    CHECK_THROWS_AS(load_candles_csv((dir / "badheader.csv").string()), validation_error);
    fs::remove_all(dir);
}

TEST_CASE("load_candles_csv normalizes row order by date") {
    fs::path dir = temp_dir("order");
    write_file(dir / "c.csv",
               "date,open,high,low,close,volume\n"
               "2020-01-03,50.5,52,50,51,1100\n"
               "2020-01-02,50,51,49,50.5,1000\n");
    PriceSeries s = load_candles_csv((dir / "c.csv").string());
    CHECK(s[0].date < s[1].date);
    fs::remove_all(dir);
}

TEST_CASE("candle csv round trip preserves every bit") {
    SyntheticSpec spec;
    spec.regime = Regime::gbm;
    spec.seed = 7;
    spec.length = 300;
    PriceSeries a = generate(spec);

    fs::path dir = temp_dir("roundtrip");
    save_candles_csv(a, (dir / "c.csv").string());
    PriceSeries b = load_candles_csv((dir / "c.csv").string());
    REQUIRE(b.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].date == b[i].date);
        CHECK(a[i].open == b[i].open);
        CHECK(a[i].high == b[i].high);
        CHECK(a[i].low == b[i].low);
        CHECK(a[i].close == b[i].close);
        CHECK(a[i].volume == b[i].volume);
    }
    fs::remove_all(dir);
}

TEST_CASE("generate is deterministic per seed") {
    SyntheticSpec spec;
    spec.regime = Regime::regime_switch;
    spec.seed = 42;
    spec.length = 500;
    PriceSeries a = generate(spec);
    PriceSeries b = generate(spec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].close == b[i].close);
        CHECK(a[i].volume == b[i].volume);
    }
    spec.seed = 43;
    PriceSeries c = generate(spec);
    bool same = true;
    for (std::size_t i = 0; i < a.size(); ++i) same = same && a[i].close == c[i].close;
    CHECK_FALSE(same);
}

TEST_CASE("gbm with vanishing volatility is monotone in drift sign") {
    SyntheticSpec spec;
    spec.regime = Regime::gbm;
    spec.volatility = 1e-12;
    spec.intraday_noise = 0.0;
    spec.length = 100;

    spec.drift = 0.5;
    PriceSeries up = generate(spec);
    for (std::size_t i = 1; i < up.size(); ++i) CHECK(up[i].close > up[i - 1].close);

    spec.drift = -0.5;
    PriceSeries dn = generate(spec);
    for (std::size_t i = 1; i < dn.size(); ++i) CHECK(dn[i].close < dn[i - 1].close);
}

TEST_CASE("ou reverts to the long-run level") {
    // Discrete OU: X_{t+1}-m = (1-k)(X_t-m) + vol*eps. With rho = 1-k the
    // stationary variance is vol^2/(1-rho^2) and the sample mean over n steps
    // has variance approx var*(1+rho)/((1-rho)*n). Started at the mean, so no
    // burn-in is needed.
    SyntheticSpec spec;
    spec.regime = Regime::ou;
    spec.kappa = 0.05;
    spec.volatility = 0.5;
    spec.long_run_level = 50.0;
    spec.start_price = 50.0;
    spec.length = 10000;
    spec.seed = 11;

    PriceSeries s = generate(spec);
    double mean = 0.0;
    for (const Candle& c : s.candles) mean += c.close;
    mean /= static_cast<double>(s.size());

    double rho = 1.0 - spec.kappa;
    double var_stat = spec.volatility * spec.volatility / (1.0 - rho * rho);
    double se = std::sqrt(var_stat * (1.0 + rho) / ((1.0 - rho) * static_cast<double>(s.size())));
    CHECK(std::fabs(mean - spec.long_run_level) < 3.0 * se);
}

TEST_CASE("generated series pass validation for random specs") {
    Rng rng(123);
    for (int trial = 0; trial < 60; ++trial) {
        SyntheticSpec spec;
        int r = static_cast<int>(rng.uniform_index(3));
        spec.regime = r == 0 ? Regime::gbm : r == 1 ? Regime::ou : Regime::regime_switch;
        spec.drift = rng.uniform(-0.5, 0.5);
        spec.volatility = rng.uniform(0.01, 0.8);
        spec.kappa = rng.uniform(0.01, 0.3);
        spec.long_run_level = rng.uniform(10.0, 100.0);
        spec.switch_prob = rng.uniform(0.0, 0.2);
        spec.seed = rng.next_u64();
        spec.length = 2 + static_cast<int>(rng.uniform_index(400));
        spec.start_price = rng.uniform(5.0, 100.0);
        spec.intraday_noise = rng.uniform(0.0, 0.05);

        PriceSeries s = generate(spec);
        REQUIRE(s.size() == static_cast<std::size_t>(spec.length));
        ValidationReport rep = validate(s);
        CHECK_MESSAGE(rep.ok(), rep.to_string());
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(s[i].date.is_weekday());
            if (i > 0) CHECK(s[i - 1].date < s[i].date);
        }
    }
}

TEST_CASE("validate reports every violation with date and rule") {
    PriceSeries s;
    s.candles.push_back({Date::parse("2020-01-02"), 50, 51, 49, 50.5, 100});
    s.candles.push_back({Date::parse("2020-01-03"), 50, 49, 48, 50.5, 100});   // high < open
    s.candles.push_back({Date::parse("2020-01-03"), 50, 51, 49, 50.5, -5});    // dup + volume
    ValidationReport rep = validate(s);
    CHECK(rep.issues.size() == 3);
    CHECK(rep.to_string().find("2020-01-03") != std::string::npos);
    CHECK(rep.to_string().find("duplicate date") != std::string::npos);
}

TEST_CASE("fundamentals wide csv with forward fill") {
    fs::path dir = temp_dir("fund");
    write_file(dir / "f.csv",
               "date,demand,storage\n"
               "2020-01-02,10,5\n"
               "2020-01-03,11,\n"
               "2020-01-06,,6\n"
               "2020-01-07,12,7\n"
               "2020-01-08,13,8\n");
    auto series = load_fundamentals_csv((dir / "f.csv").string());
    REQUIRE(series.size() == 2);
    CHECK(series[0].name == "demand");
    CHECK(series[1].name == "storage");
    REQUIRE(series[0].values.size() == 5);
    REQUIRE(series[1].values.size() == 5);
    CHECK(series[1].values[1] == 5.0);   // gap carried forward
    CHECK(series[0].values[2] == 11.0);  // gap carried forward
    fs::remove_all(dir);
}

TEST_CASE("fundamentals leading gap starts series later") {
    fs::path dir = temp_dir("fund_lead");
    write_file(dir / "f.csv",
               "date,a,b\n"
               "2020-01-02,,5\n"
               "2020-01-03,1,6\n"
               "2020-01-06,2,7\n");
    auto series = load_fundamentals_csv((dir / "f.csv").string());
    REQUIRE(series.size() == 2);
    CHECK(series[0].dates.size() == 2);
    CHECK(series[0].dates[0] == Date::parse("2020-01-03"));
    CHECK(series[1].dates.size() == 3);

    bool defined = true;
    series[0].value_asof(Date::parse("2020-01-02"), defined);
    CHECK_FALSE(defined);
    double v = series[0].value_asof(Date::parse("2020-01-05"), defined);
    CHECK(defined);
    CHECK(v == 1.0);
    fs::remove_all(dir);
}

TEST_CASE("fundamentals non-numeric cell names row and column") {
    fs::path dir = temp_dir("fund_bad");
    write_file(dir / "f.csv",
               "date,a\n"
               "2020-01-02,zzz\n");
    CHECK_THROWS_WITH_AS(load_fundamentals_csv((dir / "f.csv").string()),
                         doctest::Contains("column 'a'"), validation_error);
    fs::remove_all(dir);
}

TEST_CASE("synthetic fundamentals align to price dates") {
    SyntheticSpec spec;
    spec.length = 120;
    PriceSeries prices = generate(spec);
    auto funds = generate_fundamentals(prices, {5, 21}, 99);
    REQUIRE(funds.size() == 2);
    for (const auto& f : funds) {
        CHECK(f.dates.size() == prices.size());
        CHECK(f.dates.front() == prices.first_date());
        CHECK(f.dates.back() == prices.last_date());
    }
    auto again = generate_fundamentals(prices, {5, 21}, 99);
    CHECK(again[0].values == funds[0].values);
}

TEST_CASE("price series index lookups") {
    SyntheticSpec spec;
    spec.length = 10;
    PriceSeries s = generate(spec);
    CHECK(s.index_of(s[4].date) == 4);
    CHECK(s.lower_bound(s[4].date) == 4);
    CHECK(s.lower_bound(s[0].date.plus_days(-5)) == 0);
    CHECK_THROWS_AS(s.index_of(s.last_date().plus_days(10)), validation_error);
}
