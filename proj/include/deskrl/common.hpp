#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deskrl {

// Bad inputs (config values, malformed files, contract violations by the
// caller). Maps to process exit code 1.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Failures during execution (I/O, numerical breakdown). Exit code 2.
struct runtime_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// calendar dates
// ---------------------------------------------------------------------------

// Calendar date stored as days since 1970-01-01. Cheap to copy and compare.
struct Date {
    std::int32_t serial = 0;

    static Date parse(std::string_view iso);   // "YYYY-MM-DD", strict
    static Date from_ymd(int year, unsigned month, unsigned day);

    std::string to_string() const;             // ISO "YYYY-MM-DD"
    int year() const;
    bool is_weekday() const;                   // Mon..Fri
    Date next_weekday() const;                 // strictly after *this

    Date plus_days(int n) const { return Date{serial + n}; }

    friend bool operator==(Date a, Date b) { return a.serial == b.serial; }
    friend bool operator!=(Date a, Date b) { return a.serial != b.serial; }
    friend bool operator<(Date a, Date b) { return a.serial < b.serial; }
    friend bool operator<=(Date a, Date b) { return a.serial <= b.serial; }
    friend bool operator>(Date a, Date b) { return a.serial > b.serial; }
    friend bool operator>=(Date a, Date b) { return a.serial >= b.serial; }
};

// Inclusive date interval.
struct DateRange {
    Date begin;
    Date end;

    bool contains(Date d) const { return begin <= d && d <= end; }
    void check() const;  // throws validation_error when end precedes begin
};

// ---------------------------------------------------------------------------
// deterministic random numbers
// ---------------------------------------------------------------------------

// splitmix64 step, used for seed derivation.
std::uint64_t mix64(std::uint64_t x);

// Derive an independent stream seed from a base seed and a stream index.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix64(base ^ mix64(stream + 0x9e3779b97f4a7c15ULL));
}

// mt19937_64 with explicit output transforms so every drawn value is pinned
// by the seed alone; avoids distribution objects with unspecified state.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    void reseed(std::uint64_t seed);

    std::uint64_t next_u64() { return gen_(); }
    double uniform();                          // [0, 1)
    double uniform(double lo, double hi);
    double normal();                           // standard normal, Box-Muller
    std::size_t uniform_index(std::size_t n);  // [0, n), n > 0

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// formatting and small string utilities
// ---------------------------------------------------------------------------

// Shortest decimal form that round-trips the double. Locale independent.
std::string num_str(double v);

// Integers always print in plain decimal, never scientific notation.
inline std::string num_str(int v) { return std::to_string(v); }
inline std::string num_str(long v) { return std::to_string(v); }
inline std::string num_str(long long v) { return std::to_string(v); }
inline std::string num_str(unsigned v) { return std::to_string(v); }
inline std::string num_str(unsigned long v) { return std::to_string(v); }
inline std::string num_str(unsigned long long v) { return std::to_string(v); }

// Fixed-precision decimal form, for human-facing report text.
std::string num_fixed(double v, int decimals);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

bool parse_double(std::string_view s, double& out);
bool parse_long(std::string_view s, long long& out);

// FNV-1a over bytes; stable across runs, used for config fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(std::uint64_t v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace deskrl
