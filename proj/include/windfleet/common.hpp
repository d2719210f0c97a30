#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace windfleet {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define WINDFLEET_ERROR(Name)                  \
    struct Name : Error {                      \
        using Error::Error;                    \
    }

WINDFLEET_ERROR(MissingFile);
WINDFLEET_ERROR(SchemaViolation);
WINDFLEET_ERROR(NonUniformTimestamps);
WINDFLEET_ERROR(InvalidParams);
WINDFLEET_ERROR(TooFewTurbines);
WINDFLEET_ERROR(EmptyPartition);
WINDFLEET_ERROR(SeriesTooShort);
WINDFLEET_ERROR(TooManyClients);
WINDFLEET_ERROR(DimensionMismatch);
WINDFLEET_ERROR(SingleCluster);
WINDFLEET_ERROR(InsufficientHistory);
WINDFLEET_ERROR(EmptyCluster);
WINDFLEET_ERROR(LengthMismatch);
WINDFLEET_ERROR(EmptyInput);
WINDFLEET_ERROR(DimsTooLarge);
WINDFLEET_ERROR(ConfigError);
WINDFLEET_ERROR(MissingArtifact);
WINDFLEET_ERROR(IoError);

#undef WINDFLEET_ERROR

// ---------------------------------------------------------------------------
// Seeded RNG streams
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream id from a base seed and up to three tags. Used so that
// per-turbine / per-node / per-client streams are stable regardless of
// evaluation order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = splitmix64(base ^ 0x8f1bbcdcbfa53e0bULL);
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    s = splitmix64(s ^ c);
    return s;
}

inline Rng make_rng(std::uint64_t base, std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    return Rng(derive_seed(base, a, b, c));
}

// ---------------------------------------------------------------------------
// Population statistics (divide-by-n convention, used everywhere)
// ---------------------------------------------------------------------------

inline double mean_of(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double population_variance(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size());
}

inline double population_std(std::span<const double> xs) {
    return std::sqrt(population_variance(xs));
}

// ---------------------------------------------------------------------------
// FNV-1a digest (audit log payloads, manifest hashes)
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::span<const double> xs) {
    return fnv1a64(xs.data(), xs.size() * sizeof(double));
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    static const char* digits = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = digits[v & 0xf];
        v >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// Deterministic number formatting (shortest round-trip form)
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw IoError("failed to format double");
    return std::string(buf, end);
}

inline double parse_double(std::string_view sv) {
    double v = 0.0;
    const char* first = sv.data();
    const char* last = sv.data() + sv.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last) throw SchemaViolation("bad number: '" + std::string(sv) + "'");
    return v;
}

inline long long parse_int(std::string_view sv) {
    long long v = 0;
    const char* first = sv.data();
    const char* last = sv.data() + sv.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last) throw SchemaViolation("bad integer: '" + std::string(sv) + "'");
    return v;
}

// ---------------------------------------------------------------------------
// ISO-8601 hourly timestamps (UTC, no fractional seconds)
// ---------------------------------------------------------------------------

inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (static_cast<unsigned>(m) + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

// "YYYY-MM-DDTHH:MM:SS" with optional trailing 'Z' -> unix seconds.
inline std::int64_t parse_iso8601(std::string_view sv) {
    if (!sv.empty() && sv.back() == 'Z') sv.remove_suffix(1);
    if (sv.size() != 19 || sv[4] != '-' || sv[7] != '-' || sv[10] != 'T' ||
        sv[13] != ':' || sv[16] != ':')
        throw SchemaViolation("bad timestamp: '" + std::string(sv) + "'");
    auto num = [&](int off, int len) { return static_cast<int>(parse_int(sv.substr(off, len))); };
    const int y = num(0, 4), mo = num(5, 2), d = num(8, 2);
    const int h = num(11, 2), mi = num(14, 2), s = num(17, 2);
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 59)
        throw SchemaViolation("bad timestamp: '" + std::string(sv) + "'");
    return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

inline std::string format_iso8601(std::int64_t t) {
    std::int64_t days = t / 86400;
    std::int64_t sod = t % 86400;
    if (sod < 0) {
        sod += 86400;
        days -= 1;
    }
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[21];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", y, m, d,
                  static_cast<int>(sod / 3600), static_cast<int>((sod % 3600) / 60),
                  static_cast<int>(sod % 60));
    return std::string(buf);
}

inline int hour_of_day(std::int64_t unix_seconds) {
    std::int64_t sod = unix_seconds % 86400;
    if (sod < 0) sod += 86400;
    return static_cast<int>(sod / 3600);
}

}  // namespace windfleet
