#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "windfleet/common.hpp"

namespace windfleet {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct TurbineMeta {
    std::string id;
    double capacity_kw = 0.0;
    double age = 0.0;  // years
    double utm_x = 0.0;
    double utm_y = 0.0;
    std::optional<int> archetype;  // ground-truth label, synthetic fleets only
};

struct TurbineSeries {
    TurbineMeta meta;
    std::vector<std::int64_t> timestamps;  // unix seconds, uniform 1 h step
    std::vector<double> power;             // kW
    std::vector<double> wind_speed;        // m/s
    std::vector<double> wind_dir;          // degrees in [0, 360)
    std::vector<double> temperature;       // degrees C

    std::size_t size() const { return timestamps.size(); }
};

struct Fleet {
    std::vector<TurbineSeries> turbines;

    std::size_t size() const { return turbines.size(); }
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::size_t boundary = 0;  // first test index
};

inline void validate_series(const TurbineSeries& s) {
    const std::size_t n = s.timestamps.size();
    if (s.power.size() != n || s.wind_speed.size() != n || s.wind_dir.size() != n ||
        s.temperature.size() != n)
        throw SchemaViolation("turbine " + s.meta.id + ": channel lengths differ");
    if (s.meta.capacity_kw <= 0.0)
        throw SchemaViolation("turbine " + s.meta.id + ": capacity_kw must be > 0");
    if (s.meta.age < 0.0) throw SchemaViolation("turbine " + s.meta.id + ": age must be >= 0");
    for (std::size_t i = 1; i < n; ++i)
        if (s.timestamps[i] - s.timestamps[i - 1] != 3600)
            throw NonUniformTimestamps("turbine " + s.meta.id + ": gap before step " +
                                       std::to_string(i));
    for (std::size_t i = 0; i < n; ++i) {
        if (!(s.power[i] >= 0.0) || s.power[i] > 1.2 * s.meta.capacity_kw)
            throw SchemaViolation("turbine " + s.meta.id + ": power out of range at step " +
                                  std::to_string(i));
        if (!(s.wind_speed[i] >= 0.0))
            throw SchemaViolation("turbine " + s.meta.id + ": negative wind speed at step " +
                                  std::to_string(i));
        if (!(s.wind_dir[i] >= 0.0) || s.wind_dir[i] >= 360.0)
            throw SchemaViolation("turbine " + s.meta.id + ": wind_dir outside [0,360) at step " +
                                  std::to_string(i));
    }
}

// ---------------------------------------------------------------------------
// Synthetic fleet generation
//
// Per turbine: AR(1) wind-speed process with diurnal modulation -> logistic
// power curve scaled by capacity -> Bernoulli shutdown gating (exact zeros)
// -> additive ramp noise on running steps. Deterministic given (spec, seed).
// ---------------------------------------------------------------------------

struct ArchetypeParams {
    double mean_wind = 8.0;      // m/s, AR(1) long-run mean
    double wind_ar = 0.9;        // AR(1) coefficient
    double wind_sigma = 1.2;     // innovation std, m/s
    double diurnal_amp = 0.15;   // fractional diurnal modulation of mean wind
    double shutdown_prob = 0.02; // per-step probability of exact-zero output
    double ramp_noise = 0.02;    // additive noise std as fraction of capacity
    double trend = 0.0;          // multiplicative output drift per 8760 steps
                                 // (positive: ramping up; negative: degradation)
    double curve_mid = 9.0;      // logistic power-curve midpoint, m/s
    double curve_steep = 0.7;    // logistic steepness, 1/(m/s)
    double cap_min = 10.0, cap_max = 25.0;  // kW
    double age_min = 5.0, age_max = 25.0;   // years
    // per-turbine heterogeneity inside one archetype: fractional jitter on the
    // wind regime (mean_wind, wind_sigma, ramp_noise) and absolute jitter on
    // the shutdown probability
    double regime_jitter = 0.10;
    double shutdown_jitter = 0.01;

    void validate() const {
        if (wind_sigma < 0.0 || ramp_noise < 0.0) throw InvalidParams("negative variance");
        if (shutdown_prob < 0.0 || shutdown_prob > 1.0)
            throw InvalidParams("shutdown_prob outside [0,1]");
        if (!(cap_min > 0.0) || cap_max < cap_min) throw InvalidParams("bad capacity range");
        if (age_min < 0.0 || age_max < age_min) throw InvalidParams("bad age range");
        if (std::abs(wind_ar) >= 1.0) throw InvalidParams("wind_ar must satisfy |phi| < 1");
        if (regime_jitter < 0.0 || regime_jitter >= 1.0)
            throw InvalidParams("regime_jitter outside [0,1)");
        if (shutdown_jitter < 0.0) throw InvalidParams("negative shutdown_jitter");
    }
};

// Presets named after the behaviour regimes the clusters are expected to
// recover: stable baseline, high output with strong fluctuations, permanently
// faulty, ramp-dominated, low output with frequent shutdowns, volatile.
inline ArchetypeParams archetype_preset(const std::string& name) {
    ArchetypeParams p;
    if (name == "baseline_stable") {
        p.mean_wind = 7.5; p.wind_ar = 0.92; p.wind_sigma = 0.8; p.diurnal_amp = 0.10;
        p.shutdown_prob = 0.03; p.ramp_noise = 0.01; p.cap_min = 12; p.cap_max = 20;
        p.regime_jitter = 0.12; p.shutdown_jitter = 0.02; p.trend = 0.0;
    } else if (name == "high_variability") {
        p.mean_wind = 11.0; p.wind_ar = 0.75; p.wind_sigma = 2.5; p.diurnal_amp = 0.20;
        p.shutdown_prob = 0.01; p.ramp_noise = 0.06; p.cap_min = 18; p.cap_max = 30;
        p.regime_jitter = 0.15; p.shutdown_jitter = 0.01; p.trend = 0.10;
    } else if (name == "faulty") {
        p.shutdown_prob = 0.999; p.ramp_noise = 0.01;
        p.regime_jitter = 0.10; p.shutdown_jitter = 0.0005; p.trend = 0.0;
    } else if (name == "ramp_dominated") {
        p.mean_wind = 9.0; p.wind_ar = 0.60; p.wind_sigma = 2.0; p.diurnal_amp = 0.25;
        p.shutdown_prob = 0.05; p.ramp_noise = 0.12; p.cap_min = 10; p.cap_max = 22;
        p.regime_jitter = 0.15; p.shutdown_jitter = 0.03; p.trend = 0.30;
    } else if (name == "low_output") {
        p.mean_wind = 5.5; p.wind_ar = 0.90; p.wind_sigma = 1.0; p.diurnal_amp = 0.10;
        p.shutdown_prob = 0.30; p.ramp_noise = 0.015; p.cap_min = 8; p.cap_max = 15;
        p.regime_jitter = 0.12; p.shutdown_jitter = 0.08; p.trend = -0.15;
    } else if (name == "volatile") {
        p.mean_wind = 10.0; p.wind_ar = 0.80; p.wind_sigma = 2.0; p.diurnal_amp = 0.15;
        p.shutdown_prob = 0.08; p.ramp_noise = 0.04; p.cap_min = 14; p.cap_max = 26;
        p.regime_jitter = 0.15; p.shutdown_jitter = 0.03; p.trend = 0.20;
    } else {
        throw InvalidParams("unknown archetype preset: '" + name + "'");
    }
    return p;
}

struct ArchetypeSpec {
    std::string archetype;  // preset name; label index = position in the archetype list
    std::size_t count = 0;
    ArchetypeParams params;
};

inline constexpr std::int64_t kSyntheticEpoch = 1546300800;  // 2019-01-01T00:00:00Z

inline TurbineSeries generate_turbine(const ArchetypeParams& p, int archetype_label,
                                      const std::string& id, std::size_t n_steps, Rng& rng) {
    using std::numbers::pi;
    TurbineSeries s;
    s.meta.id = id;
    s.meta.archetype = archetype_label;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    s.meta.capacity_kw = p.cap_min + (p.cap_max - p.cap_min) * unit(rng);
    s.meta.age = p.age_min + (p.age_max - p.age_min) * unit(rng);
    s.meta.utm_x = 1e6 * unit(rng);
    s.meta.utm_y = 1e6 * unit(rng);

    // this unit's own operating regime within the archetype
    auto jitter = [&](double v) { return v * (1.0 + p.regime_jitter * (2.0 * unit(rng) - 1.0)); };
    const double mean_wind = jitter(p.mean_wind);
    const double wind_sigma = jitter(p.wind_sigma);
    const double ramp_noise = jitter(p.ramp_noise);
    const double shutdown_prob =
        std::clamp(p.shutdown_prob + p.shutdown_jitter * (2.0 * unit(rng) - 1.0), 0.0, 1.0);

    double dir = 360.0 * unit(rng);
    double wind = mean_wind;

    s.timestamps.resize(n_steps);
    s.power.resize(n_steps);
    s.wind_speed.resize(n_steps);
    s.wind_dir.resize(n_steps);
    s.temperature.resize(n_steps);

    const double cap = s.meta.capacity_kw;
    double prev_mean = mean_wind;
    for (std::size_t t = 0; t < n_steps; ++t) {
        const std::int64_t ts = kSyntheticEpoch + static_cast<std::int64_t>(t) * 3600;
        const int hour = hour_of_day(ts);
        const double doy = std::fmod(static_cast<double>(t) / 24.0, 365.0);

        // fixed draw order per step so streams stay aligned across branches
        const double e_wind = gauss(rng);
        const double u_gate = unit(rng);
        const double e_noise = gauss(rng);
        const double e_temp = gauss(rng);
        const double e_dir = gauss(rng);

        const double m_t = mean_wind * (1.0 + p.diurnal_amp * std::sin(2.0 * pi * (hour - 9) / 24.0));
        wind = std::max(0.0, m_t + p.wind_ar * (wind - prev_mean) + wind_sigma * e_wind);
        prev_mean = m_t;

        double power = cap / (1.0 + std::exp(-p.curve_steep * (wind - p.curve_mid)));
        power *= 1.0 + p.trend * static_cast<double>(t) / 8760.0;
        power = std::clamp(power + cap * ramp_noise * e_noise, 0.0, 1.1 * cap);
        if (u_gate < shutdown_prob) power = 0.0;

        dir = std::fmod(dir + 15.0 * e_dir + 360.0, 360.0);
        if (dir < 0.0 || dir >= 360.0) dir = 0.0;  // fmod edge at exactly 360

        s.timestamps[t] = ts;
        s.power[t] = power;
        s.wind_speed[t] = wind;
        s.wind_dir[t] = dir;
        s.temperature[t] = 8.0 + 8.0 * std::sin(2.0 * pi * (doy - 100.0) / 365.0) +
                           4.0 * std::sin(2.0 * pi * (hour - 14) / 24.0) + 1.5 * e_temp;
    }
    return s;
}

inline Fleet generate_synthetic_fleet(const std::vector<ArchetypeSpec>& spec,
                                      std::size_t n_steps, std::uint64_t seed) {
    if (spec.empty()) throw InvalidParams("empty archetype spec");
    if (n_steps < 2) throw InvalidParams("n_steps must be >= 2");
    for (const auto& a : spec) {
        if (a.count < 1) throw InvalidParams("archetype count must be >= 1");
        a.params.validate();
    }
    Fleet fleet;
    std::size_t turbine_index = 0;
    for (std::size_t a = 0; a < spec.size(); ++a) {
        for (std::size_t i = 0; i < spec[a].count; ++i, ++turbine_index) {
            Rng rng = make_rng(seed, 0x7eb1, turbine_index);
            char id[16];
            std::snprintf(id, sizeof(id), "T%04zu", turbine_index);
            fleet.turbines.push_back(generate_turbine(spec[a].params, static_cast<int>(a), id,
                                                      n_steps, rng));
        }
    }
    return fleet;
}

// ---------------------------------------------------------------------------
// Nearest-neighbour spatial subsampling (greedy set growth)
// ---------------------------------------------------------------------------

inline Fleet nearest_neighbour_subsample(const Fleet& fleet, std::size_t n) {
    const std::size_t total = fleet.size();
    if (n > total) throw TooFewTurbines("requested " + std::to_string(n) + " of " +
                                        std::to_string(total) + " turbines");
    if (n == total) return fleet;

    auto dist = [&](std::size_t i, std::size_t j) {
        const auto& a = fleet.turbines[i].meta;
        const auto& b = fleet.turbines[j].meta;
        return std::hypot(a.utm_x - b.utm_x, a.utm_y - b.utm_y);
    };

    // Seed: turbine with minimal mean distance to its 5 nearest neighbours.
    const std::size_t k5 = std::min<std::size_t>(5, total - 1);
    std::size_t seed_idx = 0;
    double best_mean = std::numeric_limits<double>::infinity();
    std::vector<double> d(total);
    for (std::size_t i = 0; i < total; ++i) {
        d.clear();
        for (std::size_t j = 0; j < total; ++j)
            if (j != i) d.push_back(dist(i, j));
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k5 - 1), d.end());
        double m = 0.0;
        for (std::size_t j = 0; j < k5; ++j) m += d[j];
        m /= static_cast<double>(k5);
        if (m < best_mean) {
            best_mean = m;
            seed_idx = i;
        }
    }

    std::vector<bool> chosen(total, false);
    std::vector<double> dist_to_set(total, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> order;
    order.push_back(seed_idx);
    chosen[seed_idx] = true;
    for (std::size_t j = 0; j < total; ++j)
        if (!chosen[j]) dist_to_set[j] = dist(seed_idx, j);

    while (order.size() < n) {
        std::size_t best = total;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < total; ++j)
            if (!chosen[j] && dist_to_set[j] < bd) {
                bd = dist_to_set[j];
                best = j;
            }
        order.push_back(best);
        chosen[best] = true;
        for (std::size_t j = 0; j < total; ++j)
            if (!chosen[j]) dist_to_set[j] = std::min(dist_to_set[j], dist(best, j));
    }

    std::sort(order.begin(), order.end());  // keep original fleet order
    Fleet out;
    for (std::size_t idx : order) out.turbines.push_back(fleet.turbines[idx]);
    return out;
}

// ---------------------------------------------------------------------------
// Chronological train/test split
// ---------------------------------------------------------------------------

inline std::pair<TurbineSeries, TurbineSeries> chronological_split(const TurbineSeries& s,
                                                                   double train_fraction,
                                                                   std::size_t min_part = 1) {
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
        throw InvalidParams("train_fraction must be in (0,1)");
    const std::size_t n = s.size();
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    const std::size_t n_test = n - n_train;
    if (n_train < min_part || n_test < min_part)
        throw EmptyPartition("split " + std::to_string(n_train) + "/" + std::to_string(n_test) +
                             " below minimum part size " + std::to_string(min_part));

    auto slice = [&](std::size_t from, std::size_t count) {
        TurbineSeries out;
        out.meta = s.meta;
        auto cp = [&](const std::vector<double>& src, std::vector<double>& dst) {
            dst.assign(src.begin() + static_cast<std::ptrdiff_t>(from),
                       src.begin() + static_cast<std::ptrdiff_t>(from + count));
        };
        out.timestamps.assign(s.timestamps.begin() + static_cast<std::ptrdiff_t>(from),
                              s.timestamps.begin() + static_cast<std::ptrdiff_t>(from + count));
        cp(s.power, out.power);
        cp(s.wind_speed, out.wind_speed);
        cp(s.wind_dir, out.wind_dir);
        cp(s.temperature, out.temperature);
        return out;
    };
    return {slice(0, n_train), slice(n_train, n_test)};
}

}  // namespace windfleet
