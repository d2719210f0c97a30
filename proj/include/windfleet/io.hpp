#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "windfleet/common.hpp"
#include "windfleet/data.hpp"

namespace windfleet {

using json = nlohmann::json;

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

inline std::ifstream open_input(const std::string& path) {
    if (!std::filesystem::exists(path)) throw MissingFile("no such file: " + path);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path);
    return out;
}

// ---------------------------------------------------------------------------
// meta.csv / series.csv
// ---------------------------------------------------------------------------

inline void expect_header(const std::vector<std::string>& got, const std::string& want,
                          const std::string& path) {
    auto expected = split_csv_line(want);
    if (got != expected) throw SchemaViolation(path + ": bad header, expected '" + want + "'");
}

inline Fleet load_fleet(const std::string& meta_path, const std::string& series_path) {
    Fleet fleet;
    std::map<std::string, std::size_t> index;
    {
        auto in = open_input(meta_path);
        std::string line;
        if (!std::getline(in, line)) throw SchemaViolation(meta_path + ": empty file");
        expect_header(split_csv_line(line), "id,capacity_kw,age,utm_x,utm_y", meta_path);
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (line.empty()) continue;
            auto f = split_csv_line(line);
            if (f.size() != 5)
                throw SchemaViolation(meta_path + " row " + std::to_string(row) +
                                      ": expected 5 columns");
            auto field = [&](std::size_t i, const char* col) {
                try {
                    return parse_double(f[i]);
                } catch (const SchemaViolation&) {
                    throw SchemaViolation(meta_path + " row " + std::to_string(row) + " column " +
                                          col + ": unparseable value '" + f[i] + "'");
                }
            };
            TurbineSeries s;
            s.meta.id = f[0];
            s.meta.capacity_kw = field(1, "capacity_kw");
            s.meta.age = field(2, "age");
            s.meta.utm_x = field(3, "utm_x");
            s.meta.utm_y = field(4, "utm_y");
            if (index.count(s.meta.id))
                throw SchemaViolation(meta_path + " row " + std::to_string(row) +
                                      ": duplicate id '" + s.meta.id + "'");
            index[s.meta.id] = fleet.turbines.size();
            fleet.turbines.push_back(std::move(s));
        }
    }
    if (fleet.turbines.empty()) throw SchemaViolation(meta_path + ": no turbines");
    {
        auto in = open_input(series_path);
        std::string line;
        if (!std::getline(in, line)) throw SchemaViolation(series_path + ": empty file");
        expect_header(split_csv_line(line), "id,timestamp,power_kw,wind_speed,wind_dir_deg,temp_c",
                      series_path);
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (line.empty()) continue;
            auto f = split_csv_line(line);
            if (f.size() != 6)
                throw SchemaViolation(series_path + " row " + std::to_string(row) +
                                      ": expected 6 columns");
            auto it = index.find(f[0]);
            if (it == index.end())
                throw SchemaViolation(series_path + " row " + std::to_string(row) +
                                      ": unknown turbine id '" + f[0] + "'");
            auto field = [&](std::size_t i, const char* col) {
                try {
                    return parse_double(f[i]);
                } catch (const SchemaViolation&) {
                    throw SchemaViolation(series_path + " row " + std::to_string(row) +
                                          " column " + col + ": unparseable value '" + f[i] + "'");
                }
            };
            TurbineSeries& s = fleet.turbines[it->second];
            std::int64_t ts;
            try {
                ts = parse_iso8601(f[1]);
            } catch (const SchemaViolation&) {
                throw SchemaViolation(series_path + " row " + std::to_string(row) +
                                      " column timestamp: unparseable value '" + f[1] + "'");
            }
            s.timestamps.push_back(ts);
            s.power.push_back(field(2, "power_kw"));
            s.wind_speed.push_back(field(3, "wind_speed"));
            s.wind_dir.push_back(field(4, "wind_dir_deg"));
            s.temperature.push_back(field(5, "temp_c"));
        }
    }
    for (const auto& s : fleet.turbines)
        if (s.timestamps.empty())
            throw SchemaViolation(series_path + ": no rows for turbine '" + s.meta.id + "'");

    // Align all series to the common time range.
    std::int64_t lo = fleet.turbines[0].timestamps.front();
    std::int64_t hi = fleet.turbines[0].timestamps.back();
    for (const auto& s : fleet.turbines) {
        lo = std::max(lo, s.timestamps.front());
        hi = std::min(hi, s.timestamps.back());
    }
    if (lo > hi) throw SchemaViolation(series_path + ": turbine time ranges do not overlap");
    for (auto& s : fleet.turbines) {
        std::size_t from = 0;
        while (from < s.size() && s.timestamps[from] < lo) ++from;
        std::size_t to = s.size();
        while (to > 0 && s.timestamps[to - 1] > hi) --to;
        auto trim = [&](auto& v) { v = {v.begin() + from, v.begin() + to}; };
        trim(s.timestamps);
        trim(s.power);
        trim(s.wind_speed);
        trim(s.wind_dir);
        trim(s.temperature);
        validate_series(s);
    }
    return fleet;
}

inline void save_fleet(const Fleet& fleet, const std::string& meta_path,
                       const std::string& series_path) {
    {
        auto out = open_output(meta_path);
        out << "id,capacity_kw,age,utm_x,utm_y\n";
        for (const auto& s : fleet.turbines)
            out << s.meta.id << ',' << format_double(s.meta.capacity_kw) << ','
                << format_double(s.meta.age) << ',' << format_double(s.meta.utm_x) << ','
                << format_double(s.meta.utm_y) << '\n';
    }
    {
        auto out = open_output(series_path);
        out << "id,timestamp,power_kw,wind_speed,wind_dir_deg,temp_c\n";
        for (const auto& s : fleet.turbines)
            for (std::size_t t = 0; t < s.size(); ++t)
                out << s.meta.id << ',' << format_iso8601(s.timestamps[t]) << ','
                    << format_double(s.power[t]) << ',' << format_double(s.wind_speed[t]) << ','
                    << format_double(s.wind_dir[t]) << ',' << format_double(s.temperature[t])
                    << '\n';
    }
}

// ---------------------------------------------------------------------------
// fleet.json: synthetic fleet specification
// ---------------------------------------------------------------------------

inline ArchetypeParams archetype_params_from_json(const std::string& name, const json& j) {
    ArchetypeParams p = archetype_preset(name);
    auto opt = [&](const char* key, double& field) {
        if (j.contains(key)) field = j.at(key).get<double>();
    };
    opt("mean_wind", p.mean_wind);
    opt("wind_ar", p.wind_ar);
    opt("wind_sigma", p.wind_sigma);
    opt("diurnal_amp", p.diurnal_amp);
    opt("shutdown_prob", p.shutdown_prob);
    opt("ramp_noise", p.ramp_noise);
    opt("curve_mid", p.curve_mid);
    opt("curve_steep", p.curve_steep);
    opt("cap_min", p.cap_min);
    opt("cap_max", p.cap_max);
    opt("age_min", p.age_min);
    opt("age_max", p.age_max);
    opt("regime_jitter", p.regime_jitter);
    opt("shutdown_jitter", p.shutdown_jitter);
    opt("trend", p.trend);
    return p;
}

struct SyntheticSpec {
    std::vector<ArchetypeSpec> archetypes;
    std::size_t n_steps = 8760;
    std::uint64_t seed = 42;
};

inline SyntheticSpec synthetic_spec_from_json(const json& j) {
    SyntheticSpec spec;
    if (!j.contains("archetypes") || !j.at("archetypes").is_array() || j.at("archetypes").empty())
        throw ConfigError("fleet spec: 'archetypes' must be a non-empty list");
    for (const auto& a : j.at("archetypes")) {
        ArchetypeSpec as;
        as.archetype = a.at("archetype").get<std::string>();
        as.count = a.at("count").get<std::size_t>();
        as.params = archetype_params_from_json(as.archetype,
                                               a.contains("params") ? a.at("params") : json::object());
        spec.archetypes.push_back(std::move(as));
    }
    if (j.contains("n_steps")) spec.n_steps = j.at("n_steps").get<std::size_t>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    return spec;
}

inline SyntheticSpec load_synthetic_spec(const std::string& path) {
    auto in = open_input(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return synthetic_spec_from_json(j);
}

}  // namespace windfleet
