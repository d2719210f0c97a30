#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "windfleet/autosplit.hpp"
#include "windfleet/eval.hpp"
#include "windfleet/features.hpp"
#include "windfleet/forecast.hpp"
#include "windfleet/io.hpp"
#include "windfleet/lstm.hpp"

namespace windfleet {

// ---------------------------------------------------------------------------
// fingerprints.csv / features.json
// ---------------------------------------------------------------------------

inline void write_fingerprints_csv(const std::vector<std::string>& ids,
                                   const std::vector<BehaviourFingerprint>& fps,
                                   const std::string& path) {
    auto out = open_output(path);
    out << "id,mean_power,std_power,cv,zero_ratio,ramp_mean,ramp_std\n";
    for (std::size_t i = 0; i < fps.size(); ++i) {
        out << ids[i];
        for (double v : fps[i].as_array()) out << ',' << format_double(v);
        out << '\n';
    }
}

inline json feature_matrix_to_json(const std::vector<std::string>& ids, const FeatureMatrix& m) {
    json j;
    j["ids"] = ids;
    j["n"] = m.n();
    j["d"] = m.d();
    std::vector<double> rows(m.rows.data(), m.rows.data() + m.rows.size());
    // Eigen default storage is column-major; serialize row-major for clarity
    std::vector<double> row_major;
    row_major.reserve(rows.size());
    for (Eigen::Index i = 0; i < m.n(); ++i)
        for (Eigen::Index c = 0; c < m.d(); ++c) row_major.push_back(m.rows(i, c));
    j["rows"] = row_major;
    j["scaler"] = {{"mean", m.scaler.mean},
                   {"std", m.scaler.std},
                   {"degenerate", m.scaler.degenerate},
                   {"passthrough", m.scaler.passthrough}};
    return j;
}

inline std::pair<std::vector<std::string>, FeatureMatrix> feature_matrix_from_json(const json& j) {
    std::vector<std::string> ids = j.at("ids").get<std::vector<std::string>>();
    FeatureMatrix m;
    const auto n = j.at("n").get<Eigen::Index>();
    const auto d = j.at("d").get<Eigen::Index>();
    const auto rows = j.at("rows").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(rows.size()) != n * d)
        throw SchemaViolation("feature matrix size mismatch");
    m.rows.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < d; ++c) m.rows(i, c) = rows[static_cast<std::size_t>(i * d + c)];
    m.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
    m.scaler.std = j.at("scaler").at("std").get<std::vector<double>>();
    m.scaler.degenerate = j.at("scaler").at("degenerate").get<std::vector<bool>>();
    m.scaler.passthrough = j.at("scaler").at("passthrough").get<std::vector<bool>>();
    return {std::move(ids), std::move(m)};
}

// ---------------------------------------------------------------------------
// labels.csv / tree.json / centroids.json / audit log / profile.csv
// ---------------------------------------------------------------------------

inline void write_labels_csv(const std::vector<std::string>& ids, const std::vector<int>& cluster,
                             const std::vector<bool>& outlier, const std::string& path) {
    auto out = open_output(path);
    out << "id,cluster,outlier_flag\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
        out << ids[i] << ',' << cluster[i] << ',' << (outlier.empty() ? 0 : (outlier[i] ? 1 : 0))
            << '\n';
}

struct LabelsFile {
    std::vector<std::string> ids;
    std::vector<int> cluster;
    std::vector<bool> outlier;
};

inline LabelsFile read_labels_csv(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw SchemaViolation(path + ": empty file");
    expect_header(split_csv_line(line), "id,cluster,outlier_flag", path);
    LabelsFile f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 3) throw SchemaViolation(path + ": expected 3 columns");
        f.ids.push_back(fields[0]);
        f.cluster.push_back(static_cast<int>(parse_int(fields[1])));
        f.outlier.push_back(parse_int(fields[2]) != 0);
    }
    return f;
}

inline json tree_to_json(const ClusterTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes) {
        json jn;
        jn["node_id"] = n.node_id;
        jn["parent"] = n.parent;
        jn["size"] = n.row_indices.size();
        jn["is_leaf"] = n.is_leaf;
        jn["is_outlier_leaf"] = n.is_outlier_leaf;
        jn["forced"] = n.forced;
        if (n.best_silhouette) jn["best_silhouette"] = *n.best_silhouette;
        if (n.chosen_params)
            jn["chosen_params"] = {{"n", n.chosen_params->n},
                                   {"k", n.chosen_params->k},
                                   {"c", n.chosen_params->c}};
        nodes.push_back(jn);
    }
    return json{{"total_n", tree.total_n}, {"root_id", tree.root_id}, {"nodes", nodes}};
}

inline void write_centroids_json(const CentroidSet& cs, const FedKMeansConfig& cfg,
                                 const std::string& path) {
    json j;
    j["k"] = cs.k();
    j["d"] = cs.d();
    std::vector<double> row_major;
    for (Eigen::Index i = 0; i < cs.k(); ++i)
        for (Eigen::Index c = 0; c < cs.d(); ++c) row_major.push_back(cs.centres(i, c));
    j["centres"] = row_major;
    j["config"] = {{"n_clients", cfg.n_clients},
                   {"k_global", cfg.k_global},
                   {"c_rounds", cfg.c_rounds},
                   {"init", cfg.init == InitMethod::drs ? "drs" : "kmeanspp"}};
    j["seed"] = cfg.seed;
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

inline void write_audit_log(const AuditLog& audit, const std::string& path) {
    auto out = open_output(path);
    for (const auto& r : audit.records) {
        json j;
        j["round"] = r.round;
        j["client_id"] = r.client_id;
        j["kind"] = r.kind;
        j["payload_digest"] = hex64(fnv1a64(r.payload));
        out << j.dump() << '\n';
    }
}

inline void write_profile_csv(const ClusterProfile& profile, const std::string& path) {
    auto out = open_output(path);
    out << "cluster,count";
    for (const char* c : kFingerprintColumns)
        out << ',' << c << (std::string(c) == "zero_ratio" ? "_mean" : "_scaled_mean");
    for (const char* c : kFingerprintColumns)
        out << ',' << c << (std::string(c) == "zero_ratio" ? "_std" : "_scaled_std");
    out << '\n';
    for (const auto& row : profile.rows) {
        out << row.cluster << ',' << row.count;
        for (double v : row.mean) out << ',' << format_double(v);
        for (double v : row.stddev) out << ',' << format_double(v);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Model dump (JSON weights with dims, normalization, hyper, seed)
// ---------------------------------------------------------------------------

inline json model_to_json(const ModelParams& p, const NormalizationSpec& norm,
                          const TrainHyper& hyper) {
    json j;
    j["format_version"] = 1;
    j["dims"] = {{"input", p.input_dim},
                 {"hidden", p.hidden_dim},
                 {"mlp", p.mlp_dim},
                 {"horizon", p.horizon}};
    j["normalization"] = {{"wind_max", norm.wind_max}, {"temp_min", norm.temp_min},
                          {"temp_max", norm.temp_max}, {"cap_ref", norm.cap_ref},
                          {"age_ref", norm.age_ref}};
    j["hyper"] = {{"local_epochs", hyper.local_epochs},
                  {"batch_size", hyper.batch_size},
                  {"learning_rate", hyper.learning_rate},
                  {"rounds", hyper.rounds},
                  {"hidden_dim", hyper.hidden_dim},
                  {"mlp_dim", hyper.mlp_dim},
                  {"optimizer", hyper.optimizer == Optimizer::adam ? "adam" : "sgd"},
                  {"seed", hyper.seed}};
    json weights;
    for (const auto& t : p.tensors())
        weights[t.name] = std::vector<double>(t.data, t.data + t.size);
    j["weights"] = weights;
    return j;
}

inline std::pair<ModelParams, NormalizationSpec> model_from_json(const json& j) {
    ModelParams p;
    p.input_dim = j.at("dims").at("input").get<int>();
    p.hidden_dim = j.at("dims").at("hidden").get<int>();
    p.mlp_dim = j.at("dims").at("mlp").get<int>();
    p.horizon = j.at("dims").at("horizon").get<int>();
    Rng rng(0);
    ModelParams shaped = init_params(p.input_dim, p.hidden_dim, p.mlp_dim, p.horizon, rng);
    for (auto& t : shaped.tensors()) {
        const auto vals = j.at("weights").at(t.name).get<std::vector<double>>();
        if (static_cast<std::ptrdiff_t>(vals.size()) != t.size)
            throw SchemaViolation(std::string("model tensor size mismatch: ") + t.name);
        std::copy(vals.begin(), vals.end(), t.data);
    }
    NormalizationSpec norm;
    const auto& n = j.at("normalization");
    norm.wind_max = n.at("wind_max").get<double>();
    norm.temp_min = n.at("temp_min").get<double>();
    norm.temp_max = n.at("temp_max").get<double>();
    norm.cap_ref = n.at("cap_ref").get<double>();
    norm.age_ref = n.at("age_ref").get<double>();
    return {std::move(shaped), norm};
}

// ---------------------------------------------------------------------------
// history.csv / comparison.csv / pca.csv / forecast.csv / SVG plots
// ---------------------------------------------------------------------------

inline void write_history_csv(const std::vector<RoundMetrics>& history, const std::string& path) {
    auto out = open_output(path);
    out << "round,split,mse,rmse,mae,r2\n";
    auto emit = [&](std::size_t round, const char* split, const MetricsReport& m) {
        out << round << ',' << split << ',' << format_double(m.mse) << ','
            << format_double(m.rmse) << ',' << format_double(m.mae) << ','
            << format_double(m.r2) << '\n';
    };
    for (const auto& h : history) {
        emit(h.round, "train", h.train);
        emit(h.round, "validation", h.validation);
    }
}

struct MethodMetrics {
    std::string method;
    std::size_t n_groups = 0;
    MetricsReport train;
    MetricsReport test;
};

inline void write_comparison_csv(const std::vector<MethodMetrics>& methods,
                                 const std::string& path) {
    auto out = open_output(path);
    out << "method,n_groups,split,mse,rmse,mae,r2\n";
    auto emit = [&](const MethodMetrics& mm, const char* split, const MetricsReport& m) {
        out << mm.method << ',' << mm.n_groups << ',' << split << ',' << format_double(m.mse)
            << ',' << format_double(m.rmse) << ',' << format_double(m.mae) << ','
            << format_double(m.r2) << '\n';
    };
    for (const auto& mm : methods) {
        emit(mm, "train", mm.train);
        emit(mm, "test", mm.test);
    }
}

inline void write_pca_csv(const std::vector<std::string>& ids, const PcaResult& pca,
                          const std::vector<int>& cluster, const std::string& path) {
    auto out = open_output(path);
    out << "id,pc1,pc2,pc3,cluster\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out << ids[i];
        for (Eigen::Index j = 0; j < 3; ++j)
            out << ','
                << format_double(j < pca.projected.cols()
                                     ? pca.projected(static_cast<Eigen::Index>(i), j)
                                     : 0.0);
        out << ',' << cluster[i] << '\n';
    }
}

inline void write_forecast_csv(const std::vector<ForecastTrajectory>& trajectories,
                               const std::string& path) {
    auto out = open_output(path);
    out << "id,timestamp,measured_kw,predicted_kw,mode\n";
    for (const auto& tr : trajectories)
        for (std::size_t i = 0; i < tr.timestamps.size(); ++i)
            out << tr.turbine_id << ',' << format_iso8601(tr.timestamps[i]) << ','
                << format_double(tr.measured_kw[i]) << ',' << format_double(tr.predicted_kw[i])
                << ',' << to_string(tr.mode) << '\n';
}

// Minimal deterministic SVG line plot: solid = predicted, dashed = measured.
inline void write_forecast_svg(const ForecastTrajectory& tr, const std::string& path) {
    const int width = 800, height = 300, mx = 50, my = 30;
    double lo = 0.0, hi = 1.0;
    for (std::size_t i = 0; i < tr.predicted_kw.size(); ++i) {
        hi = std::max({hi, tr.predicted_kw[i], tr.measured_kw[i]});
        lo = std::min({lo, tr.predicted_kw[i], tr.measured_kw[i]});
    }
    const double span = (hi > lo) ? hi - lo : 1.0;
    const auto n = tr.predicted_kw.size();
    auto px = [&](std::size_t i) {
        return mx + (width - 2 * mx) * static_cast<double>(i) /
                        static_cast<double>(n > 1 ? n - 1 : 1);
    };
    auto py = [&](double v) { return height - my - (height - 2 * my) * (v - lo) / span; };
    auto polyline = [&](const std::vector<double>& ys) {
        std::string pts;
        for (std::size_t i = 0; i < ys.size(); ++i) {
            pts += format_double(px(i));
            pts += ',';
            pts += format_double(py(ys[i]));
            if (i + 1 < ys.size()) pts += ' ';
        }
        return pts;
    };

    auto out = open_output(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << mx << "\" y=\"18\" font-size=\"13\">" << tr.turbine_id << " 24 h "
        << to_string(tr.mode) << " forecast (kW)</text>\n";
    out << "<polyline fill=\"none\" stroke=\"#888\" stroke-dasharray=\"5,4\" points=\""
        << polyline(tr.measured_kw) << "\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"#1f5fbf\" points=\"" << polyline(tr.predicted_kw)
        << "\"/>\n";
    out << "<text x=\"" << mx << "\" y=\"" << height - 8
        << "\" font-size=\"11\">dashed = measured, solid = predicted</text>\n";
    out << "</svg>\n";
}

struct ReportInputs {
    std::vector<MethodMetrics> methods;
    ClusterProfile profile;
    std::vector<std::pair<int, std::vector<RoundMetrics>>> histories;  // cluster id -> curve
    std::vector<ForecastTrajectory> forecasts;
    bool plots = true;
};

inline void emit_report(const ReportInputs& in, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_comparison_csv(in.methods, out_dir + "/comparison.csv");
    if (!in.profile.rows.empty()) write_profile_csv(in.profile, out_dir + "/profile.csv");
    for (const auto& [cluster, history] : in.histories)
        write_history_csv(history, out_dir + "/history_cluster" + std::to_string(cluster) + ".csv");
    if (!in.forecasts.empty()) {
        write_forecast_csv(in.forecasts, out_dir + "/forecast.csv");
        if (in.plots)
            for (const auto& tr : in.forecasts)
                write_forecast_svg(tr, out_dir + "/forecast_" + tr.turbine_id + "_" +
                                           to_string(tr.mode) + ".svg");
    }
}

}  // namespace windfleet
