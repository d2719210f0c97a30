#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "windfleet/artifacts.hpp"
#include "windfleet/autosplit.hpp"
#include "windfleet/data.hpp"
#include "windfleet/eval.hpp"
#include "windfleet/features.hpp"
#include "windfleet/forecast.hpp"
#include "windfleet/io.hpp"
#include "windfleet/metrics.hpp"

namespace windfleet {

inline constexpr const char* kToolVersion = "windfleet 0.1.0";

enum class GroupingMethod {
    drs_auto,
    kpp_auto,
    flat_fed_k,
    geo_auto,
    geo_fixed,
    single_global,
    centralized
};

inline GroupingMethod grouping_method_from_string(const std::string& s) {
    if (s == "drs_auto") return GroupingMethod::drs_auto;
    if (s == "kpp_auto") return GroupingMethod::kpp_auto;
    if (s == "flat_fed_k") return GroupingMethod::flat_fed_k;
    if (s == "geo_auto") return GroupingMethod::geo_auto;
    if (s == "geo_fixed") return GroupingMethod::geo_fixed;
    if (s == "single_global") return GroupingMethod::single_global;
    if (s == "centralized") return GroupingMethod::centralized;
    throw ConfigError("unknown grouping method: '" + s + "'");
}

inline const char* to_string(GroupingMethod m) {
    switch (m) {
        case GroupingMethod::drs_auto: return "drs_auto";
        case GroupingMethod::kpp_auto: return "kpp_auto";
        case GroupingMethod::flat_fed_k: return "flat_fed_k";
        case GroupingMethod::geo_auto: return "geo_auto";
        case GroupingMethod::geo_fixed: return "geo_fixed";
        case GroupingMethod::single_global: return "single_global";
        case GroupingMethod::centralized: return "centralized";
    }
    return "?";
}

struct RunConfig {
    // data source: exactly one of (meta_path, series_path) or synthetic
    std::string meta_path, series_path;
    std::optional<SyntheticSpec> synthetic;

    GroupingMethod method = GroupingMethod::drs_auto;
    SplitThresholds thresholds;
    ParamGrid grid;
    TrainHyper hyper;
    std::uint64_t seed = 42;
    std::string out_dir = "out";

    double train_fraction = 0.8;
    std::size_t subsample_n = 0;  // 0 keeps the whole fleet
    bool exclude_outlier_leaves = true;
    bool apply_client_filter = false;

    std::size_t geo_k = 7;
    std::size_t flat_k = 6;
    std::size_t flat_n_clients = 5;
    std::size_t flat_c_rounds = 5;
    long centralized_cluster = -1;  // -1 picks the largest non-outlier leaf

    ForecastMode forecast_mode = ForecastMode::teacher_forced;
    std::size_t forecast_horizon = 24;
    bool plots = true;

    void validate() const {
        const bool files = !meta_path.empty() || !series_path.empty();
        if (files == synthetic.has_value())
            throw ConfigError("exactly one data source (files or synthetic) must be set");
        if (files && (meta_path.empty() || series_path.empty()))
            throw ConfigError("both meta and series paths are required");
        if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
            throw ConfigError("train_fraction must be in (0,1)");
        if (forecast_horizon < 1) throw ConfigError("forecast_horizon must be >= 1");
        thresholds.validate();
        grid.validate();
        hyper.validate();
    }
};

// ---------------------------------------------------------------------------
// Config file parsing (JSON; fields mirror RunConfig)
// ---------------------------------------------------------------------------

inline json config_to_json(const RunConfig& c) {
    json j;
    if (c.synthetic) {
        json arch = json::array();
        for (const auto& a : c.synthetic->archetypes) {
            json pj = {{"mean_wind", a.params.mean_wind},
                       {"wind_ar", a.params.wind_ar},
                       {"wind_sigma", a.params.wind_sigma},
                       {"diurnal_amp", a.params.diurnal_amp},
                       {"shutdown_prob", a.params.shutdown_prob},
                       {"ramp_noise", a.params.ramp_noise},
                       {"curve_mid", a.params.curve_mid},
                       {"curve_steep", a.params.curve_steep},
                       {"cap_min", a.params.cap_min},
                       {"cap_max", a.params.cap_max},
                       {"age_min", a.params.age_min},
                       {"age_max", a.params.age_max},
                       {"regime_jitter", a.params.regime_jitter},
                       {"shutdown_jitter", a.params.shutdown_jitter},
                       {"trend", a.params.trend}};
            arch.push_back({{"archetype", a.archetype}, {"count", a.count}, {"params", pj}});
        }
        j["data"] = {{"synthetic", {{"archetypes", arch},
                                    {"n_steps", c.synthetic->n_steps},
                                    {"seed", c.synthetic->seed}}}};
    } else {
        j["data"] = {{"files", {{"meta", c.meta_path}, {"series", c.series_path}}}};
    }
    j["method"] = to_string(c.method);
    j["thresholds"] = {{"tau_sil", c.thresholds.tau_sil},
                       {"tau_min", c.thresholds.tau_min},
                       {"tau_large", c.thresholds.tau_large}};
    j["grid"] = {{"n", {c.grid.n_lo, c.grid.n_hi}},
                 {"k", {c.grid.k_lo, c.grid.k_hi}},
                 {"c", {c.grid.c_lo, c.grid.c_hi}}};
    j["hyper"] = {{"local_epochs", c.hyper.local_epochs},
                  {"batch_size", c.hyper.batch_size},
                  {"learning_rate", c.hyper.learning_rate},
                  {"rounds", c.hyper.rounds},
                  {"hidden_dim", c.hyper.hidden_dim},
                  {"mlp_dim", c.hyper.mlp_dim},
                  {"optimizer", c.hyper.optimizer == Optimizer::adam ? "adam" : "sgd"}};
    j["seed"] = c.seed;
    j["out"] = c.out_dir;
    j["train_fraction"] = c.train_fraction;
    j["subsample_n"] = c.subsample_n;
    j["exclude_outlier_leaves"] = c.exclude_outlier_leaves;
    j["apply_client_filter"] = c.apply_client_filter;
    j["geo_k"] = c.geo_k;
    j["flat_k"] = c.flat_k;
    j["flat_n_clients"] = c.flat_n_clients;
    j["flat_c_rounds"] = c.flat_c_rounds;
    j["centralized_cluster"] = c.centralized_cluster;
    j["forecast"] = {{"mode", to_string(c.forecast_mode)}, {"horizon", c.forecast_horizon}};
    j["plots"] = c.plots;
    return j;
}

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    if (!j.contains("data")) throw ConfigError("config: missing 'data'");
    const auto& data = j.at("data");
    if (data.contains("synthetic")) {
        const auto& syn = data.at("synthetic");
        if (syn.is_string()) {  // path to a standalone fleet.json
            c.synthetic = load_synthetic_spec(syn.get<std::string>());
        } else {
            c.synthetic = synthetic_spec_from_json(syn);
            if (!syn.contains("seed") && j.contains("seed"))
                c.synthetic->seed = j.at("seed").get<std::uint64_t>();
        }
    } else if (data.contains("files")) {
        c.meta_path = data.at("files").at("meta").get<std::string>();
        c.series_path = data.at("files").at("series").get<std::string>();
    } else {
        throw ConfigError("config: 'data' needs 'files' or 'synthetic'");
    }
    if (j.contains("method")) c.method = grouping_method_from_string(j.at("method"));
    if (j.contains("thresholds")) {
        const auto& t = j.at("thresholds");
        if (t.contains("tau_sil")) c.thresholds.tau_sil = t.at("tau_sil").get<double>();
        if (t.contains("tau_min")) c.thresholds.tau_min = t.at("tau_min").get<double>();
        if (t.contains("tau_large")) c.thresholds.tau_large = t.at("tau_large").get<double>();
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        auto range = [&](const char* key, std::size_t& lo, std::size_t& hi) {
            if (!g.contains(key)) return;
            const auto& r = g.at(key);
            if (!r.is_array() || r.size() != 2) throw ConfigError("grid ranges need [lo, hi]");
            lo = r[0].get<std::size_t>();
            hi = r[1].get<std::size_t>();
        };
        range("n", c.grid.n_lo, c.grid.n_hi);
        range("k", c.grid.k_lo, c.grid.k_hi);
        range("c", c.grid.c_lo, c.grid.c_hi);
    }
    if (j.contains("hyper")) {
        const auto& h = j.at("hyper");
        if (h.contains("local_epochs")) c.hyper.local_epochs = h.at("local_epochs").get<std::size_t>();
        if (h.contains("batch_size")) c.hyper.batch_size = h.at("batch_size").get<std::size_t>();
        if (h.contains("learning_rate")) c.hyper.learning_rate = h.at("learning_rate").get<double>();
        if (h.contains("rounds")) c.hyper.rounds = h.at("rounds").get<std::size_t>();
        if (h.contains("hidden_dim")) c.hyper.hidden_dim = h.at("hidden_dim").get<int>();
        if (h.contains("mlp_dim")) c.hyper.mlp_dim = h.at("mlp_dim").get<int>();
        if (h.contains("optimizer")) {
            const auto s = h.at("optimizer").get<std::string>();
            if (s == "adam") c.hyper.optimizer = Optimizer::adam;
            else if (s == "sgd") c.hyper.optimizer = Optimizer::sgd;
            else throw ConfigError("unknown optimizer: '" + s + "'");
        }
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    c.hyper.seed = c.seed;
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    if (j.contains("train_fraction")) c.train_fraction = j.at("train_fraction").get<double>();
    if (j.contains("subsample_n")) c.subsample_n = j.at("subsample_n").get<std::size_t>();
    if (j.contains("exclude_outlier_leaves"))
        c.exclude_outlier_leaves = j.at("exclude_outlier_leaves").get<bool>();
    if (j.contains("apply_client_filter"))
        c.apply_client_filter = j.at("apply_client_filter").get<bool>();
    if (j.contains("geo_k")) c.geo_k = j.at("geo_k").get<std::size_t>();
    if (j.contains("flat_k")) c.flat_k = j.at("flat_k").get<std::size_t>();
    if (j.contains("flat_n_clients")) c.flat_n_clients = j.at("flat_n_clients").get<std::size_t>();
    if (j.contains("flat_c_rounds")) c.flat_c_rounds = j.at("flat_c_rounds").get<std::size_t>();
    if (j.contains("centralized_cluster"))
        c.centralized_cluster = j.at("centralized_cluster").get<long>();
    if (j.contains("forecast")) {
        const auto& f = j.at("forecast");
        if (f.contains("mode")) {
            const auto s = f.at("mode").get<std::string>();
            if (s == "teacher_forced") c.forecast_mode = ForecastMode::teacher_forced;
            else if (s == "recursive") c.forecast_mode = ForecastMode::recursive;
            else throw ConfigError("unknown forecast mode: '" + s + "'");
        }
        if (f.contains("horizon")) c.forecast_horizon = f.at("horizon").get<std::size_t>();
    }
    if (j.contains("plots")) c.plots = j.at("plots").get<bool>();
    c.validate();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    auto in = open_input(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Stage helpers
// ---------------------------------------------------------------------------

namespace pipeline_detail {

inline std::string artifact(const RunConfig& c, const std::string& name) {
    return c.out_dir + "/" + name;
}

inline void require_artifact(const RunConfig& c, const std::string& name,
                             const std::string& stage) {
    if (!std::filesystem::exists(artifact(c, name)))
        throw MissingArtifact(stage + ": missing artifact '" + name + "' in " + c.out_dir);
}

inline Fleet load_working_fleet(const RunConfig& c, const std::string& stage) {
    std::string meta = c.meta_path, series = c.series_path;
    if (c.synthetic) {
        require_artifact(c, "meta.csv", stage);
        require_artifact(c, "series.csv", stage);
        meta = artifact(c, "meta.csv");
        series = artifact(c, "series.csv");
    }
    Fleet fleet = load_fleet(meta, series);
    if (c.subsample_n > 0 && c.subsample_n < fleet.size())
        fleet = nearest_neighbour_subsample(fleet, c.subsample_n);
    return fleet;
}

inline std::vector<std::string> fleet_ids(const Fleet& fleet) {
    std::vector<std::string> ids;
    for (const auto& t : fleet.turbines) ids.push_back(t.meta.id);
    return ids;
}

struct ClusteredClients {
    // per trained cluster: the client datasets plus each client's series index
    std::map<int, std::vector<ClientDataset>> clusters;
    std::map<int, std::vector<std::size_t>> member_rows;
    NormalizationSpec norm;
};

inline ClusteredClients build_clients(const RunConfig& c, const Fleet& fleet,
                                      const LabelsFile& labels,
                                      const std::set<int>& trained_clusters) {
    ClusteredClients out;
    out.norm = fleet_normalization(fleet);
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < fleet.size(); ++i) by_id[fleet.turbines[i].meta.id] = i;

    const std::size_t min_part = kLagSteps + kHorizon;
    for (std::size_t i = 0; i < labels.ids.size(); ++i) {
        const int cl = labels.cluster[i];
        if (!trained_clusters.count(cl)) continue;
        auto it = by_id.find(labels.ids[i]);
        if (it == by_id.end())
            throw SchemaViolation("labels.csv id '" + labels.ids[i] + "' not in fleet");
        const auto& series = fleet.turbines[it->second];
        auto [train, test] = chronological_split(series, c.train_fraction, min_part);
        ClientDataset client;
        client.turbine_id = series.meta.id;
        client.train = build_windows(train, out.norm);
        client.validation = build_windows(test, out.norm);
        out.clusters[cl].push_back(std::move(client));
        out.member_rows[cl].push_back(it->second);
    }
    return out;
}

inline std::set<int> trained_cluster_set(const RunConfig& c, const LabelsFile& labels) {
    std::set<int> all;
    std::map<int, std::size_t> sizes;
    std::map<int, bool> outlier;
    for (std::size_t i = 0; i < labels.cluster.size(); ++i) {
        all.insert(labels.cluster[i]);
        ++sizes[labels.cluster[i]];
        if (labels.outlier[i]) outlier[labels.cluster[i]] = true;
    }

    const bool tree_method =
        c.method == GroupingMethod::drs_auto || c.method == GroupingMethod::kpp_auto ||
        c.method == GroupingMethod::centralized;

    std::set<int> trained;
    for (int cl : all) {
        if (tree_method && c.exclude_outlier_leaves && outlier.count(cl)) continue;
        trained.insert(cl);
    }
    if (c.method == GroupingMethod::centralized) {
        int pick = static_cast<int>(c.centralized_cluster);
        if (c.centralized_cluster < 0) {
            std::size_t best = 0;
            pick = -1;
            for (int cl : trained)
                if (sizes[cl] > best) {
                    best = sizes[cl];
                    pick = cl;
                }
        }
        if (pick < 0 || !trained.count(pick))
            throw ConfigError("centralized: designated cluster not available");
        return {pick};
    }
    if (trained.empty()) throw ConfigError("no trainable clusters (all outlier leaves?)");
    return trained;
}

}  // namespace pipeline_detail

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline void stage_generate(const RunConfig& c) {
    c.validate();
    namespace pd = pipeline_detail;
    if (!c.synthetic) return;  // file-backed runs ingest directly
    Fleet fleet =
        generate_synthetic_fleet(c.synthetic->archetypes, c.synthetic->n_steps, c.synthetic->seed);
    save_fleet(fleet, pd::artifact(c, "meta.csv"), pd::artifact(c, "series.csv"));
    auto out = open_output(pd::artifact(c, "archetypes.csv"));
    out << "id,archetype\n";
    for (const auto& t : fleet.turbines)
        out << t.meta.id << ',' << (t.meta.archetype ? *t.meta.archetype : -1) << '\n';
}

inline void stage_features(const RunConfig& c) {
    c.validate();
    namespace pd = pipeline_detail;
    Fleet fleet = pd::load_working_fleet(c, "features");

    const std::size_t min_part = kLagSteps + kHorizon;
    std::vector<BehaviourFingerprint> fps;
    for (const auto& t : fleet.turbines) {
        auto [train, test] = chronological_split(t, c.train_fraction, min_part);
        fps.push_back(fingerprint(train));
    }
    const auto ids = pd::fleet_ids(fleet);
    write_fingerprints_csv(ids, fps, pd::artifact(c, "fingerprints.csv"));
    const FeatureMatrix matrix = standardise(fps);
    auto out = open_output(pd::artifact(c, "features.json"));
    out << feature_matrix_to_json(ids, matrix).dump(2) << '\n';
}

inline void stage_cluster(const RunConfig& c) {
    c.validate();
    namespace pd = pipeline_detail;
    pd::require_artifact(c, "features.json", "cluster");
    pd::require_artifact(c, "fingerprints.csv", "cluster");

    json fj;
    {
        auto in = open_input(pd::artifact(c, "features.json"));
        in >> fj;
    }
    auto [ids, matrix] = feature_matrix_from_json(fj);

    std::vector<double> zero_ratios;
    {
        auto in = open_input(pd::artifact(c, "fingerprints.csv"));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            zero_ratios.push_back(parse_double(split_csv_line(line)[1 + kZeroRatioColumn]));
        }
    }

    GroupingResult grouping;
    std::vector<bool> outlier(ids.size(), false);
    AuditLog audit;

    switch (c.method) {
        case GroupingMethod::drs_auto:
        case GroupingMethod::kpp_auto:
        case GroupingMethod::centralized: {
            const InitMethod init = (c.method == GroupingMethod::kpp_auto) ? InitMethod::kmeanspp
                                                                           : InitMethod::drs;
            const ClusterTree tree = auto_split(matrix.rows, c.grid, c.thresholds, c.seed, init,
                                                &audit);
            const LeafLabels leaves = leaf_labels(tree);
            grouping.method = to_string(c.method);
            grouping.labels = leaves.cluster;
            grouping.k = leaves.n_leaves;
            outlier = leaves.outlier;
            if (grouping.k >= 2) grouping.quality = silhouette(matrix.rows, grouping.labels);
            auto out = open_output(pd::artifact(c, "tree.json"));
            out << tree_to_json(tree).dump(2) << '\n';
            break;
        }
        case GroupingMethod::flat_fed_k: {
            FedKMeansConfig cfg;
            cfg.n_clients = c.flat_n_clients;
            cfg.c_rounds = c.flat_c_rounds;
            cfg.seed = c.seed;
            CentroidSet centres;
            grouping = flat_fed_kmeans_grouping(matrix.rows, c.flat_k, cfg, &audit, &centres);
            write_centroids_json(centres, cfg, pd::artifact(c, "centroids.json"));
            break;
        }
        case GroupingMethod::geo_auto:
        case GroupingMethod::geo_fixed: {
            Fleet fleet = pd::load_working_fleet(c, "cluster");
            std::vector<TurbineMeta> metas;
            for (const auto& t : fleet.turbines) metas.push_back(t.meta);
            grouping = geo_grouping(metas,
                                    c.method == GroupingMethod::geo_fixed
                                        ? std::optional<std::size_t>(c.geo_k)
                                        : std::nullopt,
                                    c.seed);
            break;
        }
        case GroupingMethod::single_global: {
            grouping.method = "single_global";
            grouping.labels.assign(ids.size(), 0);
            grouping.k = 1;
            break;
        }
    }

    write_labels_csv(ids, grouping.labels, outlier, pd::artifact(c, "labels.csv"));
    if (!audit.records.empty()) write_audit_log(audit, pd::artifact(c, "audit.log"));
    {
        json gj = {{"method", grouping.method}, {"k", grouping.k}};
        if (std::isfinite(grouping.quality)) gj["silhouette"] = grouping.quality;
        auto out = open_output(pd::artifact(c, "grouping.json"));
        out << gj.dump(2) << '\n';
    }
    write_profile_csv(cluster_profile(matrix, grouping.labels, zero_ratios),
                      pd::artifact(c, "profile.csv"));
    {
        const auto pca = pca_project(matrix.rows, std::min<std::size_t>(3, matrix.d()));
        write_pca_csv(ids, pca, grouping.labels, pd::artifact(c, "pca.csv"));
    }
}

inline void stage_train(const RunConfig& c) {
    c.validate();
    namespace pd = pipeline_detail;
    pd::require_artifact(c, "labels.csv", "train");
    const LabelsFile labels = read_labels_csv(pd::artifact(c, "labels.csv"));
    Fleet fleet = pd::load_working_fleet(c, "train");

    const auto trained = pd::trained_cluster_set(c, labels);
    auto clients = pd::build_clients(c, fleet, labels, trained);

    json filter_rows = json::array();
    for (auto& [cluster, members] : clients.clusters) {
        if (c.method == GroupingMethod::centralized) {
            // pool all windows into a single client: no partition, no federation
            ClientDataset merged;
            merged.turbine_id = "pooled";
            for (auto& m : members) {
                merged.train.insert(merged.train.end(), m.train.begin(), m.train.end());
                merged.validation.insert(merged.validation.end(), m.validation.begin(),
                                         m.validation.end());
            }
            members = {std::move(merged)};
        } else if (c.apply_client_filter) {
            const auto filtered = filter_uninformative_clients(members);
            for (const auto& [idx, reason] : filtered.excluded)
                filter_rows.push_back({{"cluster", cluster},
                                       {"id", members[idx].turbine_id},
                                       {"reason", reason}});
            std::vector<ClientDataset> kept;
            for (std::size_t idx : filtered.kept) kept.push_back(std::move(members[idx]));
            if (!kept.empty()) members = std::move(kept);
        }

        TrainHyper hyper = c.hyper;
        hyper.seed = derive_seed(c.seed, 0x7a11, static_cast<std::uint64_t>(cluster));
        const auto result = train_cluster_fl(members, hyper, hyper.seed);
        {
            json mj = model_to_json(result.params, clients.norm, hyper);
            mj["cluster"] = cluster;
            auto out = open_output(pd::artifact(c, "models/model_cluster" +
                                                        std::to_string(cluster) + ".json"));
            out << mj.dump() << '\n';
        }
        write_history_csv(result.history,
                          pd::artifact(c, "history_cluster" + std::to_string(cluster) + ".csv"));
    }
    if (c.apply_client_filter) {
        auto out = open_output(pd::artifact(c, "filtered_clients.json"));
        out << filter_rows.dump(2) << '\n';
    }
}

inline void stage_forecast(const RunConfig& c) {
    c.validate();
    namespace pd = pipeline_detail;
    pd::require_artifact(c, "labels.csv", "forecast");
    const LabelsFile labels = read_labels_csv(pd::artifact(c, "labels.csv"));
    Fleet fleet = pd::load_working_fleet(c, "forecast");
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < fleet.size(); ++i) by_id[fleet.turbines[i].meta.id] = i;

    const auto trained = pd::trained_cluster_set(c, labels);
    std::vector<ForecastTrajectory> trajectories;
    for (int cluster : trained) {
        const std::string model_path =
            pd::artifact(c, "models/model_cluster" + std::to_string(cluster) + ".json");
        if (!std::filesystem::exists(model_path))
            throw MissingArtifact("forecast: missing model for cluster " +
                                  std::to_string(cluster));
        json mj;
        {
            auto in = open_input(model_path);
            in >> mj;
        }
        auto [params, norm] = model_from_json(mj);

        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.ids.size(); ++i)
            if (labels.cluster[i] == cluster) members.push_back(by_id.at(labels.ids[i]));
        if (members.empty()) continue;
        // one representative turbine per cluster, picked deterministically
        Rng rng = make_rng(c.seed, 0xf0ca, static_cast<std::uint64_t>(cluster));
        std::uniform_int_distribution<std::size_t> uni(0, members.size() - 1);
        const auto& series = fleet.turbines[members[uni(rng)]];

        const std::size_t n_train = static_cast<std::size_t>(
            std::floor(c.train_fraction * static_cast<double>(series.size())));
        if (n_train < kLagSteps || n_train + c.forecast_horizon > series.size())
            throw InsufficientHistory("forecast: series too short for the horizon");
        trajectories.push_back(rolling_forecast(params, norm, series, n_train,
                                                c.forecast_horizon, c.forecast_mode));
    }
    write_forecast_csv(trajectories, pd::artifact(c, "forecast.csv"));
    if (c.plots)
        for (const auto& tr : trajectories)
            write_forecast_svg(tr, pd::artifact(c, "forecast_" + tr.turbine_id + "_" +
                                                        to_string(tr.mode) + ".svg"));
}

inline void stage_evaluate(const RunConfig& c) {
    c.validate();
    namespace pd = pipeline_detail;
    pd::require_artifact(c, "labels.csv", "evaluate");
    const LabelsFile labels = read_labels_csv(pd::artifact(c, "labels.csv"));
    Fleet fleet = pd::load_working_fleet(c, "evaluate");

    const auto trained = pd::trained_cluster_set(c, labels);
    auto clients = pd::build_clients(c, fleet, labels, trained);

    std::vector<double> pooled_train_t, pooled_train_p, pooled_test_t, pooled_test_p;
    auto per_cluster = open_output(pd::artifact(c, "per_cluster.csv"));
    per_cluster << "cluster,split,mse,rmse,mae,r2,n_points\n";
    auto per_turbine = open_output(pd::artifact(c, "per_turbine.csv"));
    per_turbine << "id,cluster,split,mse,rmse,mae,r2,n_points\n";

    auto emit_metrics = [&](std::ofstream& out, const std::string& prefix,
                            const MetricsReport& m) {
        out << prefix << ',' << format_double(m.mse) << ',' << format_double(m.rmse) << ','
            << format_double(m.mae) << ',' << format_double(m.r2) << ',' << m.n_points << '\n';
    };

    for (const auto& [cluster, members] : clients.clusters) {
        const std::string model_path =
            pd::artifact(c, "models/model_cluster" + std::to_string(cluster) + ".json");
        if (!std::filesystem::exists(model_path))
            throw MissingArtifact("evaluate: missing model for cluster " +
                                  std::to_string(cluster));
        json mj;
        {
            auto in = open_input(model_path);
            in >> mj;
        }
        auto [params, norm] = model_from_json(mj);

        std::vector<double> cl_train_t, cl_train_p, cl_test_t, cl_test_p;
        for (const auto& client : members) {
            auto collect = [&](const std::vector<WindowSample>& windows, std::vector<double>& ts,
                               std::vector<double>& ps) {
                if (windows.empty()) return MetricsReport{};
                const auto pred = predict_windows(params, windows);
                const std::size_t before = ts.size();
                for (std::size_t i = 0; i < windows.size(); ++i)
                    for (Eigen::Index t = 0; t < params.horizon; ++t) {
                        ts.push_back(windows[i].target[static_cast<std::size_t>(t)]);
                        ps.push_back(pred(static_cast<Eigen::Index>(i), t));
                    }
                return regression_metrics(
                    std::span<const double>(ts).subspan(before),
                    std::span<const double>(ps).subspan(before));
            };
            const auto mt = collect(client.train, cl_train_t, cl_train_p);
            const auto mv = collect(client.validation, cl_test_t, cl_test_p);
            emit_metrics(per_turbine,
                         client.turbine_id + "," + std::to_string(cluster) + ",train", mt);
            emit_metrics(per_turbine, client.turbine_id + "," + std::to_string(cluster) + ",test",
                         mv);
        }
        emit_metrics(per_cluster, std::to_string(cluster) + ",train",
                     regression_metrics(cl_train_t, cl_train_p));
        emit_metrics(per_cluster, std::to_string(cluster) + ",test",
                     regression_metrics(cl_test_t, cl_test_p));
        pooled_train_t.insert(pooled_train_t.end(), cl_train_t.begin(), cl_train_t.end());
        pooled_train_p.insert(pooled_train_p.end(), cl_train_p.begin(), cl_train_p.end());
        pooled_test_t.insert(pooled_test_t.end(), cl_test_t.begin(), cl_test_t.end());
        pooled_test_p.insert(pooled_test_p.end(), cl_test_p.begin(), cl_test_p.end());
    }

    MethodMetrics mm;
    mm.method = to_string(c.method);
    mm.n_groups = trained.size();
    mm.train = regression_metrics(pooled_train_t, pooled_train_p);
    mm.test = regression_metrics(pooled_test_t, pooled_test_p);
    write_comparison_csv({mm}, pd::artifact(c, "comparison.csv"));
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

inline void write_manifest(const RunConfig& c) {
    json cfg = config_to_json(c);
    const std::string canonical = cfg.dump();
    json m = {{"tool", kToolVersion},
              {"seed", c.seed},
              {"config_digest", hex64(fnv1a64(canonical.data(), canonical.size()))},
              {"config", cfg}};
    auto out = open_output(c.out_dir + "/manifest.json");
    out << m.dump(2) << '\n';
}

inline void run_pipeline(const RunConfig& c) {
    c.validate();
    struct Stage {
        const char* name;
        void (*fn)(const RunConfig&);
    };
    const Stage stages[] = {{"generate", stage_generate}, {"features", stage_features},
                            {"cluster", stage_cluster},   {"train", stage_train},
                            {"forecast", stage_forecast}, {"evaluate", stage_evaluate}};
    for (const auto& s : stages) {
        try {
            s.fn(c);
        } catch (const Error& e) {
            throw Error(std::string("stage ") + s.name + ": " + e.what());
        }
    }
    write_manifest(c);
}

}  // namespace windfleet
