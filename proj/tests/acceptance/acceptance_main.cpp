// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "windfleet/windfleet.hpp"

using namespace windfleet;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void criterion(int number, const std::string& name, const std::function<bool(std::string&)>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = fn(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
                secs, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

Eigen::MatrixXd random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 10.0);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uni(rng);
    return m;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// fleets used by the end-to-end criteria
// ---------------------------------------------------------------------------

// three archetypes with matched power dynamics, separable on stable statistics
std::vector<ArchetypeSpec> recovery_archetypes(std::size_t n0, std::size_t n1, std::size_t n2) {
    auto base = archetype_preset("baseline_stable");
    base.mean_wind = 7.0;
    base.wind_sigma = 1.0;
    base.wind_ar = 0.9;
    base.shutdown_prob = 0.02;
    base.ramp_noise = 0.01;
    base.trend = 0.0;
    base.cap_min = 14.0;
    base.cap_max = 18.0;
    base.regime_jitter = 0.08;
    base.shutdown_jitter = 0.01;
    auto high = base;
    high.mean_wind = 10.5;
    auto low = base;
    low.shutdown_prob = 0.25;
    low.shutdown_jitter = 0.02;
    return {{"baseline_stable", n0, base},
            {"baseline_stable", n1, high},
            {"baseline_stable", n2, low}};
}

// archetypes that differ in the conditional wind-to-power mapping, so that a
// model trained on a behaviourally mixed client group carries irreducible error
std::vector<ArchetypeSpec> forecast_archetypes(std::size_t per_group) {
    auto a = archetype_preset("baseline_stable");
    a.mean_wind = 7.5;
    a.wind_sigma = 1.0;
    a.wind_ar = 0.9;
    a.curve_mid = 8.0;
    a.curve_steep = 0.9;
    a.shutdown_prob = 0.02;
    a.ramp_noise = 0.01;
    a.trend = 0.0;
    a.cap_min = 14.0;
    a.cap_max = 18.0;
    a.regime_jitter = 0.08;
    a.shutdown_jitter = 0.01;
    auto b = a;
    b.mean_wind = 10.5;
    b.curve_mid = 10.0;
    b.curve_steep = 0.5;
    auto c = a;
    c.shutdown_prob = 0.30;
    c.shutdown_jitter = 0.02;
    return {{"baseline_stable", per_group, a},
            {"baseline_stable", per_group, b},
            {"baseline_stable", per_group, c}};
}

RunConfig forecast_run_config(const std::vector<ArchetypeSpec>& archetypes, std::size_t n_steps,
                              std::uint64_t seed, const std::string& out_dir) {
    RunConfig cfg;
    cfg.synthetic = SyntheticSpec{archetypes, n_steps, seed};
    cfg.seed = seed;
    cfg.out_dir = out_dir;
    cfg.exclude_outlier_leaves = false;  // identical turbine populations per method
    cfg.hyper.hidden_dim = 16;
    cfg.hyper.mlp_dim = 8;
    cfg.hyper.rounds = 12;
    cfg.hyper.batch_size = 64;
    cfg.hyper.learning_rate = 2e-3;
    cfg.hyper.optimizer = Optimizer::adam;
    cfg.hyper.seed = seed;
    cfg.plots = false;
    return cfg;
}

struct MethodOutcome {
    double test_mse = 0.0;
    std::size_t n_groups = 0;
};

MethodOutcome read_comparison(const std::string& out_dir) {
    std::ifstream in(out_dir + "/comparison.csv");
    std::string line;
    std::getline(in, line);  // header
    MethodOutcome out;
    while (std::getline(in, line)) {
        const auto f = split_csv_line(line);
        if (f.size() < 7 || f[2] != "test") continue;
        out.n_groups = static_cast<std::size_t>(parse_int(f[1]));
        out.test_mse = parse_double(f[3]);
    }
    return out;
}

// exact distribution of the unordered D^2 seed set (enumerates all sequences)
void enumerate_kpp(const Eigen::MatrixXd& pts, std::vector<std::size_t>& chosen, double prob,
                   std::size_t k, std::map<std::set<std::size_t>, double>& out) {
    if (chosen.size() == k) {
        out[std::set<std::size_t>(chosen.begin(), chosen.end())] += prob;
        return;
    }
    const auto n = static_cast<std::size_t>(pts.rows());
    std::vector<double> w(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c : chosen)
            best = std::min(best, (pts.row(static_cast<Eigen::Index>(i)) -
                                   pts.row(static_cast<Eigen::Index>(c)))
                                      .squaredNorm());
        if (chosen.empty()) best = 1.0;
        w[i] = best;
        total += best;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (w[i] <= 0.0) continue;
        chosen.push_back(i);
        enumerate_kpp(pts, chosen, prob * w[i] / total, k, out);
        chosen.pop_back();
    }
}

double silhouette_oracle(const Eigen::MatrixXd& m, const std::vector<int>& labels) {
    const auto n = static_cast<std::size_t>(m.rows());
    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (sizes[static_cast<std::size_t>(labels[i])] <= 1) continue;
        double a_sum = 0.0;
        std::vector<double> b_sum(static_cast<std::size_t>(k), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = (m.row(static_cast<Eigen::Index>(i)) -
                              m.row(static_cast<Eigen::Index>(j)))
                                 .norm();
            if (labels[j] == labels[i])
                a_sum += d;
            else
                b_sum[static_cast<std::size_t>(labels[j])] += d;
        }
        const double a =
            a_sum / static_cast<double>(sizes[static_cast<std::size_t>(labels[i])] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c)
            if (c != labels[i] && sizes[static_cast<std::size_t>(c)] > 0)
                b = std::min(b, b_sum[static_cast<std::size_t>(c)] /
                                    static_cast<double>(sizes[static_cast<std::size_t>(c)]));
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

fs::path work_dir() { return fs::temp_directory_path() / "windfleet_acceptance"; }

}  // namespace

// ---------------------------------------------------------------------------

int main() {
    fs::remove_all(work_dir());
    fs::create_directories(work_dir());

    criterion(1, "federated n_clients=1 equals centralized Lloyd (100 instances)",
              [](std::string& detail) {
        Rng meta = make_rng(0xACC1);
        for (int inst = 0; inst < 100; ++inst) {
            std::uniform_int_distribution<std::size_t> n_dist(10, 200), k_dist(1, 5), c_dist(1, 8);
            const std::size_t n = n_dist(meta), k = k_dist(meta), c = c_dist(meta);
            const auto m = random_matrix(n, 6, 0x11000 + static_cast<std::uint64_t>(inst));

            Rng rng = make_rng(0x12000, static_cast<std::uint64_t>(inst));
            auto shards = partition_clients(m, 1, rng);
            const auto init = drs_init(shards, m, k, rng);
            const auto centres = federated_rounds(m, shards, init, c);
            const auto fed_labels = assign_all(m, centres);
            const auto [oracle_labels, oc] = centralized_lloyd(m, init, c);
            if (fed_labels != oracle_labels) {
                detail = "label mismatch at instance " + std::to_string(inst);
                return false;
            }
        }
        return true;
    });

    criterion(2, "single-client DRS matches exact k-means++ D^2 law (TV <= 0.02)",
              [](std::string& detail) {
        Eigen::MatrixXd pts(5, 1);
        pts << 0.0, 1.0, 3.0, 7.0, 15.0;
        std::map<std::set<std::size_t>, double> exact;
        std::vector<std::size_t> chosen;
        enumerate_kpp(pts, chosen, 1.0, 3, exact);

        ClientShard shard{0, {0, 1, 2, 3, 4}};
        std::map<std::set<std::size_t>, double> freq;
        const int trials = 10000;
        for (int t = 0; t < trials; ++t) {
            Rng rng = make_rng(0x2000, static_cast<std::uint64_t>(t));
            const auto rows = drs_select_rows({shard}, pts, 3, rng);
            freq[std::set<std::size_t>(rows.begin(), rows.end())] += 1.0 / trials;
        }
        double tv = 0.0;
        for (const auto& [s, p] : exact) {
            const auto it = freq.find(s);
            tv += std::abs((it == freq.end() ? 0.0 : it->second) - p);
        }
        for (const auto& [s, p] : freq)
            if (!exact.count(s)) tv += p;
        tv /= 2.0;
        detail = "tv=" + fmt(tv);
        return tv <= 0.02;
    });

    criterion(3, "aggregate_centroids equals pooled means (<= 1e-12, fuzzed)",
              [](std::string& detail) {
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            Rng rng = make_rng(0x3000, seed);
            std::uniform_int_distribution<std::size_t> n_dist(4, 120), d_dist(1, 8), k_dist(1, 6),
                c_dist(1, 6);
            const std::size_t n = n_dist(rng), d = d_dist(rng), k = k_dist(rng);
            const std::size_t n_clients = std::min(c_dist(rng), n);
            const auto m = random_matrix(n, d, 0x3100 + seed);
            CentroidSet centres;
            centres.centres = random_matrix(k, d, 0x3200 + seed);
            auto shards = partition_clients(m, n_clients, rng);
            std::vector<LocalUpdate> updates;
            for (const auto& s : shards) updates.push_back(local_lloyd_step(s, m, centres));
            const auto agg = aggregate_centroids(updates, centres);

            Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                                         static_cast<Eigen::Index>(d));
            std::vector<std::size_t> counts(k, 0);
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                auto [c, dist] = nearest_centre(m.row(i), centres.centres);
                sums.row(c) += m.row(i);
                ++counts[static_cast<std::size_t>(c)];
            }
            for (std::size_t c = 0; c < k; ++c) {
                const Eigen::RowVectorXd expect =
                    counts[c] > 0
                        ? (sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]))
                              .eval()
                        : centres.centres.row(static_cast<Eigen::Index>(c)).eval();
                worst = std::max(worst, (agg.centres.row(static_cast<Eigen::Index>(c)) - expect)
                                            .cwiseAbs()
                                            .maxCoeff());
            }
        }
        detail = "max_abs_err=" + fmt(worst);
        return worst <= 1e-12;
    });

    criterion(4, "silhouette equals O(n^2) oracle (|delta| <= 1e-9, 50 instances)",
              [](std::string& detail) {
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            Rng rng = make_rng(0x4000, seed);
            std::uniform_int_distribution<std::size_t> n_dist(4, 200);
            std::uniform_int_distribution<int> k_dist(2, 6);
            const std::size_t n = n_dist(rng);
            const int k = k_dist(rng);
            const auto m = random_matrix(n, 6, 0x4100 + seed);
            std::vector<int> labels(n);
            std::uniform_int_distribution<int> lab(0, k - 1);
            for (auto& l : labels) l = lab(rng);
            labels[0] = 0;
            labels[n - 1] = 1;  // guarantee two distinct labels
            worst = std::max(worst, std::abs(silhouette(m, labels) - silhouette_oracle(m, labels)));
        }
        detail = "max_abs_delta=" + fmt(worst);
        return worst <= 1e-9;
    });

    criterion(5, "auto-split recovers 3 archetypes, ARI >= 0.9 across 5 seeds",
              [](std::string& detail) {
        const auto spec = recovery_archetypes(48, 42, 30);
        double min_ari = 1.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const Fleet fleet = generate_synthetic_fleet(spec, 2500, seed);
            std::vector<BehaviourFingerprint> fps;
            std::vector<int> truth;
            for (const auto& t : fleet.turbines) {
                fps.push_back(fingerprint(t));
                truth.push_back(*t.meta.archetype);
            }
            const auto matrix = standardise(fps);
            const auto tree = auto_split(matrix.rows, ParamGrid{}, SplitThresholds{}, seed);
            const auto leaves = leaf_labels(tree);
            min_ari = std::min(min_ari, adjusted_rand_index(leaves.cluster, truth));
        }
        detail = "min_ari=" + fmt(min_ari);
        return min_ari >= 0.9;
    });

    criterion(6, "forced-split fires once; 30% node leafs without search",
              [](std::string& detail) {
        // (a) one blob covering 100% of N with silhouette < 0.45
        Rng rng = make_rng(0x6000);
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::MatrixXd blob(50, 6);
        for (Eigen::Index i = 0; i < blob.size(); ++i) blob.data()[i] = g(rng);
        const auto tree = auto_split(blob, ParamGrid{}, SplitThresholds{}, 13);
        if (!tree.nodes[0].best_silhouette || *tree.nodes[0].best_silhouette >= 0.45) {
            detail = "premise failed: root silhouette not below threshold";
            return false;
        }
        std::size_t forced = 0;
        for (const auto& n : tree.nodes)
            if (n.forced) ++forced;
        if (forced != 1 || !tree.nodes[0].forced || tree.nodes[0].children.empty()) {
            detail = "forced splits=" + std::to_string(forced);
            return false;
        }

        // (b) children of exactly 0.3 * N become outlier leaves, never searched:
        // three tight far blobs of sizes 4/3/3 out of N=10
        Rng rng2 = make_rng(0x6100);
        Eigen::MatrixXd three(10, 2);
        for (int i = 0; i < 10; ++i) {
            const double cx = i < 4 ? 0.0 : (i < 7 ? 100.0 : 0.0);
            const double cy = i < 7 ? 0.0 : 100.0;
            three(i, 0) = cx + 0.1 * g(rng2);
            three(i, 1) = cy + 0.1 * g(rng2);
        }
        const auto tree2 = auto_split(three, ParamGrid{}, SplitThresholds{}, 11);
        std::size_t boundary_leaves = 0;
        for (const auto& n : tree2.nodes)
            if (n.row_indices.size() == 3 && n.parent == 0) {
                if (!n.is_outlier_leaf || n.best_silhouette.has_value()) {
                    detail = "30% node was searched or not an outlier leaf";
                    return false;
                }
                ++boundary_leaves;
            }
        if (boundary_leaves != 2) {
            detail = "expected 4/3/3 split, found " + std::to_string(boundary_leaves) +
                     " size-3 children";
            return false;
        }
        return true;
    });

    criterion(7, "LSTM analytic gradients vs finite differences (<1e-4, 3 seeds)",
              [](std::string& detail) {
        double worst = 0.0;
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            Rng rng = make_rng(0x7000, seed);
            ModelParams p = init_params(kInputDim, 6, 4, 3, rng);

            Rng wrng = make_rng(0x7100, seed);
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979);
            std::vector<WindowSample> batch;
            for (int b = 0; b < 3; ++b) {
                WindowSample w;
                for (int t = 0; t < 8; ++t) {
                    w.lag_power.push_back(uni(wrng));
                    w.wind.push_back(uni(wrng));
                    const double a = angle(wrng);
                    w.dir_sin.push_back(std::sin(a));
                    w.dir_cos.push_back(std::cos(a));
                    w.temp.push_back(uni(wrng));
                    const double h = angle(wrng);
                    w.hour_sin.push_back(std::sin(h));
                    w.hour_cos.push_back(std::cos(h));
                }
                w.capacity = uni(wrng);
                w.age = uni(wrng);
                for (int t = 0; t < 3; ++t) w.target.push_back(uni(wrng));
                batch.push_back(std::move(w));
            }

            const auto analytic = backward(p, batch);
            auto groups = p.tensors();
            auto grads = analytic.gradients.tensors();
            const double h = 1e-5;
            Rng pick = make_rng(0x7200, seed);
            for (std::size_t g = 0; g < groups.size(); ++g) {
                std::uniform_int_distribution<std::ptrdiff_t> coord(0, groups[g].size - 1);
                for (int rep = 0; rep < 50; ++rep) {
                    const auto c = coord(pick);
                    const double saved = groups[g].data[c];
                    groups[g].data[c] = saved + h;
                    const double up = backward(p, batch).loss;
                    groups[g].data[c] = saved - h;
                    const double down = backward(p, batch).loss;
                    groups[g].data[c] = saved;
                    const double fd = (up - down) / (2.0 * h);
                    const double an = grads[g].data[c];
                    worst = std::max(worst, std::abs(an - fd) /
                                                std::max({std::abs(an), std::abs(fd), 1e-8}));
                }
            }
        }
        detail = "max_rel_err=" + fmt(worst);
        return worst < 1e-4;
    });

    criterion(8, "FedAvg fixed point: identical clients track one client per round",
              [](std::string& detail) {
        const Fleet fleet = generate_synthetic_fleet(recovery_archetypes(1, 1, 1), 200, 9);
        NormalizationSpec norm = fleet_normalization(fleet);
        auto [train, test] = chronological_split(fleet.turbines[0], 0.8, kLagSteps + kHorizon);
        ClientDataset client;
        client.turbine_id = "c";
        client.train = build_windows(train, norm);
        client.validation = build_windows(test, norm);

        TrainHyper hyper;
        hyper.hidden_dim = 8;
        hyper.mlp_dim = 4;
        hyper.batch_size = 16;
        const std::uint64_t seed = 0x8000;

        Rng ir1 = make_rng(seed, 0xf17);
        ModelParams solo = init_params(kInputDim, 8, 4, 3, ir1);
        ModelParams trio = solo;
        double worst = 0.0;
        for (std::size_t round = 1; round <= 5; ++round) {
            Rng r1 = make_rng(seed, 0x10ca1, round);
            solo = fedavg({{local_train(solo, client, hyper, r1), client.n_samples()}});
            std::vector<std::pair<ModelParams, std::size_t>> updates;
            for (int j = 0; j < 3; ++j) {
                Rng rj = make_rng(seed, 0x10ca1, round);
                updates.emplace_back(local_train(trio, client, hyper, rj), client.n_samples());
            }
            trio = fedavg(updates);
            auto st = solo.tensors();
            auto tt = trio.tensors();
            for (std::size_t i = 0; i < st.size(); ++i)
                for (std::ptrdiff_t j = 0; j < st[i].size; ++j)
                    worst = std::max(worst, std::abs(st[i].data[j] - tt[i].data[j]));
            if (worst > 1e-12) break;
        }
        detail = "max_abs_diff=" + fmt(worst);
        return worst <= 1e-12;
    });

    // criteria 9 and 10 share the same fleets and runs
    std::map<std::uint64_t, MethodOutcome> drs_runs, geo_runs, kpp_runs;
    criterion(9, "behaviour grouping beats geographic grouping (test MSE, 3 seeds)",
              [&](std::string& detail) {
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            const auto out_base = (work_dir() / ("c9_seed" + std::to_string(seed))).string();
            const auto archetypes = forecast_archetypes(12);

            RunConfig drs = forecast_run_config(archetypes, 1200, seed, out_base + "_drs");
            drs.method = GroupingMethod::drs_auto;
            run_pipeline(drs);
            drs_runs[seed] = read_comparison(drs.out_dir);

            RunConfig geo = forecast_run_config(archetypes, 1200, seed, out_base + "_geo");
            geo.method = GroupingMethod::geo_fixed;
            geo.geo_k = drs_runs[seed].n_groups;  // equal group count
            run_pipeline(geo);
            geo_runs[seed] = read_comparison(geo.out_dir);

            RunConfig kpp = forecast_run_config(archetypes, 1200, seed, out_base + "_kpp");
            kpp.method = GroupingMethod::kpp_auto;
            run_pipeline(kpp);
            kpp_runs[seed] = read_comparison(kpp.out_dir);
        }
        bool ok = true;
        for (const auto& [seed, drs] : drs_runs) {
            const auto& geo = geo_runs[seed];
            detail += "seed" + std::to_string(seed) + ": drs=" + fmt(drs.test_mse) + "(k=" +
                      std::to_string(drs.n_groups) + ") geo=" + fmt(geo.test_mse) + " ";
            if (!(drs.test_mse < geo.test_mse) || drs.n_groups != geo.n_groups) ok = false;
        }
        return ok;
    });

    criterion(10, "DRS-auto and K++-auto test MSE within 15% relative (3 seeds)",
              [&](std::string& detail) {
        if (drs_runs.empty() || kpp_runs.empty()) {
            detail = "criterion 9 runs unavailable";
            return false;
        }
        bool ok = true;
        for (const auto& [seed, drs] : drs_runs) {
            const auto& kpp = kpp_runs[seed];
            const double rel =
                std::abs(drs.test_mse - kpp.test_mse) / std::min(drs.test_mse, kpp.test_mse);
            detail += "seed" + std::to_string(seed) + ": rel=" + fmt(rel) + " ";
            if (!(rel < 0.15)) ok = false;
        }
        return ok;
    });

    criterion(11, "uninformative-client filter lifts pooled R^2 above zero",
              [](std::string& detail) {
        // 10-client cluster with 30% uninformative units: one near-permanently
        // off, two quasi-constant (curtailed at a fixed operating point)
        auto normal = archetype_preset("baseline_stable");
        normal.mean_wind = 8.5;
        normal.wind_sigma = 1.2;
        normal.wind_ar = 0.9;
        normal.shutdown_prob = 0.02;
        normal.ramp_noise = 0.015;
        normal.cap_min = 14;
        normal.cap_max = 18;
        normal.regime_jitter = 0.08;
        auto dead = archetype_preset("faulty");
        dead.shutdown_prob = 0.9995;
        dead.shutdown_jitter = 0.0;
        dead.cap_min = 14;
        dead.cap_max = 18;
        auto flat = normal;
        flat.mean_wind = 8.0;
        flat.wind_sigma = 0.05;
        flat.wind_ar = 0.3;
        flat.diurnal_amp = 0.0;
        flat.shutdown_prob = 0.0;
        flat.shutdown_jitter = 0.0;
        flat.ramp_noise = 0.0008;
        flat.regime_jitter = 0.0;
        const Fleet fleet = generate_synthetic_fleet(
            {{"baseline_stable", 7, normal}, {"faulty", 1, dead}, {"baseline_stable", 2, flat}},
            1200, 2);
        NormalizationSpec norm = fleet_normalization(fleet);

        std::vector<ClientDataset> clients;
        for (const auto& t : fleet.turbines) {
            auto [train, test] = chronological_split(t, 0.8, kLagSteps + kHorizon);
            ClientDataset c;
            c.turbine_id = t.meta.id;
            c.train = build_windows(train, norm);
            c.validation = build_windows(test, norm);
            clients.push_back(std::move(c));
        }

        // premise: the off unit's validation target is exactly all zero
        for (const auto& w : clients[7].validation)
            for (double v : w.target)
                if (v != 0.0) {
                    detail = "premise failed: off unit produced in validation";
                    return false;
                }

        TrainHyper hyper;
        hyper.hidden_dim = 16;
        hyper.mlp_dim = 8;
        hyper.rounds = 8;
        hyper.batch_size = 64;
        hyper.learning_rate = 2e-3;
        const auto pre = train_cluster_fl(clients, hyper, 0xB002);

        auto pooled_metrics = [](const ModelParams& params, const std::vector<ClientDataset>& cs) {
            std::vector<double> yt, yp;
            for (const auto& c : cs) {
                const auto pred = predict_windows(params, c.validation);
                for (std::size_t i = 0; i < c.validation.size(); ++i)
                    for (Eigen::Index t = 0; t < params.horizon; ++t) {
                        yt.push_back(c.validation[i].target[static_cast<std::size_t>(t)]);
                        yp.push_back(pred(static_cast<Eigen::Index>(i), t));
                    }
            }
            return regression_metrics(yt, yp);
        };
        const auto pre_metrics = pooled_metrics(pre.params, clients);

        // the degenerate sentinel fires when scoring the all-zero client alone
        const auto dead_metrics = pooled_metrics(pre.params, {clients[7]});
        const bool sentinel = dead_metrics.degenerate_target && dead_metrics.r2 == kDegenerateR2;

        const auto filtered = filter_uninformative_clients(clients);
        if (filtered.kept.size() != 7) {
            detail = "filter kept " + std::to_string(filtered.kept.size()) + " of 10";
            return false;
        }
        std::vector<ClientDataset> kept;
        for (std::size_t i : filtered.kept) kept.push_back(clients[i]);

        // fine-tune the pre-trained model on the informative clients
        ModelParams tuned = pre.params;
        for (std::size_t round = 1; round <= hyper.rounds; ++round) {
            std::vector<std::pair<ModelParams, std::size_t>> updates;
            for (const auto& c : kept) {
                Rng r = make_rng(0xB100, round);
                updates.emplace_back(local_train(tuned, c, hyper, r), c.n_samples());
            }
            tuned = fedavg(updates);
        }
        const auto post_metrics = pooled_metrics(tuned, kept);

        detail = "pre_r2=" + fmt(pre_metrics.r2) + " post_r2=" + fmt(post_metrics.r2) +
                 " sentinel=" + (sentinel ? "yes" : "no");
        return sentinel && post_metrics.r2 > 0.0 && pre_metrics.r2 < post_metrics.r2;
    });

    criterion(12, "rolling trajectory: 8 blocks, length 24, deterministic, both modes",
              [](std::string& detail) {
        const Fleet fleet = generate_synthetic_fleet(recovery_archetypes(1, 1, 1), 200, 21);
        const auto& series = fleet.turbines[0];
        NormalizationSpec norm = fleet_normalization(fleet);

        Rng rng = make_rng(0xC000);
        ModelParams p = init_params(kInputDim, 8, 4, 3, rng);

        // block structure: a constant model emits its 3-vector 8 times
        ModelParams blocky = zeros_like(p);
        blocky.c2 << 0.2, 0.5, 0.8;
        const auto tf =
            rolling_forecast(blocky, norm, series, 120, 24, ForecastMode::teacher_forced);
        if (tf.predicted_kw.size() != 24) {
            detail = "length " + std::to_string(tf.predicted_kw.size());
            return false;
        }
        const double cap = series.meta.capacity_kw;
        for (std::size_t block = 0; block < 8; ++block)
            for (std::size_t t = 0; t < 3; ++t) {
                const double expect = (t == 0 ? 0.2 : t == 1 ? 0.5 : 0.8) * cap;
                if (std::abs(tf.predicted_kw[block * 3 + t] - expect) > 1e-9) {
                    detail = "block pattern mismatch";
                    return false;
                }
            }

        for (auto mode : {ForecastMode::teacher_forced, ForecastMode::recursive}) {
            const auto a = rolling_forecast(p, norm, series, 120, 24, mode);
            const auto b = rolling_forecast(p, norm, series, 120, 24, mode);
            if (a.predicted_kw != b.predicted_kw || a.predicted_kw.size() != 24) {
                detail = std::string("mode ") + to_string(mode) + " not deterministic";
                return false;
            }
        }
        return true;
    });

    criterion(13, "end-to-end determinism: byte-identical outputs at seed 42",
              [](std::string& detail) {
        const auto dir = work_dir() / "c13";
        RunConfig cfg =
            forecast_run_config(forecast_archetypes(8), 600, 42, (dir / "run").string());
        cfg.hyper.rounds = 3;
        cfg.plots = true;

        auto snapshot = [&](const fs::path& root) {
            std::map<std::string, std::string> out;
            for (const auto& e : fs::recursive_directory_iterator(root))
                if (e.is_regular_file()) {
                    std::ifstream in(e.path(), std::ios::binary);
                    out[fs::relative(e.path(), root).string()] =
                        std::string(std::istreambuf_iterator<char>(in), {});
                }
            return out;
        };
        run_pipeline(cfg);
        const auto first = snapshot(dir / "run");
        fs::remove_all(dir / "run");
        run_pipeline(cfg);
        const auto second = snapshot(dir / "run");
        if (first.size() != second.size()) {
            detail = "file sets differ";
            return false;
        }
        for (const auto& [name, bytes] : first) {
            const auto it = second.find(name);
            if (it == second.end() || it->second != bytes) {
                detail = "mismatch in " + name;
                return false;
            }
        }
        // spec smoke: tree, at least 3 cluster models, comparison table
        std::size_t models = 0;
        for (const auto& e : fs::directory_iterator(dir / "run" / "models")) {
            (void)e;
            ++models;
        }
        if (!fs::exists(dir / "run" / "tree.json") || models < 3 ||
            !fs::exists(dir / "run" / "comparison.csv")) {
            detail = "missing artifacts (models=" + std::to_string(models) + ")";
            return false;
        }
        detail = std::to_string(first.size()) + " files compared";
        return true;
    });

    std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "OK" : "FAILURE", g_failures);
    return g_failures == 0 ? 0 : 1;
}
