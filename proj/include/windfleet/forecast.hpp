#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windfleet/common.hpp"
#include "windfleet/data.hpp"
#include "windfleet/lstm.hpp"
#include "windfleet/metrics.hpp"

namespace windfleet {

inline constexpr std::size_t kLagSteps = 24;  // L
inline constexpr std::size_t kHorizon = 3;    // H

// Fixed normalization constants; recorded in model artifacts so stored models
// reproduce inference exactly.
struct NormalizationSpec {
    double wind_max = 25.0;   // m/s
    double temp_min = -20.0;  // degrees C
    double temp_max = 40.0;
    double cap_ref = 1.0;  // kW reference for the static capacity feature
    double age_ref = 1.0;  // years

    double norm_temp(double t) const { return (t - temp_min) / (temp_max - temp_min); }
};

inline NormalizationSpec fleet_normalization(const Fleet& fleet) {
    NormalizationSpec n;
    for (const auto& t : fleet.turbines) {
        n.cap_ref = std::max(n.cap_ref, t.meta.capacity_kw);
        n.age_ref = std::max(n.age_ref, t.meta.age);
    }
    return n;
}

// ---------------------------------------------------------------------------
// Window construction
// ---------------------------------------------------------------------------

struct WindowSample {
    // per lag step (length L each)
    std::vector<double> lag_power;  // normalized by turbine capacity
    std::vector<double> wind;       // / wind_max
    std::vector<double> dir_sin, dir_cos;
    std::vector<double> temp;  // affine-mapped to ~[0,1]
    std::vector<double> hour_sin, hour_cos;
    // static, appended to every step's input vector
    double capacity = 0.0;
    double age = 0.0;
    // H normalized power values following the lag window
    std::vector<double> target;
};

inline constexpr int kInputDim = 9;

inline std::vector<WindowSample> build_windows(const TurbineSeries& s,
                                               const NormalizationSpec& norm,
                                               std::size_t L = kLagSteps,
                                               std::size_t H = kHorizon) {
    using std::numbers::pi;
    const std::size_t n = s.size();
    if (n < L + H) throw SeriesTooShort("series shorter than L+H");

    const double cap = s.meta.capacity_kw;
    std::vector<WindowSample> out;
    out.reserve(n - L - H + 1);
    for (std::size_t start = 0; start + L + H <= n; ++start) {
        WindowSample w;
        w.lag_power.resize(L);
        w.wind.resize(L);
        w.dir_sin.resize(L);
        w.dir_cos.resize(L);
        w.temp.resize(L);
        w.hour_sin.resize(L);
        w.hour_cos.resize(L);
        for (std::size_t t = 0; t < L; ++t) {
            const std::size_t i = start + t;
            w.lag_power[t] = s.power[i] / cap;
            w.wind[t] = s.wind_speed[i] / norm.wind_max;
            const double rad = s.wind_dir[i] * pi / 180.0;
            w.dir_sin[t] = std::sin(rad);
            w.dir_cos[t] = std::cos(rad);
            w.temp[t] = norm.norm_temp(s.temperature[i]);
            const double hour = static_cast<double>(hour_of_day(s.timestamps[i]));
            w.hour_sin[t] = std::sin(2.0 * pi * hour / 24.0);
            w.hour_cos[t] = std::cos(2.0 * pi * hour / 24.0);
        }
        w.capacity = cap / norm.cap_ref;
        w.age = s.meta.age / norm.age_ref;
        w.target.resize(H);
        for (std::size_t t = 0; t < H; ++t) w.target[t] = s.power[start + L + t] / cap;
        out.push_back(std::move(w));
    }
    return out;
}

namespace detail {

inline std::vector<Eigen::MatrixXd> assemble_inputs(const std::vector<WindowSample>& windows,
                                                    std::span<const std::size_t> idx) {
    const std::size_t L = windows[idx[0]].lag_power.size();
    const auto batch = static_cast<Eigen::Index>(idx.size());
    std::vector<Eigen::MatrixXd> steps(L);
    for (std::size_t t = 0; t < L; ++t) {
        Eigen::MatrixXd x(batch, kInputDim);
        for (Eigen::Index b = 0; b < batch; ++b) {
            const auto& w = windows[idx[static_cast<std::size_t>(b)]];
            x(b, 0) = w.lag_power[t];
            x(b, 1) = w.wind[t];
            x(b, 2) = w.dir_sin[t];
            x(b, 3) = w.dir_cos[t];
            x(b, 4) = w.temp[t];
            x(b, 5) = w.hour_sin[t];
            x(b, 6) = w.hour_cos[t];
            x(b, 7) = w.capacity;
            x(b, 8) = w.age;
        }
        steps[t] = std::move(x);
    }
    return steps;
}

inline Eigen::MatrixXd assemble_targets(const std::vector<WindowSample>& windows,
                                        std::span<const std::size_t> idx) {
    const auto H = static_cast<Eigen::Index>(windows[idx[0]].target.size());
    Eigen::MatrixXd y(static_cast<Eigen::Index>(idx.size()), H);
    for (Eigen::Index b = 0; b < y.rows(); ++b)
        for (Eigen::Index t = 0; t < H; ++t)
            y(b, t) = windows[idx[static_cast<std::size_t>(b)]].target[static_cast<std::size_t>(t)];
    return y;
}

}  // namespace detail

inline Eigen::VectorXd forward(const ModelParams& p, const WindowSample& sample) {
    std::vector<WindowSample> one{sample};
    std::vector<std::size_t> idx{0};
    const auto y = lstm_mlp_forward(p, detail::assemble_inputs(one, idx));
    return y.row(0).transpose();
}

struct BackwardResult {
    double loss = 0.0;  // mean-squared error over batch and horizon
    ModelParams gradients;
};

inline BackwardResult backward(const ModelParams& p, const std::vector<WindowSample>& windows,
                               std::span<const std::size_t> batch_idx) {
    if (batch_idx.empty()) throw EmptyInput("empty batch");
    LstmCache cache;
    const auto y_pred = lstm_mlp_forward(p, detail::assemble_inputs(windows, batch_idx), &cache);
    const auto y_true = detail::assemble_targets(windows, batch_idx);
    const Eigen::MatrixXd err = y_pred - y_true;
    const double denom = static_cast<double>(err.rows() * err.cols());

    BackwardResult res;
    res.loss = err.squaredNorm() / denom;
    res.gradients = lstm_mlp_backward(p, cache, (2.0 / denom) * err);
    return res;
}

inline BackwardResult backward(const ModelParams& p, const std::vector<WindowSample>& windows) {
    std::vector<std::size_t> idx(windows.size());
    std::iota(idx.begin(), idx.end(), 0);
    return backward(p, windows, idx);
}

// Predictions for a window set, evaluated in bounded-size batches.
inline Eigen::MatrixXd predict_windows(const ModelParams& p,
                                       const std::vector<WindowSample>& windows,
                                       std::size_t batch_cap = 1024) {
    if (windows.empty()) return Eigen::MatrixXd(0, p.horizon);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(windows.size()), p.horizon);
    std::size_t pos = 0;
    while (pos < windows.size()) {
        const std::size_t take = std::min(batch_cap, windows.size() - pos);
        std::vector<std::size_t> idx(take);
        std::iota(idx.begin(), idx.end(), pos);
        out.middleRows(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(take)) =
            lstm_mlp_forward(p, detail::assemble_inputs(windows, idx));
        pos += take;
    }
    return out;
}

inline MetricsReport window_metrics(const ModelParams& p,
                                    const std::vector<WindowSample>& windows) {
    const auto y_pred = predict_windows(p, windows);
    std::vector<double> yt, yp;
    yt.reserve(windows.size() * static_cast<std::size_t>(p.horizon));
    yp.reserve(yt.capacity());
    for (std::size_t i = 0; i < windows.size(); ++i)
        for (Eigen::Index t = 0; t < p.horizon; ++t) {
            yt.push_back(windows[i].target[static_cast<std::size_t>(t)]);
            yp.push_back(y_pred(static_cast<Eigen::Index>(i), t));
        }
    return regression_metrics(yt, yp);
}

// ---------------------------------------------------------------------------
// Per-cluster federated training
// ---------------------------------------------------------------------------

enum class Optimizer { sgd, adam };

struct TrainHyper {
    std::size_t local_epochs = 1;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::size_t rounds = 30;  // T_pred
    int hidden_dim = 64;
    int mlp_dim = 32;
    Optimizer optimizer = Optimizer::adam;
    std::uint64_t seed = 42;

    void validate() const {
        if (local_epochs < 1 || batch_size < 1 || rounds < 1 || hidden_dim < 1 || mlp_dim < 1)
            throw InvalidParams("training hyperparameters must be positive");
        if (!(learning_rate >= 0.0) || learning_rate >= 1.0)
            throw InvalidParams("learning_rate must be in [0,1)");
    }
};

struct ClientDataset {
    std::string turbine_id;
    std::vector<WindowSample> train;
    std::vector<WindowSample> validation;

    std::size_t n_samples() const { return train.size(); }  // FedAvg weight
};

struct AdamState {
    std::vector<Eigen::ArrayXd> m, v;
    std::size_t step = 0;

    void init(const ModelParams& p) {
        for (const auto& t : p.tensors()) {
            m.push_back(Eigen::ArrayXd::Zero(t.size));
            v.push_back(Eigen::ArrayXd::Zero(t.size));
        }
    }
};

inline void apply_update(ModelParams& p, const ModelParams& g, const TrainHyper& hyper,
                         AdamState* adam) {
    auto pt = p.tensors();
    auto gt = g.tensors();
    if (hyper.optimizer == Optimizer::sgd || adam == nullptr) {
        for (std::size_t i = 0; i < pt.size(); ++i)
            Eigen::Map<Eigen::ArrayXd>(pt[i].data, pt[i].size) -=
                hyper.learning_rate * Eigen::Map<const Eigen::ArrayXd>(gt[i].data, gt[i].size);
        return;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++adam->step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam->step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam->step));
    for (std::size_t i = 0; i < pt.size(); ++i) {
        Eigen::Map<const Eigen::ArrayXd> grad(gt[i].data, gt[i].size);
        adam->m[i] = beta1 * adam->m[i] + (1.0 - beta1) * grad;
        adam->v[i] = beta2 * adam->v[i] + (1.0 - beta2) * grad.square();
        Eigen::Map<Eigen::ArrayXd>(pt[i].data, pt[i].size) -=
            hyper.learning_rate * (adam->m[i] / bc1) / ((adam->v[i] / bc2).sqrt() + eps);
    }
}

// Minibatch passes over the broadcast parameters. Batch membership comes from
// an epoch permutation; indices inside a batch are sorted so gradient sums
// have a fixed order.
inline ModelParams local_train(ModelParams params, const ClientDataset& client,
                               const TrainHyper& hyper, Rng& rng) {
    hyper.validate();
    if (client.train.empty()) return params;

    AdamState adam;
    if (hyper.optimizer == Optimizer::adam) adam.init(params);

    std::vector<std::size_t> perm(client.train.size());
    for (std::size_t epoch = 0; epoch < hyper.local_epochs; ++epoch) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::size_t pos = 0;
        while (pos < perm.size()) {
            const std::size_t take = std::min(hyper.batch_size, perm.size() - pos);
            std::vector<std::size_t> batch(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                                           perm.begin() + static_cast<std::ptrdiff_t>(pos + take));
            std::sort(batch.begin(), batch.end());
            const auto res = backward(params, client.train, batch);
            apply_update(params, res.gradients, hyper,
                         hyper.optimizer == Optimizer::adam ? &adam : nullptr);
            pos += take;
        }
    }
    return params;
}

inline ModelParams fedavg(const std::vector<std::pair<ModelParams, std::size_t>>& updates) {
    if (updates.empty()) throw EmptyInput("fedavg with no updates");
    std::size_t total = 0;
    for (const auto& [p, w] : updates) total += w;
    if (total == 0) throw InvalidParams("fedavg weights sum to zero");

    std::size_t contributors = 0, last = 0;
    for (std::size_t i = 0; i < updates.size(); ++i)
        if (updates[i].second > 0) {
            ++contributors;
            last = i;
        }
    if (contributors == 1) return updates[last].first;  // exact single-client identity

    ModelParams out = zeros_like(updates.front().first);
    auto ot = out.tensors();
    for (const auto& [p, w] : updates) {
        if (w == 0) continue;
        auto pt = p.tensors();
        if (pt.size() != ot.size()) throw DimensionMismatch("fedavg parameter shape mismatch");
        const double weight = static_cast<double>(w) / static_cast<double>(total);
        for (std::size_t i = 0; i < pt.size(); ++i) {
            if (pt[i].size != ot[i].size) throw DimensionMismatch("fedavg tensor size mismatch");
            Eigen::Map<Eigen::ArrayXd>(ot[i].data, ot[i].size) +=
                weight * Eigen::Map<const Eigen::ArrayXd>(pt[i].data, pt[i].size);
        }
    }
    return out;
}

struct RoundMetrics {
    std::size_t round = 0;
    MetricsReport train;
    MetricsReport validation;
};

struct ClusterTrainResult {
    ModelParams params;
    std::vector<RoundMetrics> history;
};

inline ClusterTrainResult train_cluster_fl(const std::vector<ClientDataset>& clients,
                                           const TrainHyper& hyper, std::uint64_t seed) {
    hyper.validate();
    if (clients.empty()) throw EmptyCluster("cluster has no clients");

    Rng init_rng = make_rng(seed, 0xf17);
    ModelParams global = init_params(kInputDim, hyper.hidden_dim, hyper.mlp_dim,
                                     static_cast<int>(kHorizon), init_rng);

    std::vector<WindowSample> pooled_train, pooled_val;
    for (const auto& c : clients) {
        pooled_train.insert(pooled_train.end(), c.train.begin(), c.train.end());
        pooled_val.insert(pooled_val.end(), c.validation.begin(), c.validation.end());
    }

    ClusterTrainResult out;
    for (std::size_t round = 1; round <= hyper.rounds; ++round) {
        std::vector<std::pair<ModelParams, std::size_t>> updates;
        updates.reserve(clients.size());
        for (const auto& client : clients) {
            // one stream per round, shared by all clients: identical clients
            // produce identical updates and the single-client case reduces to
            // plain local training
            Rng rng = make_rng(seed, 0x10ca1, round);
            updates.emplace_back(local_train(global, client, hyper, rng), client.n_samples());
        }
        global = fedavg(updates);

        RoundMetrics rm;
        rm.round = round;
        if (!pooled_train.empty()) rm.train = window_metrics(global, pooled_train);
        if (!pooled_val.empty()) rm.validation = window_metrics(global, pooled_val);
        out.history.push_back(rm);
    }
    out.params = std::move(global);
    return out;
}

// ---------------------------------------------------------------------------
// Rolling 24-hour trajectories
// ---------------------------------------------------------------------------

enum class ForecastMode { teacher_forced, recursive };

inline const char* to_string(ForecastMode m) {
    return m == ForecastMode::teacher_forced ? "teacher_forced" : "recursive";
}

struct ForecastTrajectory {
    std::string turbine_id;
    std::vector<std::int64_t> timestamps;
    std::vector<double> predicted_kw;
    std::vector<double> measured_kw;
    ForecastMode mode = ForecastMode::teacher_forced;
};

inline ForecastTrajectory rolling_forecast(const ModelParams& p, const NormalizationSpec& norm,
                                           const TurbineSeries& s, std::size_t start,
                                           std::size_t horizon = 24,
                                           ForecastMode mode = ForecastMode::teacher_forced) {
    using std::numbers::pi;
    const std::size_t L = kLagSteps;
    const std::size_t H = static_cast<std::size_t>(p.horizon);
    if (start < L) throw InsufficientHistory("need L steps of history before start");
    if (start + horizon > s.size())
        throw InsufficientHistory("series does not cover the forecast horizon");

    const double cap = s.meta.capacity_kw;
    // normalized power feed: measured history, then (recursive mode) clamped
    // predictions written back as they are produced
    std::vector<double> power_feed(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) power_feed[i] = s.power[i] / cap;

    ForecastTrajectory out;
    out.turbine_id = s.meta.id;
    out.mode = mode;

    for (std::size_t block = 0; block * H < horizon; ++block) {
        const std::size_t block_start = start + block * H;  // first predicted step
        const std::size_t ws = block_start - L;

        WindowSample w;
        w.lag_power.resize(L);
        w.wind.resize(L);
        w.dir_sin.resize(L);
        w.dir_cos.resize(L);
        w.temp.resize(L);
        w.hour_sin.resize(L);
        w.hour_cos.resize(L);
        for (std::size_t t = 0; t < L; ++t) {
            const std::size_t i = ws + t;
            const bool use_pred = (mode == ForecastMode::recursive) && i >= start;
            w.lag_power[t] = use_pred ? power_feed[i] : s.power[i] / cap;
            w.wind[t] = s.wind_speed[i] / norm.wind_max;
            const double rad = s.wind_dir[i] * pi / 180.0;
            w.dir_sin[t] = std::sin(rad);
            w.dir_cos[t] = std::cos(rad);
            w.temp[t] = norm.norm_temp(s.temperature[i]);
            const double hour = static_cast<double>(hour_of_day(s.timestamps[i]));
            w.hour_sin[t] = std::sin(2.0 * pi * hour / 24.0);
            w.hour_cos[t] = std::cos(2.0 * pi * hour / 24.0);
        }
        w.capacity = cap / norm.cap_ref;
        w.age = s.meta.age / norm.age_ref;
        w.target.assign(H, 0.0);

        const Eigen::VectorXd y = forward(p, w);
        for (std::size_t t = 0; t < H && block * H + t < horizon; ++t) {
            const std::size_t i = block_start + t;
            const double norm_clamped = std::clamp(y(static_cast<Eigen::Index>(t)), 0.0, 1.0);
            power_feed[i] = norm_clamped;
            out.timestamps.push_back(s.timestamps[i]);
            out.predicted_kw.push_back(norm_clamped * cap);
            out.measured_kw.push_back(s.power[i]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Uninformative-client filter (near-off / quasi-constant validation targets)
// ---------------------------------------------------------------------------

struct ClientFilterResult {
    std::vector<std::size_t> kept;
    std::vector<std::pair<std::size_t, std::string>> excluded;  // index, reason
};

inline ClientFilterResult filter_uninformative_clients(const std::vector<ClientDataset>& clients) {
    ClientFilterResult out;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        std::vector<double> y;
        for (const auto& w : clients[i].validation)
            y.insert(y.end(), w.target.begin(), w.target.end());
        if (y.empty()) {
            out.excluded.emplace_back(i, "no_validation_targets");
            continue;
        }
        const bool all_zero = std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; });
        const double y_max = *std::max_element(y.begin(), y.end());
        const double y_std = population_std(y);
        if (all_zero)
            out.excluded.emplace_back(i, "all_zero");
        else if (y_max < 0.1)
            out.excluded.emplace_back(i, "low_max");
        else if (y_std < 0.05)
            out.excluded.emplace_back(i, "low_std");
        else
            out.kept.push_back(i);
    }
    return out;
}

}  // namespace windfleet
