#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windfleet/common.hpp"
#include "windfleet/data.hpp"

namespace windfleet {

// ---------------------------------------------------------------------------
// Behaviour fingerprints: long-term level, variability, availability and
// short-term dynamics of one turbine's power series.
// ---------------------------------------------------------------------------

struct BehaviourFingerprint {
    double mean_power = 0.0;  // kW
    double std_power = 0.0;   // kW
    double cv = 0.0;
    double zero_ratio = 0.0;
    double ramp_mean = 0.0;  // kW/step
    double ramp_std = 0.0;   // kW/step

    std::array<double, 6> as_array() const {
        return {mean_power, std_power, cv, zero_ratio, ramp_mean, ramp_std};
    }
};

inline constexpr std::array<const char*, 6> kFingerprintColumns = {
    "mean_power", "std_power", "cv", "zero_ratio", "ramp_mean", "ramp_std"};
inline constexpr std::size_t kZeroRatioColumn = 3;

inline BehaviourFingerprint fingerprint(const TurbineSeries& series) {
    const std::size_t n = series.power.size();
    if (n < 2) throw SeriesTooShort("fingerprint needs at least 2 steps");

    BehaviourFingerprint fp;
    fp.mean_power = mean_of(series.power);
    fp.std_power = population_std(series.power);

    std::size_t zeros = 0;
    for (double p : series.power)
        if (p == 0.0) ++zeros;  // exact zeros only
    fp.zero_ratio = static_cast<double>(zeros) / static_cast<double>(n);

    std::vector<double> ramps(n - 1);
    for (std::size_t t = 0; t + 1 < n; ++t) ramps[t] = series.power[t + 1] - series.power[t];
    fp.ramp_mean = mean_of(ramps);
    fp.ramp_std = population_std(ramps);

    // cv guard: a near-zero mean with nonzero std must yield a huge cv, not a
    // division blow-up; a flat series yields cv = 0.
    const double eps_mean = 1e-6 * series.meta.capacity_kw;
    if (fp.mean_power > eps_mean) {
        fp.cv = fp.std_power / fp.mean_power;
    } else if (fp.std_power == 0.0) {
        fp.cv = 0.0;
    } else {
        fp.cv = std::min(fp.std_power / eps_mean, 1e6);
    }
    return fp;
}

// ---------------------------------------------------------------------------
// Population standardisation
// ---------------------------------------------------------------------------

struct ColumnScaler {
    std::vector<double> mean;          // per column
    std::vector<double> std;           // population std; 0 for degenerate columns
    std::vector<bool> degenerate;      // zero-variance columns (map to zeros)
    std::vector<bool> passthrough;     // columns kept raw (identity transform)
};

struct FeatureMatrix {
    Eigen::MatrixXd rows;  // N x d, standardized
    ColumnScaler scaler;

    Eigen::Index n() const { return rows.rows(); }
    Eigen::Index d() const { return rows.cols(); }
};

// standardize_zero_ratio=false keeps the zero_ratio column in raw fractions
// inside the clustering matrix; the default z-scores all six features.
inline FeatureMatrix standardise(const std::vector<BehaviourFingerprint>& fps,
                                 bool standardize_zero_ratio = true) {
    const std::size_t n = fps.size();
    if (n < 2) throw SeriesTooShort("standardise needs at least 2 fingerprints");
    const std::size_t d = 6;

    Eigen::MatrixXd raw(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        auto a = fps[i].as_array();
        for (std::size_t j = 0; j < d; ++j) raw(static_cast<Eigen::Index>(i),
                                                static_cast<Eigen::Index>(j)) = a[j];
    }

    FeatureMatrix out;
    out.rows.resize(raw.rows(), raw.cols());
    out.scaler.mean.resize(d);
    out.scaler.std.resize(d);
    out.scaler.degenerate.assign(d, false);
    out.scaler.passthrough.assign(d, false);

    for (std::size_t j = 0; j < d; ++j) {
        const auto col = raw.col(static_cast<Eigen::Index>(j));
        if (j == kZeroRatioColumn && !standardize_zero_ratio) {
            out.scaler.mean[j] = 0.0;
            out.scaler.std[j] = 1.0;
            out.scaler.passthrough[j] = true;
            out.rows.col(static_cast<Eigen::Index>(j)) = col;
            continue;
        }
        const double m = col.mean();
        // all-equal columns are degenerate by construction, not by tolerance
        const bool flat = (col.maxCoeff() == col.minCoeff());
        const double sd = flat ? 0.0 : std::sqrt((col.array() - m).square().mean());
        out.scaler.mean[j] = m;
        out.scaler.std[j] = sd;
        if (sd == 0.0) {
            out.scaler.degenerate[j] = true;
            out.rows.col(static_cast<Eigen::Index>(j)).setZero();
        } else {
            out.rows.col(static_cast<Eigen::Index>(j)) = (col.array() - m) / sd;
        }
    }
    return out;
}

inline Eigen::MatrixXd unstandardise(const FeatureMatrix& m) {
    Eigen::MatrixXd raw = m.rows;
    for (Eigen::Index j = 0; j < m.d(); ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (m.scaler.passthrough[ju]) continue;
        if (m.scaler.degenerate[ju])
            raw.col(j).setConstant(m.scaler.mean[ju]);
        else
            raw.col(j) = raw.col(j) * m.scaler.std[ju] + Eigen::VectorXd::Constant(m.n(), m.scaler.mean[ju]);
    }
    return raw;
}

// ---------------------------------------------------------------------------
// Cluster profiles (per-cluster feature means/stds; zero_ratio reported raw)
// ---------------------------------------------------------------------------

struct ClusterProfileRow {
    int cluster = 0;
    std::size_t count = 0;
    std::array<double, 6> mean{};  // standardized space except zero_ratio (raw)
    std::array<double, 6> stddev{};
};

struct ClusterProfile {
    std::vector<ClusterProfileRow> rows;
};

inline ClusterProfile cluster_profile(const FeatureMatrix& matrix,
                                      const std::vector<int>& labels,
                                      const std::vector<double>& zero_ratios) {
    const auto n = static_cast<std::size_t>(matrix.n());
    if (labels.size() != n) throw LengthMismatch("labels length != matrix rows");
    if (zero_ratios.size() != n) throw LengthMismatch("zero_ratios length != matrix rows");

    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);

    ClusterProfile profile;
    for (int c = 0; c < k; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == c) members.push_back(i);
        if (members.empty()) continue;

        ClusterProfileRow row;
        row.cluster = c;
        row.count = members.size();
        for (std::size_t j = 0; j < 6; ++j) {
            std::vector<double> vals(members.size());
            for (std::size_t m = 0; m < members.size(); ++m)
                vals[m] = (j == kZeroRatioColumn)
                              ? zero_ratios[members[m]]
                              : matrix.rows(static_cast<Eigen::Index>(members[m]),
                                            static_cast<Eigen::Index>(j));
            row.mean[j] = mean_of(vals);
            row.stddev[j] = population_std(vals);
        }
        profile.rows.push_back(row);
    }
    return profile;
}

}  // namespace windfleet
