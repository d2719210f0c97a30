#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windfleet/autosplit.hpp"
#include "windfleet/common.hpp"
#include "windfleet/data.hpp"
#include "windfleet/fedkmeans.hpp"
#include "windfleet/metrics.hpp"

namespace windfleet {

struct GroupingResult {
    std::string method;
    std::vector<int> labels;  // dense in 0..k-1
    std::size_t k = 0;
    double quality = std::numeric_limits<double>::quiet_NaN();  // silhouette in its own space
};

inline std::vector<int> densify_labels(const std::vector<int>& labels, std::size_t* k_out) {
    std::vector<int> remap;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int l = labels[i];
        auto it = std::find(remap.begin(), remap.end(), l);
        if (it == remap.end()) {
            remap.push_back(l);
            out[i] = static_cast<int>(remap.size() - 1);
        } else {
            out[i] = static_cast<int>(it - remap.begin());
        }
    }
    if (k_out) *k_out = remap.size();
    return out;
}

// ---------------------------------------------------------------------------
// Geographic grouping: centralized k-means++/Lloyd on standardized (x, y)
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<int> best_of_restarts(const Eigen::MatrixXd& pts, std::size_t k,
                                         std::uint64_t seed, std::size_t restarts = 10,
                                         std::size_t iters = 100) {
    std::vector<int> best_labels;
    double best_inertia = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < restarts; ++r) {
        Rng rng = make_rng(seed, 0x6e0, r);
        auto [labels, centres] = centralized_lloyd(pts, kmeanspp_init(pts, k, rng), iters);
        const double inertia = inertia_of(pts, centres);
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_labels = std::move(labels);
        }
    }
    return best_labels;
}

}  // namespace detail

inline GroupingResult geo_grouping(const std::vector<TurbineMeta>& metas,
                                   std::optional<std::size_t> k, std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(metas.size());
    if (n == 0) throw EmptyInput("no turbines");
    Eigen::MatrixXd pts(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        pts(i, 0) = metas[static_cast<std::size_t>(i)].utm_x;
        pts(i, 1) = metas[static_cast<std::size_t>(i)].utm_y;
    }
    for (Eigen::Index j = 0; j < 2; ++j) {
        const double m = pts.col(j).mean();
        const bool flat = pts.col(j).maxCoeff() == pts.col(j).minCoeff();
        const double sd = flat ? 0.0 : std::sqrt((pts.col(j).array() - m).square().mean());
        if (sd == 0.0)
            pts.col(j).setZero();
        else
            pts.col(j) = (pts.col(j).array() - m) / sd;
    }

    GroupingResult out;
    out.method = k ? "geo_fixed" : "geo_auto";

    const bool degenerate = (pts.maxCoeff() == pts.minCoeff()) || n == 1;
    if (degenerate) {
        out.labels.assign(static_cast<std::size_t>(n), 0);
        out.k = 1;
        return out;
    }

    if (k) {
        const auto kk = std::min<std::size_t>(*k, static_cast<std::size_t>(n));
        auto labels = detail::best_of_restarts(pts, kk, derive_seed(seed, kk));
        out.labels = densify_labels(labels, &out.k);
        if (out.k >= 2) out.quality = silhouette(pts, out.labels);
        return out;
    }

    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t kk = 2; kk <= std::min<std::size_t>(10, static_cast<std::size_t>(n)); ++kk) {
        auto labels = detail::best_of_restarts(pts, kk, derive_seed(seed, kk));
        std::size_t distinct = 0;
        auto dense = densify_labels(labels, &distinct);
        if (distinct < 2) continue;
        const double s = silhouette(pts, dense);
        if (s > best_score) {
            best_score = s;
            out.labels = std::move(dense);
            out.k = distinct;
            out.quality = s;
        }
    }
    if (out.labels.empty()) {  // nothing separable
        out.labels.assign(static_cast<std::size_t>(n), 0);
        out.k = 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Flat (non-recursive) federated K-means in behaviour space
// ---------------------------------------------------------------------------

inline GroupingResult flat_fed_kmeans_grouping(const Eigen::MatrixXd& matrix, std::size_t k,
                                               const FedKMeansConfig& base_config,
                                               AuditLog* audit = nullptr,
                                               CentroidSet* centres_out = nullptr) {
    FedKMeansConfig cfg = base_config;
    cfg.k_global = std::min<std::size_t>(k, static_cast<std::size_t>(matrix.rows()));
    cfg.n_clients = std::min<std::size_t>(cfg.n_clients, static_cast<std::size_t>(matrix.rows()));
    Rng rng = make_rng(cfg.seed, 0xf1a7);
    const auto res = federated_kmeans(matrix, cfg, rng, audit);
    if (centres_out) *centres_out = res.centres;

    GroupingResult out;
    out.method = "flat_fed_k";
    out.labels = densify_labels(res.labels, &out.k);
    if (out.k >= 2) out.quality = silhouette(matrix, out.labels);
    return out;
}

// ---------------------------------------------------------------------------
// PCA projection for cluster visualization
// ---------------------------------------------------------------------------

struct PcaResult {
    Eigen::MatrixXd projected;                    // n x dims
    Eigen::MatrixXd components;                   // d x dims, orthonormal columns
    std::vector<double> explained_variance_ratio; // per retained component
    std::vector<double> eigenvalues;              // all d, descending
};

inline PcaResult pca_project(const Eigen::MatrixXd& matrix, std::size_t dims = 3) {
    const auto d = static_cast<std::size_t>(matrix.cols());
    if (dims > d) throw DimsTooLarge("dims exceeds feature count");
    if (matrix.rows() < 1) throw EmptyInput("empty matrix");

    Eigen::RowVectorXd mean = matrix.colwise().mean();
    Eigen::MatrixXd centered = matrix.rowwise() - mean;
    Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(matrix.rows());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw Error("eigendecomposition failed");

    PcaResult out;
    out.eigenvalues.resize(d);
    Eigen::MatrixXd vecs(d, d);
    for (std::size_t j = 0; j < d; ++j) {  // descending order
        const auto src = static_cast<Eigen::Index>(d - 1 - j);
        out.eigenvalues[j] = std::max(0.0, es.eigenvalues()(src));
        vecs.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(src);
    }
    // sign convention: the largest-magnitude loading of each component is positive
    for (std::size_t j = 0; j < d; ++j) {
        Eigen::Index arg = 0;
        vecs.col(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff(&arg);
        if (vecs(arg, static_cast<Eigen::Index>(j)) < 0.0)
            vecs.col(static_cast<Eigen::Index>(j)) *= -1.0;
    }

    double total = 0.0;
    for (double ev : out.eigenvalues) total += ev;
    out.components = vecs.leftCols(static_cast<Eigen::Index>(dims));
    out.projected = centered * out.components;
    out.explained_variance_ratio.resize(dims);
    for (std::size_t j = 0; j < dims; ++j)
        out.explained_variance_ratio[j] = (total > 0.0) ? out.eigenvalues[j] / total : 0.0;
    return out;
}

}  // namespace windfleet
