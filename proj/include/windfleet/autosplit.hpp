#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "windfleet/common.hpp"
#include "windfleet/fedkmeans.hpp"

namespace windfleet {

// ---------------------------------------------------------------------------
// Silhouette score (Euclidean distance, singleton clusters contribute 0)
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& matrix) {
    const Eigen::Index n = matrix.rows();
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = (matrix.row(i) - matrix.row(j)).norm();
            dist(i, j) = d;
            dist(j, i) = d;
        }
    return dist;
}

inline double silhouette_from_distances(const Eigen::MatrixXd& dist,
                                        const std::vector<int>& labels) {
    const auto n = static_cast<std::size_t>(dist.rows());
    if (labels.size() != n) throw LengthMismatch("labels length != distance rows");

    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    int distinct = 0;
    for (auto s : sizes)
        if (s > 0) ++distinct;
    if (distinct < 2) throw SingleCluster("silhouette needs >= 2 distinct labels");

    // per-point sums of distances to each cluster, one O(n^2) pass
    Eigen::MatrixXd cluster_dist = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            cluster_dist(static_cast<Eigen::Index>(i), labels[j]) += d;
            cluster_dist(static_cast<Eigen::Index>(j), labels[i]) += d;
        }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto li = static_cast<std::size_t>(labels[i]);
        if (sizes[li] <= 1) continue;  // singleton convention: s = 0
        const double a = cluster_dist(static_cast<Eigen::Index>(i), labels[i]) /
                         static_cast<double>(sizes[li] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == labels[i] || sizes[static_cast<std::size_t>(c)] == 0) continue;
            b = std::min(b, cluster_dist(static_cast<Eigen::Index>(i), c) /
                                static_cast<double>(sizes[static_cast<std::size_t>(c)]));
        }
        const double m = std::max(a, b);
        total += (m > 0.0) ? (b - a) / m : 0.0;
    }
    return total / static_cast<double>(n);
}

inline double silhouette(const Eigen::MatrixXd& matrix, const std::vector<int>& labels) {
    if (labels.size() != static_cast<std::size_t>(matrix.rows()))
        throw LengthMismatch("labels length != matrix rows");
    return silhouette_from_distances(pairwise_distances(matrix), labels);
}

// ---------------------------------------------------------------------------
// Per-node grid search over federated hyperparameters
// ---------------------------------------------------------------------------

struct SplitThresholds {
    double tau_sil = 0.45;   // accept split when best silhouette reaches this
    double tau_min = 0.3;    // nodes at or below this share of N become outlier leaves
    double tau_large = 0.7;  // nodes above this share of N are force-split

    void validate() const {
        if (!(tau_min > 0.0) || !(tau_min < tau_large) || !(tau_large < 1.0))
            throw InvalidParams("need 0 < tau_min < tau_large < 1");
        if (tau_sil < -1.0 || tau_sil > 1.0) throw InvalidParams("tau_sil outside [-1,1]");
    }
};

struct ParamGrid {
    std::size_t n_lo = 3, n_hi = 9;
    std::size_t k_lo = 3, k_hi = 10;
    std::size_t c_lo = 3, c_hi = 10;

    void validate() const {
        if (n_lo < 1 || k_lo < 1 || c_lo < 1 || n_hi < n_lo || k_hi < k_lo || c_hi < c_lo)
            throw InvalidParams("bad parameter grid");
    }
};

struct GridChoice {
    std::size_t n = 0, k = 0, c = 0;
};

struct GridResult {
    double score = 0.0;
    std::vector<int> labels;
    GridChoice params;
};

// Runs federated K-means for every (n,k,c); keeps the silhouette argmax with
// ties going to the lexicographically smallest triple. Configurations that
// collapse to a single label are skipped.
inline std::optional<GridResult> grid_search(const Eigen::MatrixXd& matrix, const ParamGrid& grid,
                                             std::uint64_t seed, InitMethod init = InitMethod::drs) {
    grid.validate();
    const auto n_rows = static_cast<std::size_t>(matrix.rows());
    if (n_rows < 2) return std::nullopt;

    const Eigen::MatrixXd dist = pairwise_distances(matrix);  // shared across the grid
    std::optional<GridResult> best;
    for (std::size_t n = grid.n_lo; n <= grid.n_hi; ++n)
        for (std::size_t k = grid.k_lo; k <= grid.k_hi; ++k)
            for (std::size_t c = grid.c_lo; c <= grid.c_hi; ++c) {
                FedKMeansConfig cfg;
                cfg.n_clients = std::min(n, n_rows);
                cfg.k_global = std::min(k, n_rows);
                cfg.c_rounds = c;
                cfg.init = init;
                Rng rng = make_rng(seed, n, k, c);
                const auto res = federated_kmeans(matrix, cfg, rng);

                int distinct = 0;
                std::vector<bool> seen(cfg.k_global, false);
                for (int l : res.labels)
                    if (!seen[static_cast<std::size_t>(l)]) {
                        seen[static_cast<std::size_t>(l)] = true;
                        ++distinct;
                    }
                if (distinct < 2) continue;

                const double s = silhouette_from_distances(dist, res.labels);
                if (!best || s > best->score)
                    best = GridResult{s, res.labels, GridChoice{n, k, c}};
            }
    return best;
}

// ---------------------------------------------------------------------------
// Recursive Auto-split (BFS)
// ---------------------------------------------------------------------------

struct ClusterNode {
    std::size_t node_id = 0;
    long parent = -1;
    std::vector<std::size_t> row_indices;
    std::vector<std::size_t> children;
    bool is_leaf = false;
    bool is_outlier_leaf = false;
    std::optional<double> best_silhouette;
    std::optional<GridChoice> chosen_params;
    bool forced = false;
};

struct ClusterTree {
    std::vector<ClusterNode> nodes;
    std::size_t root_id = 0;
    std::size_t total_n = 0;
};

inline ClusterTree auto_split(const Eigen::MatrixXd& matrix, const ParamGrid& grid,
                              const SplitThresholds& thresholds, std::uint64_t seed,
                              InitMethod init = InitMethod::drs, AuditLog* audit = nullptr) {
    thresholds.validate();
    grid.validate();
    const auto n = static_cast<std::size_t>(matrix.rows());
    if (n < 1) throw EmptyInput("auto_split needs at least one row");

    ClusterTree tree;
    tree.total_n = n;
    tree.root_id = 0;
    {
        ClusterNode root;
        root.node_id = 0;
        root.row_indices.resize(n);
        std::iota(root.row_indices.begin(), root.row_indices.end(), 0);
        tree.nodes.push_back(std::move(root));
    }

    const double min_size = thresholds.tau_min * static_cast<double>(n);
    const double large_size = thresholds.tau_large * static_cast<double>(n);

    std::deque<std::size_t> queue{0};
    while (!queue.empty()) {
        const std::size_t id = queue.front();
        queue.pop_front();
        auto size_of = [&](std::size_t nid) {
            return static_cast<double>(tree.nodes[nid].row_indices.size());
        };

        if (size_of(id) <= min_size) {
            tree.nodes[id].is_leaf = true;
            tree.nodes[id].is_outlier_leaf = true;
            continue;
        }

        // copy: pushing children below reallocates tree.nodes
        const std::vector<std::size_t> rows = tree.nodes[id].row_indices;
        Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), matrix.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            sub.row(static_cast<Eigen::Index>(i)) =
                matrix.row(static_cast<Eigen::Index>(rows[i]));

        // per-node stream: tree shape independent of processing order
        const std::uint64_t node_seed = derive_seed(seed, 0x5e1f, id);
        const auto best = grid_search(sub, grid, node_seed, init);
        if (best) tree.nodes[id].best_silhouette = best->score;

        const bool split =
            best && (best->score >= thresholds.tau_sil || size_of(id) > large_size);
        if (!split) {
            tree.nodes[id].is_leaf = true;
            continue;
        }
        tree.nodes[id].forced = best->score < thresholds.tau_sil;
        tree.nodes[id].chosen_params = best->params;

        if (audit) {
            // replay the accepted configuration so the boundary-crossing log
            // covers every accepted split (grid probing is not retained)
            FedKMeansConfig cfg;
            cfg.n_clients = std::min(best->params.n, rows.size());
            cfg.k_global = std::min(best->params.k, rows.size());
            cfg.c_rounds = best->params.c;
            cfg.init = init;
            Rng rng = make_rng(node_seed, best->params.n, best->params.k, best->params.c);
            federated_kmeans(sub, cfg, rng, audit);
        }

        int k_used = 0;
        for (int l : best->labels) k_used = std::max(k_used, l + 1);
        for (int label = 0; label < k_used; ++label) {
            std::vector<std::size_t> child_rows;
            for (std::size_t i = 0; i < rows.size(); ++i)
                if (best->labels[i] == label) child_rows.push_back(rows[i]);
            if (child_rows.empty()) continue;

            ClusterNode child;
            child.node_id = tree.nodes.size();
            child.parent = static_cast<long>(id);
            child.row_indices = std::move(child_rows);
            tree.nodes[id].children.push_back(child.node_id);
            const bool enqueue = static_cast<double>(child.row_indices.size()) > min_size;
            if (!enqueue) {
                child.is_leaf = true;
                child.is_outlier_leaf = true;
            }
            tree.nodes.push_back(std::move(child));
            if (enqueue) queue.push_back(tree.nodes.back().node_id);
        }
    }
    return tree;
}

// Dense leaf-cluster ids in BFS discovery order plus an outlier-leaf mask.
struct LeafLabels {
    std::vector<int> cluster;   // per row of the original matrix
    std::vector<bool> outlier;  // per row
    std::size_t n_leaves = 0;
    std::vector<std::size_t> leaf_nodes;  // node_id per dense cluster id
};

inline LeafLabels leaf_labels(const ClusterTree& tree) {
    LeafLabels out;
    out.cluster.assign(tree.total_n, -1);
    out.outlier.assign(tree.total_n, false);
    for (const auto& node : tree.nodes) {  // node_id order == discovery order
        if (!node.is_leaf) continue;
        const int cid = static_cast<int>(out.n_leaves++);
        out.leaf_nodes.push_back(node.node_id);
        for (std::size_t row : node.row_indices) {
            out.cluster[row] = cid;
            out.outlier[row] = node.is_outlier_leaf;
        }
    }
    return out;
}

}  // namespace windfleet
