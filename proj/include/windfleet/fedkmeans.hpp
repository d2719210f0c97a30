#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windfleet/common.hpp"

namespace windfleet {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct ClientShard {
    std::size_t client_id = 0;
    std::vector<std::size_t> row_indices;  // ascending, disjoint across shards
};

struct CentroidSet {
    Eigen::MatrixXd centres;  // k x d

    Eigen::Index k() const { return centres.rows(); }
    Eigen::Index d() const { return centres.cols(); }
};

struct LocalUpdate {
    std::size_t client_id = 0;
    Eigen::MatrixXd local_centroids;  // k x d; row meaningful only when count > 0
    std::vector<std::size_t> counts;  // per cluster; 0 marks the centroid absent
};

enum class InitMethod { drs, kmeanspp };

struct FedKMeansConfig {
    std::size_t n_clients = 3;
    std::size_t k_global = 3;
    std::size_t c_rounds = 3;
    std::uint64_t seed = 42;
    InitMethod init = InitMethod::drs;
};

// Every value that crosses the client boundary is recorded here. Allowed
// kinds: per-client distance scalars, selected centre rows, local centroids,
// local counts. Raw non-selected rows must never appear.
struct AuditRecord {
    int round = 0;  // 0 = initialisation phase, 1..c = communication rounds
    long client_id = -1;
    std::string kind;
    std::vector<double> payload;
};

struct AuditLog {
    std::vector<AuditRecord> records;

    void log(int round, long client_id, std::string kind, std::vector<double> payload) {
        records.push_back({round, client_id, std::move(kind), std::move(payload)});
    }
};

// ---------------------------------------------------------------------------
// Client partitioning
// ---------------------------------------------------------------------------

inline std::vector<ClientShard> partition_clients(const Eigen::MatrixXd& matrix,
                                                  std::size_t n_clients, Rng& rng) {
    const auto n = static_cast<std::size_t>(matrix.rows());
    if (n_clients < 1) throw InvalidParams("n_clients must be >= 1");
    if (n_clients > n) throw TooManyClients("n_clients exceeds row count");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<ClientShard> shards(n_clients);
    const std::size_t base = n / n_clients;
    const std::size_t extra = n % n_clients;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < n_clients; ++c) {
        const std::size_t sz = base + (c < extra ? 1 : 0);
        shards[c].client_id = c;
        shards[c].row_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                                     perm.begin() + static_cast<std::ptrdiff_t>(pos + sz));
        std::sort(shards[c].row_indices.begin(), shards[c].row_indices.end());
        pos += sz;
    }
    return shards;
}

// ---------------------------------------------------------------------------
// Assignment helpers (ties break to the lowest centre index)
// ---------------------------------------------------------------------------

inline std::pair<Eigen::Index, double> nearest_centre(const Eigen::RowVectorXd& x,
                                                      const Eigen::MatrixXd& centres) {
    Eigen::Index best = 0;
    double best_d = (x - centres.row(0)).squaredNorm();
    for (Eigen::Index c = 1; c < centres.rows(); ++c) {
        const double d = (x - centres.row(c)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return {best, best_d};
}

inline std::vector<int> assign_all(const Eigen::MatrixXd& matrix, const CentroidSet& centres,
                                   double* inertia_out = nullptr) {
    std::vector<int> labels(static_cast<std::size_t>(matrix.rows()));
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        auto [c, d] = nearest_centre(matrix.row(i), centres.centres);
        labels[static_cast<std::size_t>(i)] = static_cast<int>(c);
        inertia += d;
    }
    if (inertia_out) *inertia_out = inertia;
    return labels;
}

// ---------------------------------------------------------------------------
// Double Roulette Selection initialisation
// ---------------------------------------------------------------------------

namespace detail {

// Roulette pick over non-negative weights via one uniform draw; assumes a
// strictly positive total.
inline std::size_t roulette(const std::vector<double>& weights, double total, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.size() - 1;  // u landed on the total due to rounding
}

}  // namespace detail

// Selects k distinct data rows. Only per-client totals D_p and the selected
// rows cross the client boundary; both are recorded in the audit log.
inline std::vector<std::size_t> drs_select_rows(const std::vector<ClientShard>& shards,
                                                const Eigen::MatrixXd& matrix, std::size_t k,
                                                Rng& rng, AuditLog* audit = nullptr) {
    const auto n = static_cast<std::size_t>(matrix.rows());
    if (k > n) throw InvalidParams("k exceeds row count");

    std::vector<std::size_t> chosen;
    std::vector<bool> is_chosen(n, false);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());

    auto record_selected = [&](long client, std::size_t row) {
        chosen.push_back(row);
        is_chosen[row] = true;
        for (std::size_t i = 0; i < n; ++i) {
            const double d =
                (matrix.row(static_cast<Eigen::Index>(i)) - matrix.row(static_cast<Eigen::Index>(row)))
                    .squaredNorm();
            min_d2[i] = std::min(min_d2[i], d);
        }
        if (audit) {
            const auto r = matrix.row(static_cast<Eigen::Index>(row));
            audit->log(0, client, "selected_centre", std::vector<double>(r.begin(), r.end()));
        }
    };

    // first centre: one uniform sample over all clients' data
    {
        std::uniform_int_distribution<std::size_t> uni(0, n - 1);
        const std::size_t row = uni(rng);
        long owner = -1;
        for (const auto& s : shards)
            if (std::binary_search(s.row_indices.begin(), s.row_indices.end(), row))
                owner = static_cast<long>(s.client_id);
        record_selected(owner, row);
    }

    while (chosen.size() < k) {
        // first-level roulette: clients weighted by total squared distance
        std::vector<double> client_d(shards.size(), 0.0);
        double total = 0.0;
        for (std::size_t c = 0; c < shards.size(); ++c) {
            for (std::size_t row : shards[c].row_indices) client_d[c] += min_d2[row];
            total += client_d[c];
            if (audit)
                audit->log(0, static_cast<long>(shards[c].client_id), "client_total_d2",
                           {client_d[c]});
        }

        if (total <= 0.0) {
            // all remaining points coincide with chosen centres; fall back to a
            // uniform pick among unchosen rows
            std::vector<std::size_t> remaining;
            for (std::size_t i = 0; i < n; ++i)
                if (!is_chosen[i]) remaining.push_back(i);
            std::uniform_int_distribution<std::size_t> uni(0, remaining.size() - 1);
            const std::size_t row = remaining[uni(rng)];
            long owner = -1;
            for (const auto& s : shards)
                if (std::binary_search(s.row_indices.begin(), s.row_indices.end(), row))
                    owner = static_cast<long>(s.client_id);
            record_selected(owner, row);
            continue;
        }

        const std::size_t c = detail::roulette(client_d, total, rng);

        // second-level roulette: the chosen client's points weighted by min d^2
        const auto& shard = shards[c];
        std::vector<double> point_w(shard.row_indices.size());
        double local_total = 0.0;
        for (std::size_t i = 0; i < shard.row_indices.size(); ++i) {
            point_w[i] = min_d2[shard.row_indices[i]];
            local_total += point_w[i];
        }
        const std::size_t pick = detail::roulette(point_w, local_total, rng);
        record_selected(static_cast<long>(shard.client_id), shard.row_indices[pick]);
    }
    return chosen;
}

inline CentroidSet drs_init(const std::vector<ClientShard>& shards, const Eigen::MatrixXd& matrix,
                            std::size_t k, Rng& rng, AuditLog* audit = nullptr) {
    const auto rows = drs_select_rows(shards, matrix, k, rng, audit);
    CentroidSet cs;
    cs.centres.resize(static_cast<Eigen::Index>(k), matrix.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        cs.centres.row(static_cast<Eigen::Index>(i)) = matrix.row(static_cast<Eigen::Index>(rows[i]));
    return cs;
}

// ---------------------------------------------------------------------------
// Local updates and weighted aggregation
// ---------------------------------------------------------------------------

inline LocalUpdate local_lloyd_step(const ClientShard& shard, const Eigen::MatrixXd& matrix,
                                    const CentroidSet& centres, AuditLog* audit = nullptr,
                                    int round = 0) {
    const Eigen::Index k = centres.k();
    LocalUpdate up;
    up.client_id = shard.client_id;
    up.local_centroids = Eigen::MatrixXd::Zero(k, centres.d());
    up.counts.assign(static_cast<std::size_t>(k), 0);

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, centres.d());
    for (std::size_t row : shard.row_indices) {  // ascending: fixed summation order
        auto [c, d] = nearest_centre(matrix.row(static_cast<Eigen::Index>(row)), centres.centres);
        sums.row(c) += matrix.row(static_cast<Eigen::Index>(row));
        ++up.counts[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        const auto cnt = up.counts[static_cast<std::size_t>(c)];
        if (cnt > 0) up.local_centroids.row(c) = sums.row(c) / static_cast<double>(cnt);
    }
    if (audit) {
        for (Eigen::Index c = 0; c < k; ++c)
            if (up.counts[static_cast<std::size_t>(c)] > 0) {
                const auto r = up.local_centroids.row(c);
                audit->log(round, static_cast<long>(shard.client_id), "local_centroid",
                           std::vector<double>(r.begin(), r.end()));
            }
        audit->log(round, static_cast<long>(shard.client_id), "local_counts",
                   std::vector<double>(up.counts.begin(), up.counts.end()));
    }
    return up;
}

inline CentroidSet aggregate_centroids(const std::vector<LocalUpdate>& updates,
                                       const CentroidSet& previous) {
    const Eigen::Index k = previous.k();
    const Eigen::Index d = previous.d();
    for (const auto& up : updates)
        if (up.local_centroids.rows() != k || up.local_centroids.cols() != d ||
            up.counts.size() != static_cast<std::size_t>(k))
            throw DimensionMismatch("local update shape differs from previous centres");

    // fixed client order keeps floating-point sums scheduling-independent
    std::vector<const LocalUpdate*> ordered;
    for (const auto& up : updates) ordered.push_back(&up);
    std::sort(ordered.begin(), ordered.end(),
              [](const LocalUpdate* a, const LocalUpdate* b) { return a->client_id < b->client_id; });

    CentroidSet out;
    out.centres = previous.centres;
    for (Eigen::Index c = 0; c < k; ++c) {
        std::size_t total = 0;
        const LocalUpdate* sole = nullptr;
        for (const auto* up : ordered) {
            const auto cnt = up->counts[static_cast<std::size_t>(c)];
            if (cnt > 0) {
                sole = (total == 0) ? up : nullptr;
                total += cnt;
            }
        }
        if (total == 0) continue;  // empty cluster keeps its previous centre
        if (sole) {
            // a single contributor's weighted mean is exactly its centroid
            out.centres.row(c) = sole->local_centroids.row(c);
            continue;
        }
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
        for (const auto* up : ordered) {
            const auto cnt = up->counts[static_cast<std::size_t>(c)];
            if (cnt > 0) acc += static_cast<double>(cnt) * up->local_centroids.row(c);
        }
        out.centres.row(c) = acc / static_cast<double>(total);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Federated K-means driver
// ---------------------------------------------------------------------------

struct FedKMeansResult {
    std::vector<int> labels;
    CentroidSet centres;
    double inertia = 0.0;
};

inline CentroidSet federated_rounds(const Eigen::MatrixXd& matrix,
                                    const std::vector<ClientShard>& shards, CentroidSet centres,
                                    std::size_t c_rounds, AuditLog* audit = nullptr) {
    for (std::size_t r = 1; r <= c_rounds; ++r) {
        std::vector<LocalUpdate> updates;
        updates.reserve(shards.size());
        for (const auto& shard : shards)
            updates.push_back(local_lloyd_step(shard, matrix, centres, audit, static_cast<int>(r)));
        centres = aggregate_centroids(updates, centres);
    }
    return centres;
}

inline CentroidSet kmeanspp_init(const Eigen::MatrixXd& matrix, std::size_t k, Rng& rng) {
    const auto n = static_cast<std::size_t>(matrix.rows());
    if (k > n) throw InvalidParams("k exceeds row count");

    std::vector<std::size_t> chosen;
    std::vector<bool> is_chosen(n, false);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    auto add = [&](std::size_t row) {
        chosen.push_back(row);
        is_chosen[row] = true;
        for (std::size_t i = 0; i < n; ++i)
            min_d2[i] = std::min(min_d2[i], (matrix.row(static_cast<Eigen::Index>(i)) -
                                             matrix.row(static_cast<Eigen::Index>(row)))
                                                .squaredNorm());
    };

    std::uniform_int_distribution<std::size_t> uni(0, n - 1);
    add(uni(rng));
    while (chosen.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += min_d2[i];
        if (total <= 0.0) {
            std::vector<std::size_t> remaining;
            for (std::size_t i = 0; i < n; ++i)
                if (!is_chosen[i]) remaining.push_back(i);
            std::uniform_int_distribution<std::size_t> u2(0, remaining.size() - 1);
            add(remaining[u2(rng)]);
            continue;
        }
        add(detail::roulette(min_d2, total, rng));
    }

    CentroidSet cs;
    cs.centres.resize(static_cast<Eigen::Index>(k), matrix.cols());
    for (std::size_t i = 0; i < chosen.size(); ++i)
        cs.centres.row(static_cast<Eigen::Index>(i)) =
            matrix.row(static_cast<Eigen::Index>(chosen[i]));
    return cs;
}

// Direct Lloyd iterations; the independent oracle for the federated path and
// the backbone of the centralized baselines. Same tie and empty-cluster rules.
inline std::pair<std::vector<int>, CentroidSet> centralized_lloyd(const Eigen::MatrixXd& matrix,
                                                                  CentroidSet centres,
                                                                  std::size_t iters) {
    const Eigen::Index k = centres.k();
    for (std::size_t it = 0; it < iters; ++it) {
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, centres.d());
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
            auto [c, d] = nearest_centre(matrix.row(i), centres.centres);
            sums.row(c) += matrix.row(i);
            ++counts[static_cast<std::size_t>(c)];
        }
        for (Eigen::Index c = 0; c < k; ++c)
            if (counts[static_cast<std::size_t>(c)] > 0)
                centres.centres.row(c) =
                    sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    return {assign_all(matrix, centres), centres};
}

inline FedKMeansResult federated_kmeans(const Eigen::MatrixXd& matrix,
                                        const FedKMeansConfig& config, Rng& rng,
                                        AuditLog* audit = nullptr) {
    if (config.k_global < 1 || config.c_rounds < 1) throw InvalidParams("k and c must be >= 1");
    if (static_cast<Eigen::Index>(config.k_global) > matrix.rows())
        throw InvalidParams("k exceeds row count");

    auto shards = partition_clients(matrix, config.n_clients, rng);
    CentroidSet init = (config.init == InitMethod::drs)
                           ? drs_init(shards, matrix, config.k_global, rng, audit)
                           : kmeanspp_init(matrix, config.k_global, rng);
    CentroidSet centres = federated_rounds(matrix, shards, std::move(init), config.c_rounds, audit);

    FedKMeansResult res;
    res.centres = std::move(centres);
    res.labels = assign_all(matrix, res.centres, &res.inertia);
    return res;
}

inline double inertia_of(const Eigen::MatrixXd& matrix, const CentroidSet& centres) {
    double inertia = 0.0;
    assign_all(matrix, centres, &inertia);
    return inertia;
}

}  // namespace windfleet
