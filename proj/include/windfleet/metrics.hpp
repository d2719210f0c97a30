#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "windfleet/common.hpp"

namespace windfleet {

// R^2 on a zero-variance target is undefined; we cap it at a documented
// sentinel and flag the report instead of producing -inf.
inline constexpr double kDegenerateR2 = -1e18;

struct MetricsReport {
    double mse = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    double r2 = 0.0;
    std::size_t n_points = 0;
    bool degenerate_target = false;
};

inline MetricsReport regression_metrics(std::span<const double> y_true,
                                        std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) throw LengthMismatch("metric input lengths differ");
    if (y_true.empty()) throw EmptyInput("metric inputs are empty");

    const auto n = static_cast<double>(y_true.size());
    double sse = 0.0, sae = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double e = y_pred[i] - y_true[i];
        sse += e * e;
        sae += std::abs(e);
    }
    double mean = 0.0;
    for (double v : y_true) mean += v;
    mean /= n;
    double sst = 0.0;
    for (double v : y_true) sst += (v - mean) * (v - mean);

    MetricsReport m;
    m.n_points = y_true.size();
    m.mse = sse / n;
    m.rmse = std::sqrt(m.mse);
    m.mae = sae / n;
    if (sst > 0.0) {
        m.r2 = 1.0 - sse / sst;
    } else {
        m.degenerate_target = true;
        m.r2 = (sse == 0.0) ? 1.0 : kDegenerateR2;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Adjusted Rand Index (pair-counting, chance-corrected)
// ---------------------------------------------------------------------------

inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw LengthMismatch("labelings differ in length");
    if (a.empty()) throw EmptyInput("empty labelings");

    std::map<std::pair<int, int>, double> contingency;
    std::map<int, double> row_sum, col_sum;
    for (std::size_t i = 0; i < a.size(); ++i) {
        contingency[{a[i], b[i]}] += 1.0;
        row_sum[a[i]] += 1.0;
        col_sum[b[i]] += 1.0;
    }
    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [key, v] : contingency) sum_ij += choose2(v);
    for (const auto& [key, v] : row_sum) sum_a += choose2(v);
    for (const auto& [key, v] : col_sum) sum_b += choose2(v);
    const double total = choose2(static_cast<double>(a.size()));
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both labelings trivial
    return (sum_ij - expected) / (max_index - expected);
}

}  // namespace windfleet
