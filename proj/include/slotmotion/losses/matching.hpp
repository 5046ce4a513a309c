#pragma once

#include <limits>
#include <vector>

#include "slotmotion/core/tensor.hpp"

namespace slotmotion {

// Injective assignment of masks (rows) to slots (columns).
struct Assignment {
    std::vector<int> slot_for_mask; // size = row count
    double total_cost = 0.0;

    int matched_count() const { return static_cast<int>(slot_for_mask.size()); }
};

// Exact minimum-cost rectangular assignment (rows <= cols) via shortest
// augmenting paths with potentials. O(rows^2 * cols).
inline Assignment hungarian_match(const Tensor<double>& cost) {
    require(cost.rank() == 2, "hungarian_match: expected a matrix");
    const int n = static_cast<int>(cost.dim(0));
    const int m = static_cast<int>(cost.dim(1));
    require(n <= m, "hungarian_match: more rows than columns (" + std::to_string(n) + " > " +
                        std::to_string(m) + ")");
    Assignment out;
    if (n == 0) return out;

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(m) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(m) + 1, 0), way(static_cast<size_t>(m) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(m) + 1, inf);
        std::vector<char> used(static_cast<size_t>(m) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int i0 = p[static_cast<size_t>(j0)];
            double delta = inf;
            int j1 = -1;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = cost.at(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                                   v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0);
    }

    out.slot_for_mask.assign(static_cast<size_t>(n), -1);
    for (int j = 1; j <= m; ++j)
        if (p[static_cast<size_t>(j)] > 0) out.slot_for_mask[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
    for (int i = 0; i < n; ++i) out.total_cost += cost.at(i, out.slot_for_mask[static_cast<size_t>(i)]);
    return out;
}

// Greedy approximation: repeatedly commits the globally cheapest unassigned
// (mask, slot) pair. Ties break toward the lowest mask index, then the lowest
// slot index.
inline Assignment greedy_match_cost(const Tensor<double>& cost) {
    require(cost.rank() == 2, "greedy_match_cost: expected a matrix");
    const int n = static_cast<int>(cost.dim(0));
    const int m = static_cast<int>(cost.dim(1));
    require(n <= m, "greedy_match_cost: more masks than slots (" + std::to_string(n) + " > " +
                        std::to_string(m) + ")");
    Assignment out;
    out.slot_for_mask.assign(static_cast<size_t>(n), -1);
    std::vector<char> mask_done(static_cast<size_t>(n), 0), slot_done(static_cast<size_t>(m), 0);
    for (int round = 0; round < n; ++round) {
        int bi = -1, bj = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            if (mask_done[static_cast<size_t>(i)]) continue;
            for (int j = 0; j < m; ++j) {
                if (slot_done[static_cast<size_t>(j)]) continue;
                if (cost.at(i, j) < best) {
                    best = cost.at(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        mask_done[static_cast<size_t>(bi)] = 1;
        slot_done[static_cast<size_t>(bj)] = 1;
        out.slot_for_mask[static_cast<size_t>(bi)] = bj;
        out.total_cost += best;
    }
    return out;
}

} // namespace slotmotion
