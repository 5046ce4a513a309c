#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "slotmotion/core/error.hpp"

namespace slotmotion {

namespace detail {

inline double comb2(double n) { return n * (n - 1.0) * 0.5; }

// Same set partition up to label renaming.
inline bool identical_partition(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<int, int> a2b, b2a;
    for (size_t i = 0; i < a.size(); ++i) {
        auto [ita, oka] = a2b.emplace(a[i], b[i]);
        if (!oka && ita->second != b[i]) return false;
        auto [itb, okb] = b2a.emplace(b[i], a[i]);
        if (!okb && itb->second != a[i]) return false;
    }
    return true;
}

} // namespace detail

// Pair-counting adjusted Rand index over two labelings of the same pixels.
// Degenerate inputs (max index equals expected index, e.g. a single cluster
// on both sides) score 1 when the partitions coincide and 0 otherwise.
inline double ari(const std::vector<int>& pred, const std::vector<int>& gt) {
    require(!pred.empty(), "ari: empty labeling");
    require(pred.size() == gt.size(), "ari: label vectors differ in length");

    std::map<std::pair<int, int>, int64_t> cont;
    std::map<int, int64_t> rows, cols;
    for (size_t i = 0; i < pred.size(); ++i) {
        cont[{pred[i], gt[i]}] += 1;
        rows[pred[i]] += 1;
        cols[gt[i]] += 1;
    }
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, n] : cont) index += detail::comb2(static_cast<double>(n));
    for (const auto& [key, n] : rows) sum_rows += detail::comb2(static_cast<double>(n));
    for (const auto& [key, n] : cols) sum_cols += detail::comb2(static_cast<double>(n));
    const double total_pairs = detail::comb2(static_cast<double>(pred.size()));
    const double expected = total_pairs > 0.0 ? sum_rows * sum_cols / total_pairs : 0.0;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    const double denom = max_index - expected;
    if (std::abs(denom) < 1e-12) return detail::identical_partition(pred, gt) ? 1.0 : 0.0;
    return (index - expected) / denom;
}

// ARI restricted to ground-truth foreground (gt label != 0). Undefined when
// no foreground pixel exists; reported as such rather than as zero.
inline std::optional<double> fg_ari(const std::vector<int>& pred, const std::vector<int>& gt) {
    require(pred.size() == gt.size(), "fg_ari: label vectors differ in length");
    std::vector<int> p, g;
    for (size_t i = 0; i < pred.size(); ++i)
        if (gt[i] != 0) {
            p.push_back(pred[i]);
            g.push_back(gt[i]);
        }
    if (p.empty()) return std::nullopt;
    return ari(p, g);
}

// ARI over the pixels of a chosen subset of ground-truth instances, e.g. the
// moving or the static ones.
inline std::optional<double> fg_ari_subset(const std::vector<int>& pred, const std::vector<int>& gt,
                                           const std::set<int>& instance_ids) {
    require(pred.size() == gt.size(), "fg_ari_subset: label vectors differ in length");
    std::vector<int> p, g;
    for (size_t i = 0; i < pred.size(); ++i)
        if (gt[i] != 0 && instance_ids.count(gt[i])) {
            p.push_back(pred[i]);
            g.push_back(gt[i]);
        }
    if (p.empty()) return std::nullopt;
    return ari(p, g);
}

} // namespace slotmotion
