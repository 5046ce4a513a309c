#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slotmotion/core/error.hpp"
#include "slotmotion/core/random.hpp"

namespace slotmotion {

namespace detail {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace detail

// Partitions clip indices into batches, each covering every clip exactly
// once per epoch. With the motion quota enabled, every batch gets at least
// half motion-bearing clips; if the dataset cannot support that, the call
// fails with the counts instead of silently relaxing the constraint.
inline std::vector<std::vector<int>> build_batches(const std::vector<char>& motion_bearing,
                                                   int batch_size, uint64_t seed,
                                                   bool enforce_motion_quota) {
    require(batch_size >= 1, "build_batches: batch_size must be >= 1");
    const int n = static_cast<int>(motion_bearing.size());
    require(n >= 1, "build_batches: empty dataset");
    Rng rng(mix_seed(seed, 0xBA7C4ULL));

    const int num_batches = (n + batch_size - 1) / batch_size;
    std::vector<int> sizes(static_cast<size_t>(num_batches), batch_size);
    if (n % batch_size != 0) sizes.back() = n % batch_size;

    if (!enforce_motion_quota) {
        std::vector<int> order(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
        detail::shuffle(order, rng);
        std::vector<std::vector<int>> batches(static_cast<size_t>(num_batches));
        int pos = 0;
        for (int b = 0; b < num_batches; ++b)
            for (int k = 0; k < sizes[static_cast<size_t>(b)]; ++k)
                batches[static_cast<size_t>(b)].push_back(order[static_cast<size_t>(pos++)]);
        return batches;
    }

    std::vector<int> bearing, rest;
    for (int i = 0; i < n; ++i)
        (motion_bearing[static_cast<size_t>(i)] ? bearing : rest).push_back(i);

    int64_t needed = 0;
    for (int b = 0; b < num_batches; ++b) needed += (sizes[static_cast<size_t>(b)] + 1) / 2;
    if (static_cast<int64_t>(bearing.size()) < needed) {
        const double have = 100.0 * static_cast<double>(bearing.size()) / n;
        throw ConfigError(
            "cannot satisfy the motion quota: every batch needs at least half motion-bearing "
            "clips, which requires " +
            std::to_string(needed) + " of " + std::to_string(n) + " clips, but only " +
            std::to_string(bearing.size()) + " (" + std::to_string(have) +
            "% < 50%) carry motion masks");
    }

    detail::shuffle(bearing, rng);
    detail::shuffle(rest, rng);

    std::vector<std::vector<int>> batches(static_cast<size_t>(num_batches));
    size_t bpos = 0;
    for (int b = 0; b < num_batches; ++b) {
        const int quota = (sizes[static_cast<size_t>(b)] + 1) / 2;
        for (int k = 0; k < quota; ++k)
            batches[static_cast<size_t>(b)].push_back(bearing[bpos++]);
    }
    std::vector<int> leftovers(bearing.begin() + static_cast<std::ptrdiff_t>(bpos), bearing.end());
    leftovers.insert(leftovers.end(), rest.begin(), rest.end());
    detail::shuffle(leftovers, rng);
    size_t lpos = 0;
    for (int b = 0; b < num_batches; ++b) {
        while (static_cast<int>(batches[static_cast<size_t>(b)].size()) < sizes[static_cast<size_t>(b)])
            batches[static_cast<size_t>(b)].push_back(leftovers[lpos++]);
        detail::shuffle(batches[static_cast<size_t>(b)], rng);
    }
    return batches;
}

} // namespace slotmotion
