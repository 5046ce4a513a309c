#pragma once

#include <cmath>
#include <cstdint>

#include "slotmotion/core/error.hpp"

namespace slotmotion {

struct LrSchedule {
    double base_lr = 0.001;
    int64_t warmup_iters = 2000;
    double decay_rate = 0.5;
    int64_t decay_step = 500000;
};

// Linear warmup from zero, then exponential decay with a continuous exponent
// measured from the end of warmup. Continuous at the boundary and monotone
// non-increasing afterwards.
inline double lr_at(const LrSchedule& s, int64_t step) {
    require(step >= 0, "lr_at: negative step");
    if (s.warmup_iters > 0 && step < s.warmup_iters)
        return s.base_lr * static_cast<double>(step) / static_cast<double>(s.warmup_iters);
    return s.base_lr * std::pow(s.decay_rate, static_cast<double>(step - s.warmup_iters) /
                                                  static_cast<double>(s.decay_step));
}

} // namespace slotmotion
