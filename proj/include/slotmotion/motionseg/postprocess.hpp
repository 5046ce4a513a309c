#pragma once

#include <vector>

#include "slotmotion/motionseg/masks.hpp"

namespace slotmotion {

// Full-resolution segment plus the side channels the filters look at.
struct SegmentCandidate {
    BinaryMask mask;
    float confidence = 1.0f;
    float mean_flow_magnitude = 0.0f; // normalized to [0,1] within the frame
};

struct PostprocessParams {
    int min_pixels = 100;
    int min_bbox_dim = 10;
    float max_area_fraction = 0.60f;
    int boundary_margin = 15;
    float conf_threshold = 0.25f; // T_conf
    float mag_threshold = 0.05f;  // T_mag
};

namespace detail {

struct BBox {
    int y0 = 0, x0 = 0, y1 = -1, x1 = -1; // inclusive; empty when y1 < y0
};

inline BBox bbox_of(const BinaryMask& m) {
    BBox b{m.height, m.width, -1, -1};
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(y, x)) {
                b.y0 = std::min(b.y0, y);
                b.x0 = std::min(b.x0, x);
                b.y1 = std::max(b.y1, y);
                b.x1 = std::max(b.x1, x);
            }
    return b;
}

} // namespace detail

// Removal rules, applied in order:
//   1. fewer than min_pixels positives, or bbox min dimension < min_bbox_dim
//   2. area above max_area_fraction of the image
//   3. any positive pixel closer than boundary_margin to the image border
//   4. more than one 4-connected component
//   5. confidence below conf_threshold, or mean normalized flow magnitude
//      below mag_threshold
// Keeps input order; only removes, never modifies a segment.
inline std::vector<SegmentCandidate> postprocess(const std::vector<SegmentCandidate>& segments,
                                                 int image_h, int image_w,
                                                 const PostprocessParams& params) {
    std::vector<SegmentCandidate> kept;
    const int64_t image_area = static_cast<int64_t>(image_h) * image_w;
    for (const auto& seg : segments) {
        require(seg.mask.height == image_h && seg.mask.width == image_w,
                "postprocess: segment shape does not match image shape");
        const int64_t pixels = seg.mask.count();
        if (pixels == 0) continue;

        const auto bb = detail::bbox_of(seg.mask);
        const int bb_min = std::min(bb.y1 - bb.y0 + 1, bb.x1 - bb.x0 + 1);
        if (pixels < params.min_pixels || bb_min < params.min_bbox_dim) continue;

        if (static_cast<double>(pixels) > params.max_area_fraction * static_cast<double>(image_area))
            continue;

        const int margin = params.boundary_margin;
        const int edge_dist = std::min(std::min(bb.y0, bb.x0),
                                       std::min(image_h - 1 - bb.y1, image_w - 1 - bb.x1));
        if (edge_dist < margin) continue;

        if (count_components(seg.mask) != 1) continue;

        if (seg.confidence < params.conf_threshold) continue;
        if (seg.mean_flow_magnitude < params.mag_threshold) continue;

        kept.push_back(seg);
    }
    return kept;
}

} // namespace slotmotion
