#pragma once

#include <cstdint>

namespace slotmotion {

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// col is [C*kh*kw, OH*OW], row-major. Geometry is shared by conv forward
// (im2col of the input) and transposed-conv backward (im2col of the output
// gradient), so pad/stride always refer to the convolution view.
template <typename T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride, int pad, T* col,
            int OH, int OW) {
    const int owh = OH * OW;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                T* dst = col + ((static_cast<int64_t>(c) * kh + ki) * kw + kj) * owh;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * stride - pad + ki;
                    if (iy < 0 || iy >= H) {
                        for (int ox = 0; ox < OW; ++ox) dst[oy * OW + ox] = T(0);
                        continue;
                    }
                    const T* src = x + (static_cast<int64_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * stride - pad + kj;
                        dst[oy * OW + ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Scatter-add of a col buffer back onto the (pre-zeroed) image.
template <typename T>
void col2im(const T* col, int C, int H, int W, int kh, int kw, int stride, int pad, T* x,
            int OH, int OW) {
    const int owh = OH * OW;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                const T* src = col + ((static_cast<int64_t>(c) * kh + ki) * kw + kj) * owh;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * stride - pad + ki;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = x + (static_cast<int64_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * stride - pad + kj;
                        if (ix >= 0 && ix < W) dst[ix] += src[oy * OW + ox];
                    }
                }
            }
        }
    }
}

} // namespace slotmotion
