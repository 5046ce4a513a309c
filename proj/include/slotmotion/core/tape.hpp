#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "slotmotion/core/conv.hpp"
#include "slotmotion/core/tensor.hpp"

namespace slotmotion {

// Reverse-mode tape over Tensor<T>. Nodes are appended in evaluation order;
// backward() walks them in reverse, so every node's parents have smaller ids.
// Values are computed eagerly; backward closures recompute cheap scratch
// buffers (im2col) instead of storing them.
template <typename T>
class Tape {
public:
    using BackFn = std::function<void(Tape&, int)>;

    struct Node {
        Tensor<T> value;
        Tensor<T> grad; // allocated on first use
        bool needs_grad = false;
        BackFn backward;
    };

    int constant(Tensor<T> v) { return push(std::move(v), false, nullptr); }

    int leaf(Tensor<T> v) { return push(std::move(v), true, nullptr); }

    int push(Tensor<T> v, bool needs_grad, BackFn fn) {
        allocated_ += v.numel();
        nodes_.push_back(Node{std::move(v), Tensor<T>(), needs_grad, std::move(fn)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Tensor<T>& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }

    bool needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

    bool has_grad(int id) const { return !nodes_[static_cast<size_t>(id)].grad.empty(); }

    Tensor<T>& grad(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.empty()) n.grad = zeros_like(n.value);
        return n.grad;
    }

    void backward(int root) {
        require(val(root).numel() == 1, "backward root must be a scalar node");
        grad(root)[0] = T(1);
        for (int i = root; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.backward && !n.grad.empty()) n.backward(*this, i);
        }
    }

    size_t size() const { return nodes_.size(); }

    // Total elements held in node values; used to characterize the memory
    // footprint of alternative decode paths.
    int64_t allocated_values() const { return allocated_; }

private:
    std::vector<Node> nodes_;
    int64_t allocated_ = 0;
};

namespace detail {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<EMat<T>>;
template <typename T>
using MapC = Eigen::Map<const EMat<T>>;

template <typename T>
inline bool wants(const Tape<T>& t, int a) {
    return t.needs_grad(a);
}
template <typename T>
inline bool wants(const Tape<T>& t, int a, int b) {
    return t.needs_grad(a) || t.needs_grad(b);
}

template <typename T>
inline void accum(Tape<T>& t, int id, const Tensor<T>& g) {
    if (!t.needs_grad(id)) return;
    Tensor<T>& dst = t.grad(id);
    const T* s = g.data();
    T* d = dst.data();
    for (int64_t i = 0; i < g.numel(); ++i) d[i] += s[i];
}

} // namespace detail

// ---- elementwise -----------------------------------------------------------

template <typename T>
int add(Tape<T>& t, int a, int b) {
    const Tensor<T>&A = t.val(a), &B = t.val(b);
    require(A.same_shape(B), "add: shape mismatch " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
    Tensor<T> y(A.shape());
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = A[i] + B[i];
    if (!detail::wants(t, a, b)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, b](Tape<T>& tp, int self) {
        detail::accum(tp, a, tp.grad(self));
        detail::accum(tp, b, tp.grad(self));
    });
}

template <typename T>
int sub(Tape<T>& t, int a, int b) {
    const Tensor<T>&A = t.val(a), &B = t.val(b);
    require(A.same_shape(B), "sub: shape mismatch");
    Tensor<T> y(A.shape());
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = A[i] - B[i];
    if (!detail::wants(t, a, b)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, b](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        detail::accum(tp, a, g);
        if (tp.needs_grad(b)) {
            Tensor<T>& db = tp.grad(b);
            for (int64_t i = 0; i < g.numel(); ++i) db[i] -= g[i];
        }
    });
}

template <typename T>
int mul(Tape<T>& t, int a, int b) {
    const Tensor<T>&A = t.val(a), &B = t.val(b);
    require(A.same_shape(B), "mul: shape mismatch");
    Tensor<T> y(A.shape());
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = A[i] * B[i];
    if (!detail::wants(t, a, b)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, b](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        const Tensor<T>&A2 = tp.val(a), &B2 = tp.val(b);
        if (tp.needs_grad(a)) {
            Tensor<T>& da = tp.grad(a);
            for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] * B2[i];
        }
        if (tp.needs_grad(b)) {
            Tensor<T>& db = tp.grad(b);
            for (int64_t i = 0; i < g.numel(); ++i) db[i] += g[i] * A2[i];
        }
    });
}

template <typename T>
int scale(Tape<T>& t, int a, double c) {
    const Tensor<T>& A = t.val(a);
    Tensor<T> y(A.shape());
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = static_cast<T>(A[i] * c);
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, c](Tape<T>& tp, int self) {
        if (!tp.needs_grad(a)) return;
        const Tensor<T>& g = tp.grad(self);
        Tensor<T>& da = tp.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += static_cast<T>(g[i] * c);
    });
}

template <typename T>
int relu(Tape<T>& t, int a) {
    const Tensor<T>& A = t.val(a);
    Tensor<T> y(A.shape());
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = A[i] > T(0) ? A[i] : T(0);
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        const Tensor<T>& A2 = tp.val(a);
        Tensor<T>& da = tp.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i)
            if (A2[i] > T(0)) da[i] += g[i];
    });
}

template <typename T>
int sigmoid(Tape<T>& t, int a) {
    const Tensor<T>& A = t.val(a);
    Tensor<T> y(A.shape());
    for (int64_t i = 0; i < y.numel(); ++i) {
        double x = static_cast<double>(A[i]);
        double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        y[i] = static_cast<T>(s);
    }
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        const Tensor<T>& Y = tp.val(self);
        Tensor<T>& da = tp.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] * Y[i] * (T(1) - Y[i]);
    });
}

template <typename T>
int exp(Tape<T>& t, int a) {
    const Tensor<T>& A = t.val(a);
    Tensor<T> y(A.shape());
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = static_cast<T>(std::exp(static_cast<double>(A[i])));
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        const Tensor<T>& Y = tp.val(self);
        Tensor<T>& da = tp.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] * Y[i];
    });
}

template <typename T>
int tanh(Tape<T>& t, int a) {
    const Tensor<T>& A = t.val(a);
    Tensor<T> y(A.shape());
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = static_cast<T>(std::tanh(static_cast<double>(A[i])));
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        const Tensor<T>& Y = tp.val(self);
        Tensor<T>& da = tp.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] * (T(1) - Y[i] * Y[i]);
    });
}

// ---- reshaping / indexing --------------------------------------------------

template <typename T>
int reshape(Tape<T>& t, int a, Shape shape) {
    const Tensor<T>& A = t.val(a);
    require(shape_numel(shape) == A.numel(), "reshape: element count mismatch");
    Tensor<T> y(std::move(shape), A.vec());
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a](Tape<T>& tp, int self) {
        if (!tp.needs_grad(a)) return;
        const Tensor<T>& g = tp.grad(self);
        Tensor<T>& da = tp.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i];
    });
}

// [C,H,W] -> [H*W, C]
template <typename T>
int chw_to_nc(Tape<T>& t, int a) {
    const Tensor<T>& A = t.val(a);
    require(A.rank() == 3, "chw_to_nc: expected rank-3 input");
    const int64_t C = A.dim(0), N = A.dim(1) * A.dim(2);
    Tensor<T> y({N, C});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t n = 0; n < N; ++n) y[n * C + c] = A[c * N + n];
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, C, N](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        Tensor<T>& da = tp.grad(a);
        for (int64_t c = 0; c < C; ++c)
            for (int64_t n = 0; n < N; ++n) da[c * N + n] += g[n * C + c];
    });
}

// [H*W, C] -> [C,H,W]
template <typename T>
int nc_to_chw(Tape<T>& t, int a, int64_t H, int64_t W) {
    const Tensor<T>& A = t.val(a);
    require(A.rank() == 2 && A.dim(0) == H * W, "nc_to_chw: shape mismatch");
    const int64_t C = A.dim(1), N = H * W;
    Tensor<T> y({C, H, W});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t n = 0; n < N; ++n) y[c * N + n] = A[n * C + c];
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, C, N](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        Tensor<T>& da = tp.grad(a);
        for (int64_t c = 0; c < C; ++c)
            for (int64_t n = 0; n < N; ++n) da[n * C + c] += g[c * N + n];
    });
}

template <typename T>
int col(Tape<T>& t, int a, int64_t j) {
    const Tensor<T>& A = t.val(a);
    require(A.rank() == 2 && j >= 0 && j < A.dim(1), "col: index out of range");
    const int64_t R = A.dim(0), C = A.dim(1);
    Tensor<T> y({R});
    for (int64_t r = 0; r < R; ++r) y[r] = A[r * C + j];
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, j, R, C](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        Tensor<T>& da = tp.grad(a);
        for (int64_t r = 0; r < R; ++r) da[r * C + j] += g[r];
    });
}

template <typename T>
int row(Tape<T>& t, int a, int64_t i) {
    const Tensor<T>& A = t.val(a);
    require(A.rank() == 2 && i >= 0 && i < A.dim(0), "row: index out of range");
    const int64_t C = A.dim(1);
    Tensor<T> y({C});
    for (int64_t c = 0; c < C; ++c) y[c] = A[i * C + c];
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, i, C](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        Tensor<T>& da = tp.grad(a);
        for (int64_t c = 0; c < C; ++c) da[i * C + c] += g[c];
    });
}

template <typename T>
int stack_cols(Tape<T>& t, const std::vector<int>& ids) {
    require(!ids.empty(), "stack_cols: empty input");
    const int64_t R = t.val(ids[0]).numel();
    const int64_t K = static_cast<int64_t>(ids.size());
    Tensor<T> y({R, K});
    bool any = false;
    for (int64_t k = 0; k < K; ++k) {
        const Tensor<T>& v = t.val(ids[static_cast<size_t>(k)]);
        require(v.numel() == R, "stack_cols: length mismatch");
        any = any || t.needs_grad(ids[static_cast<size_t>(k)]);
        for (int64_t r = 0; r < R; ++r) y[r * K + k] = v[r];
    }
    if (!any) return t.constant(std::move(y));
    std::vector<int> parents = ids;
    return t.push(std::move(y), true, [parents, R, K](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        for (int64_t k = 0; k < K; ++k) {
            int p = parents[static_cast<size_t>(k)];
            if (!tp.needs_grad(p)) continue;
            Tensor<T>& dp = tp.grad(p);
            for (int64_t r = 0; r < R; ++r) dp[r] += g[r * K + k];
        }
    });
}

// y[r,c] = x[r,c] * a[r]
template <typename T>
int mul_colvec(Tape<T>& t, int x, int a) {
    const Tensor<T>& X = t.val(x);
    const Tensor<T>& A = t.val(a);
    require(X.rank() == 2 && A.numel() == X.dim(0), "mul_colvec: shape mismatch");
    const int64_t R = X.dim(0), C = X.dim(1);
    Tensor<T> y({R, C});
    for (int64_t r = 0; r < R; ++r)
        for (int64_t c = 0; c < C; ++c) y[r * C + c] = X[r * C + c] * A[r];
    if (!detail::wants(t, x, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [x, a, R, C](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        const Tensor<T>& X2 = tp.val(x);
        const Tensor<T>& A2 = tp.val(a);
        if (tp.needs_grad(x)) {
            Tensor<T>& dx = tp.grad(x);
            for (int64_t r = 0; r < R; ++r)
                for (int64_t c = 0; c < C; ++c) dx[r * C + c] += g[r * C + c] * A2[r];
        }
        if (tp.needs_grad(a)) {
            Tensor<T>& da = tp.grad(a);
            for (int64_t r = 0; r < R; ++r) {
                T s = T(0);
                for (int64_t c = 0; c < C; ++c) s += g[r * C + c] * X2[r * C + c];
                da[r] += s;
            }
        }
    });
}

template <typename T>
int broadcast_vec_rows(Tape<T>& t, int v, int64_t rows) {
    const Tensor<T>& V = t.val(v);
    require(V.rank() == 1, "broadcast_vec_rows: expected a vector");
    const int64_t D = V.numel();
    Tensor<T> y({rows, D});
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t d = 0; d < D; ++d) y[r * D + d] = V[d];
    if (!detail::wants(t, v)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [v, rows, D](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        Tensor<T>& dv = tp.grad(v);
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t d = 0; d < D; ++d) dv[d] += g[r * D + d];
    });
}

template <typename T>
int slice_channels(Tape<T>& t, int a, int64_t c0, int64_t c1) {
    const Tensor<T>& A = t.val(a);
    require(A.rank() == 3 && c0 >= 0 && c1 <= A.dim(0) && c0 < c1, "slice_channels: bad range");
    const int64_t N = A.dim(1) * A.dim(2);
    Tensor<T> y({c1 - c0, A.dim(1), A.dim(2)});
    for (int64_t c = c0; c < c1; ++c)
        for (int64_t n = 0; n < N; ++n) y[(c - c0) * N + n] = A[c * N + n];
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, c0, c1, N](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        Tensor<T>& da = tp.grad(a);
        for (int64_t c = c0; c < c1; ++c)
            for (int64_t n = 0; n < N; ++n) da[c * N + n] += g[(c - c0) * N + n];
    });
}

// ---- linear algebra --------------------------------------------------------

template <typename T>
int matmul(Tape<T>& t, int a, int b, bool ta = false, bool tb = false) {
    const Tensor<T>&A = t.val(a), &B = t.val(b);
    require(A.rank() == 2 && B.rank() == 2, "matmul: expected rank-2 inputs");
    const int64_t am = ta ? A.dim(1) : A.dim(0), ak = ta ? A.dim(0) : A.dim(1);
    const int64_t bk = tb ? B.dim(1) : B.dim(0), bn = tb ? B.dim(0) : B.dim(1);
    require(ak == bk, "matmul: inner dimension mismatch");
    Tensor<T> y({am, bn});
    {
        detail::MapC<T> MA(A.data(), A.dim(0), A.dim(1));
        detail::MapC<T> MB(B.data(), B.dim(0), B.dim(1));
        detail::MapM<T> MY(y.data(), am, bn);
        if (!ta && !tb) MY.noalias() = MA * MB;
        else if (ta && !tb) MY.noalias() = MA.transpose() * MB;
        else if (!ta && tb) MY.noalias() = MA * MB.transpose();
        else MY.noalias() = MA.transpose() * MB.transpose();
    }
    if (!detail::wants(t, a, b)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, b, ta, tb, am, bn](Tape<T>& tp, int self) {
        const Tensor<T>& G = tp.grad(self);
        const Tensor<T>&A2 = tp.val(a), &B2 = tp.val(b);
        detail::MapC<T> MG(G.data(), am, bn);
        detail::MapC<T> MA(A2.data(), A2.dim(0), A2.dim(1));
        detail::MapC<T> MB(B2.data(), B2.dim(0), B2.dim(1));
        if (tp.needs_grad(a)) {
            Tensor<T>& dA = tp.grad(a);
            detail::MapM<T> MdA(dA.data(), A2.dim(0), A2.dim(1));
            if (!ta && !tb) MdA.noalias() += MG * MB.transpose();
            else if (!ta && tb) MdA.noalias() += MG * MB;
            else if (ta && !tb) MdA.noalias() += MB * MG.transpose();
            else MdA.noalias() += MB.transpose() * MG.transpose();
        }
        if (tp.needs_grad(b)) {
            Tensor<T>& dB = tp.grad(b);
            detail::MapM<T> MdB(dB.data(), B2.dim(0), B2.dim(1));
            if (!ta && !tb) MdB.noalias() += MA.transpose() * MG;
            else if (ta && !tb) MdB.noalias() += MA * MG;
            else if (!ta && tb) MdB.noalias() += MG.transpose() * MA;
            else MdB.noalias() += MG.transpose() * MA.transpose();
        }
    });
}

// y[r,c] = x[r,c] + b[c]
template <typename T>
int add_rowvec(Tape<T>& t, int x, int b) {
    const Tensor<T>& X = t.val(x);
    const Tensor<T>& B = t.val(b);
    require(X.rank() == 2 && B.numel() == X.dim(1), "add_rowvec: shape mismatch");
    const int64_t R = X.dim(0), C = X.dim(1);
    Tensor<T> y({R, C});
    for (int64_t r = 0; r < R; ++r)
        for (int64_t c = 0; c < C; ++c) y[r * C + c] = X[r * C + c] + B[c];
    if (!detail::wants(t, x, b)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [x, b, R, C](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        detail::accum(tp, x, g);
        if (tp.needs_grad(b)) {
            Tensor<T>& db = tp.grad(b);
            for (int64_t r = 0; r < R; ++r)
                for (int64_t c = 0; c < C; ++c) db[c] += g[r * C + c];
        }
    });
}

template <typename T>
int linear(Tape<T>& t, int x, int w, int b) {
    return add_rowvec(t, matmul(t, x, w), b);
}

// ---- convolutions ----------------------------------------------------------

// x [C,H,W], w [OC,C,kh,kw], optional bias [OC] (pass -1 to skip).
template <typename T>
int conv2d(Tape<T>& t, int x, int w, int b, int stride, int pad) {
    const Tensor<T>& X = t.val(x);
    const Tensor<T>& W = t.val(w);
    require(X.rank() == 3 && W.rank() == 4, "conv2d: bad ranks");
    require(X.dim(0) == W.dim(1), "conv2d: channel mismatch");
    const int C = static_cast<int>(X.dim(0)), H = static_cast<int>(X.dim(1)),
              Wd = static_cast<int>(X.dim(2));
    const int OC = static_cast<int>(W.dim(0)), kh = static_cast<int>(W.dim(2)),
              kw = static_cast<int>(W.dim(3));
    const int OH = conv_out_dim(H, kh, stride, pad), OW = conv_out_dim(Wd, kw, stride, pad);
    require(OH > 0 && OW > 0, "conv2d: output would be empty");

    std::vector<T> colbuf(static_cast<size_t>(C) * kh * kw * OH * OW);
    im2col(X.data(), C, H, Wd, kh, kw, stride, pad, colbuf.data(), OH, OW);
    Tensor<T> y({OC, OH, OW});
    {
        detail::MapC<T> MW(W.data(), OC, static_cast<int64_t>(C) * kh * kw);
        detail::MapC<T> MCol(colbuf.data(), static_cast<int64_t>(C) * kh * kw,
                             static_cast<int64_t>(OH) * OW);
        detail::MapM<T> MY(y.data(), OC, static_cast<int64_t>(OH) * OW);
        MY.noalias() = MW * MCol;
    }
    if (b >= 0) {
        const Tensor<T>& B = t.val(b);
        require(B.numel() == OC, "conv2d: bias size mismatch");
        for (int oc = 0; oc < OC; ++oc) {
            T bv = B[oc];
            T* p = y.data() + static_cast<int64_t>(oc) * OH * OW;
            for (int i = 0; i < OH * OW; ++i) p[i] += bv;
        }
    }
    const bool ng = t.needs_grad(x) || t.needs_grad(w) || (b >= 0 && t.needs_grad(b));
    if (!ng) return t.constant(std::move(y));
    return t.push(std::move(y), true, [x, w, b, stride, pad, C, H, Wd, OC, kh, kw, OH,
                                       OW](Tape<T>& tp, int self) {
        const Tensor<T>& G = tp.grad(self);
        const Tensor<T>& X2 = tp.val(x);
        const Tensor<T>& W2 = tp.val(w);
        const int64_t ck = static_cast<int64_t>(C) * kh * kw;
        const int64_t ohw = static_cast<int64_t>(OH) * OW;
        detail::MapC<T> MG(G.data(), OC, ohw);
        if (b >= 0 && tp.needs_grad(b)) {
            Tensor<T>& db = tp.grad(b);
            for (int oc = 0; oc < OC; ++oc) db[oc] += MG.row(oc).sum();
        }
        if (tp.needs_grad(w)) {
            std::vector<T> colbuf2(static_cast<size_t>(ck * ohw));
            im2col(X2.data(), C, H, Wd, kh, kw, stride, pad, colbuf2.data(), OH, OW);
            detail::MapC<T> MCol(colbuf2.data(), ck, ohw);
            Tensor<T>& dW = tp.grad(w);
            detail::MapM<T> MdW(dW.data(), OC, ck);
            MdW.noalias() += MG * MCol.transpose();
        }
        if (tp.needs_grad(x)) {
            std::vector<T> dcol(static_cast<size_t>(ck * ohw));
            detail::MapM<T> MdCol(dcol.data(), ck, ohw);
            detail::MapC<T> MW(W2.data(), OC, ck);
            MdCol.noalias() = MW.transpose() * MG;
            Tensor<T>& dX = tp.grad(x);
            col2im(dcol.data(), C, H, Wd, kh, kw, stride, pad, dX.data(), OH, OW);
        }
    });
}

// x [IC,H,W], w [IC,OC,kh,kw], optional bias [OC].
// out dims: (H-1)*stride - 2*pad + kh + outpad.
template <typename T>
int conv_transpose2d(Tape<T>& t, int x, int w, int b, int stride, int pad, int outpad = 0) {
    const Tensor<T>& X = t.val(x);
    const Tensor<T>& W = t.val(w);
    require(X.rank() == 3 && W.rank() == 4, "conv_transpose2d: bad ranks");
    require(X.dim(0) == W.dim(0), "conv_transpose2d: channel mismatch");
    const int IC = static_cast<int>(X.dim(0)), H = static_cast<int>(X.dim(1)),
              Wd = static_cast<int>(X.dim(2));
    const int OC = static_cast<int>(W.dim(1)), kh = static_cast<int>(W.dim(2)),
              kw = static_cast<int>(W.dim(3));
    const int OH = (H - 1) * stride - 2 * pad + kh + outpad;
    const int OW = (Wd - 1) * stride - 2 * pad + kw + outpad;
    require(OH > 0 && OW > 0, "conv_transpose2d: output would be empty");
    require(conv_out_dim(OH, kh, stride, pad) == H && conv_out_dim(OW, kw, stride, pad) == Wd,
            "conv_transpose2d: inconsistent geometry");

    const int64_t ok = static_cast<int64_t>(OC) * kh * kw;
    const int64_t hw = static_cast<int64_t>(H) * Wd;
    Tensor<T> y({OC, OH, OW});
    {
        std::vector<T> colbuf(static_cast<size_t>(ok * hw));
        detail::MapC<T> MW(W.data(), IC, ok);
        detail::MapC<T> MX(X.data(), IC, hw);
        detail::MapM<T> MCol(colbuf.data(), ok, hw);
        MCol.noalias() = MW.transpose() * MX;
        col2im(colbuf.data(), OC, OH, OW, kh, kw, stride, pad, y.data(), H, Wd);
    }
    if (b >= 0) {
        const Tensor<T>& B = t.val(b);
        require(B.numel() == OC, "conv_transpose2d: bias size mismatch");
        for (int oc = 0; oc < OC; ++oc) {
            T bv = B[oc];
            T* p = y.data() + static_cast<int64_t>(oc) * OH * OW;
            for (int i = 0; i < OH * OW; ++i) p[i] += bv;
        }
    }
    const bool ng = t.needs_grad(x) || t.needs_grad(w) || (b >= 0 && t.needs_grad(b));
    if (!ng) return t.constant(std::move(y));
    return t.push(std::move(y), true, [x, w, b, stride, pad, IC, H, Wd, OC, kh, kw, OH,
                                       OW](Tape<T>& tp, int self) {
        const Tensor<T>& G = tp.grad(self);
        const Tensor<T>& X2 = tp.val(x);
        const Tensor<T>& W2 = tp.val(w);
        const int64_t ok = static_cast<int64_t>(OC) * kh * kw;
        const int64_t hw = static_cast<int64_t>(H) * Wd;
        if (b >= 0 && tp.needs_grad(b)) {
            Tensor<T>& db = tp.grad(b);
            detail::MapC<T> MG(G.data(), OC, static_cast<int64_t>(OH) * OW);
            for (int oc = 0; oc < OC; ++oc) db[oc] += MG.row(oc).sum();
        }
        std::vector<T> gcol(static_cast<size_t>(ok * hw));
        im2col(G.data(), OC, OH, OW, kh, kw, stride, pad, gcol.data(), H, Wd);
        detail::MapC<T> MGCol(gcol.data(), ok, hw);
        if (tp.needs_grad(x)) {
            Tensor<T>& dX = tp.grad(x);
            detail::MapM<T> MdX(dX.data(), IC, hw);
            detail::MapC<T> MW(W2.data(), IC, ok);
            MdX.noalias() += MW * MGCol;
        }
        if (tp.needs_grad(w)) {
            Tensor<T>& dW = tp.grad(w);
            detail::MapM<T> MdW(dW.data(), IC, ok);
            detail::MapC<T> MX(X2.data(), IC, hw);
            MdW.noalias() += MX * MGCol.transpose();
        }
    });
}

// ---- normalizations --------------------------------------------------------

template <typename T>
int softmax_rows(Tape<T>& t, int a) {
    const Tensor<T>& A = t.val(a);
    require(A.rank() == 2, "softmax_rows: expected rank-2 input");
    const int64_t R = A.dim(0), C = A.dim(1);
    Tensor<T> y({R, C});
    for (int64_t r = 0; r < R; ++r) {
        const T* xr = A.data() + r * C;
        T* yr = y.data() + r * C;
        double mx = static_cast<double>(xr[0]);
        for (int64_t c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(xr[c]));
        double s = 0;
        for (int64_t c = 0; c < C; ++c) {
            double e = std::exp(static_cast<double>(xr[c]) - mx);
            yr[c] = static_cast<T>(e);
            s += e;
        }
        for (int64_t c = 0; c < C; ++c) yr[c] = static_cast<T>(static_cast<double>(yr[c]) / s);
    }
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, R, C](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        const Tensor<T>& Y = tp.val(self);
        Tensor<T>& da = tp.grad(a);
        for (int64_t r = 0; r < R; ++r) {
            const T* gr = g.data() + r * C;
            const T* yr = Y.data() + r * C;
            T* dr = da.data() + r * C;
            double dot = 0;
            for (int64_t c = 0; c < C; ++c) dot += static_cast<double>(gr[c]) * yr[c];
            for (int64_t c = 0; c < C; ++c)
                dr[c] += static_cast<T>(yr[c] * (static_cast<double>(gr[c]) - dot));
        }
    });
}

// Per-column sum normalization with a clamped denominator.
template <typename T>
int normalize_cols(Tape<T>& t, int a, double eps) {
    const Tensor<T>& A = t.val(a);
    require(A.rank() == 2, "normalize_cols: expected rank-2 input");
    const int64_t R = A.dim(0), C = A.dim(1);
    Tensor<T> y({R, C});
    std::vector<double> denom(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c) {
        double s = 0;
        for (int64_t r = 0; r < R; ++r) s += static_cast<double>(A[r * C + c]);
        denom[static_cast<size_t>(c)] = std::max(s, eps);
    }
    for (int64_t r = 0; r < R; ++r)
        for (int64_t c = 0; c < C; ++c)
            y[r * C + c] = static_cast<T>(static_cast<double>(A[r * C + c]) / denom[static_cast<size_t>(c)]);
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, eps, R, C](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad(self);
        const Tensor<T>& A2 = tp.val(a);
        Tensor<T>& da = tp.grad(a);
        for (int64_t c = 0; c < C; ++c) {
            double s = 0;
            for (int64_t r = 0; r < R; ++r) s += static_cast<double>(A2[r * C + c]);
            const bool clamped = s <= eps;
            const double d = std::max(s, eps);
            double gx = 0;
            for (int64_t r = 0; r < R; ++r)
                gx += static_cast<double>(g[r * C + c]) * static_cast<double>(A2[r * C + c]);
            for (int64_t r = 0; r < R; ++r) {
                double gi = static_cast<double>(g[r * C + c]) / d;
                if (!clamped) gi -= gx / (d * d);
                da[r * C + c] += static_cast<T>(gi);
            }
        }
    });
}

// ---- reductions and losses -------------------------------------------------

template <typename T>
int sum_all(Tape<T>& t, int a) {
    const Tensor<T>& A = t.val(a);
    double s = 0;
    for (int64_t i = 0; i < A.numel(); ++i) s += static_cast<double>(A[i]);
    Tensor<T> y = Tensor<T>::scalar(static_cast<T>(s));
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a](Tape<T>& tp, int self) {
        const T g = tp.grad(self)[0];
        Tensor<T>& da = tp.grad(a);
        for (int64_t i = 0; i < da.numel(); ++i) da[i] += g;
    });
}

template <typename T>
int mean_all(Tape<T>& t, int a) {
    return scale(t, sum_all(t, a), 1.0 / static_cast<double>(t.val(a).numel()));
}

// sqrt of a non-negative scalar; gradient clamped near zero.
template <typename T>
int sqrt_scalar(Tape<T>& t, int a) {
    const Tensor<T>& A = t.val(a);
    require(A.numel() == 1, "sqrt_scalar: expected a scalar");
    double v = std::sqrt(std::max(0.0, static_cast<double>(A[0])));
    Tensor<T> y = Tensor<T>::scalar(static_cast<T>(v));
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    return t.push(std::move(y), true, [a, v](Tape<T>& tp, int self) {
        const double g = static_cast<double>(tp.grad(self)[0]);
        tp.grad(a)[0] += static_cast<T>(g * 0.5 / std::max(v, 1e-12));
    });
}

template <typename T>
int frobenius_norm(Tape<T>& t, int a) {
    return sqrt_scalar(t, sum_all(t, mul(t, a, a)));
}

// Mean squared error against a fixed target.
template <typename T>
int mse(Tape<T>& t, int a, const Tensor<T>& target) {
    const Tensor<T>& A = t.val(a);
    require(A.same_shape(target), "mse: shape mismatch " + shape_str(A.shape()) + " vs " +
                                      shape_str(target.shape()));
    const int64_t n = A.numel();
    double s = 0;
    for (int64_t i = 0; i < n; ++i) {
        double d = static_cast<double>(A[i]) - static_cast<double>(target[i]);
        s += d * d;
    }
    Tensor<T> y = Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(n)));
    if (!detail::wants(t, a)) return t.constant(std::move(y));
    Tensor<T> tgt = target;
    return t.push(std::move(y), true, [a, tgt = std::move(tgt), n](Tape<T>& tp, int self) {
        const double g = static_cast<double>(tp.grad(self)[0]);
        const Tensor<T>& A2 = tp.val(a);
        Tensor<T>& da = tp.grad(a);
        const double c = 2.0 * g / static_cast<double>(n);
        for (int64_t i = 0; i < n; ++i)
            da[i] += static_cast<T>(c * (static_cast<double>(A2[i]) - static_cast<double>(tgt[i])));
    });
}

inline constexpr double kBceEps = 1e-8;

// Sum-reduced binary cross entropy of a prediction vector against a fixed
// binary mask. Predictions are clamped to [eps, 1-eps] internally (in double,
// so the clamp is meaningful even when T is float).
template <typename T>
int bce_sum(Tape<T>& t, const Tensor<T>& mask, int w) {
    const Tensor<T>& Wv = t.val(w);
    require(Wv.numel() == mask.numel(), "bce_sum: length mismatch");
    const int64_t n = Wv.numel();
    double s = 0;
    for (int64_t i = 0; i < n; ++i) {
        double wv = std::min(std::max(static_cast<double>(Wv[i]), kBceEps), 1.0 - kBceEps);
        double m = static_cast<double>(mask[i]);
        s += -m * std::log(wv) - (1.0 - m) * std::log(1.0 - wv);
    }
    Tensor<T> y = Tensor<T>::scalar(static_cast<T>(s));
    if (!detail::wants(t, w)) return t.constant(std::move(y));
    Tensor<T> m = mask;
    return t.push(std::move(y), true, [w, m = std::move(m), n](Tape<T>& tp, int self) {
        const double g = static_cast<double>(tp.grad(self)[0]);
        const Tensor<T>& W2 = tp.val(w);
        Tensor<T>& dw = tp.grad(w);
        for (int64_t i = 0; i < n; ++i) {
            double wv = static_cast<double>(W2[i]);
            if (wv <= kBceEps || wv >= 1.0 - kBceEps) continue; // clamped: zero grad
            double mi = static_cast<double>(m[i]);
            dw[i] += static_cast<T>(g * (-mi / wv + (1.0 - mi) / (1.0 - wv)));
        }
    });
}

} // namespace slotmotion
