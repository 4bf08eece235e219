#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "litecan/errors.hpp"
#include "litecan/rng.hpp"

namespace litecan {

// Multiply-accumulate counters, incremented by the forward pass of matmul and
// bmm. Tests assert on these instead of wall-clock time.
struct OpCounters {
    uint64_t matmul_macs = 0;
    uint64_t bmm_macs = 0;
    void reset() { matmul_macs = 0; bmm_macs = 0; }
};

inline OpCounters& op_counters() {
    thread_local OpCounters counters;
    return counters;
}

// Dense row-major tensor. Storage is shared, so copies are cheap views onto
// the same buffer; `grad` is non-null exactly when `requires_grad` is set.
template <typename T>
struct TensorT {
    std::vector<int64_t> shape;
    std::shared_ptr<std::vector<T>> data;
    std::shared_ptr<std::vector<T>> grad;
    bool requires_grad = false;

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }
    int rank() const { return static_cast<int>(shape.size()); }
    T* ptr() { return data->data(); }
    const T* ptr() const { return data->data(); }
    T* gptr() { return grad->data(); }
    const T* gptr() const { return grad->data(); }

    void zero_grad() {
        if (grad) std::fill(grad->begin(), grad->end(), T(0));
    }
};

namespace detail {

inline std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace detail

template <typename T>
TensorT<T> zeros(const std::vector<int64_t>& shape, bool requires_grad = false) {
    TensorT<T> t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<T>>(static_cast<size_t>(t.numel()), T(0));
    t.requires_grad = requires_grad;
    if (requires_grad)
        t.grad = std::make_shared<std::vector<T>>(static_cast<size_t>(t.numel()), T(0));
    return t;
}

template <typename T>
TensorT<T> full(const std::vector<int64_t>& shape, T value, bool requires_grad = false) {
    TensorT<T> t = zeros<T>(shape, requires_grad);
    std::fill(t.data->begin(), t.data->end(), value);
    return t;
}

template <typename T>
TensorT<T> from_vector(const std::vector<int64_t>& shape, std::vector<T> values,
                       bool requires_grad = false) {
    TensorT<T> t;
    t.shape = shape;
    detail::require(static_cast<int64_t>(values.size()) == t.numel(),
                    "from_vector: " + std::to_string(values.size()) + " values for shape " +
                        detail::shape_str(shape));
    t.data = std::make_shared<std::vector<T>>(std::move(values));
    t.requires_grad = requires_grad;
    if (requires_grad)
        t.grad = std::make_shared<std::vector<T>>(static_cast<size_t>(t.numel()), T(0));
    return t;
}

// Records backward closures in forward order; `backward` replays them in
// reverse. A tape is single-use: clear it before reusing.
template <typename T>
class TapeT {
public:
    explicit TapeT(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    void backward(TensorT<T>& loss) {
        detail::require(loss.numel() == 1, "backward: loss must be scalar, got shape " +
                                               detail::shape_str(loss.shape));
        detail::require(loss.requires_grad, "backward: loss does not require grad");
        (*loss.grad)[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

private:
    bool recording_;
    std::vector<std::function<void()>> nodes_;
};

namespace detail {

template <typename T>
bool track(const TapeT<T>& tape, std::initializer_list<const TensorT<T>*> inputs) {
    if (!tape.recording()) return false;
    for (const TensorT<T>* t : inputs)
        if (t->requires_grad) return true;
    return false;
}

template <typename T>
void mark_output(TensorT<T>& out) {
    out.requires_grad = true;
    out.grad = std::make_shared<std::vector<T>>(static_cast<size_t>(out.numel()), T(0));
}

// Walks every index of `shape` in row-major order, handing the callback the
// linear offsets under the identity layout and under `perm` simultaneously.
template <typename T, typename F>
void for_each_permuted(const std::vector<int64_t>& in_shape, const std::vector<int>& perm, F&& f) {
    const int r = static_cast<int>(in_shape.size());
    std::vector<int64_t> out_shape(r), out_strides(r), contrib(r);
    for (int i = 0; i < r; ++i) out_shape[i] = in_shape[perm[i]];
    int64_t s = 1;
    for (int i = r - 1; i >= 0; --i) {
        out_strides[i] = s;
        s *= out_shape[i];
    }
    for (int i = 0; i < r; ++i) contrib[perm[i]] = out_strides[i];
    int64_t total = 1;
    for (int64_t d : in_shape) total *= d;
    std::vector<int64_t> idx(r, 0);
    int64_t out_lin = 0;
    for (int64_t in_lin = 0; in_lin < total; ++in_lin) {
        f(in_lin, out_lin);
        for (int d = r - 1; d >= 0; --d) {
            ++idx[d];
            out_lin += contrib[d];
            if (idx[d] < in_shape[d]) break;
            out_lin -= contrib[d] * in_shape[d];
            idx[d] = 0;
        }
    }
}

}  // namespace detail

// C = A x B for 2-D operands. The accumulation into each output element runs
// over k in ascending order, so results are reproducible bit for bit.
template <typename T>
TensorT<T> matmul(TapeT<T>& tape, const TensorT<T>& a, const TensorT<T>& b) {
    detail::require(a.rank() == 2 && b.rank() == 2 && a.shape[1] == b.shape[0],
                    "matmul: incompatible shapes " + detail::shape_str(a.shape) + " x " +
                        detail::shape_str(b.shape));
    const int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    TensorT<T> out = zeros<T>({m, n});
    const T* A = a.ptr();
    const T* B = b.ptr();
    T* C = out.ptr();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t kk = 0; kk < k; ++kk) {
            const T av = A[i * k + kk];
            const T* brow = B + kk * n;
            T* crow = C + i * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    op_counters().matmul_macs += static_cast<uint64_t>(m) * k * n;
    if (detail::track(tape, {&a, &b})) {
        detail::mark_output(out);
        tape.record([a, b, out, m, k, n]() {
            const T* G = out.gptr();
            const T* A = a.ptr();
            const T* B = b.ptr();
            if (a.requires_grad) {
                T* dA = a.grad->data();
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t kk = 0; kk < k; ++kk) {
                        T acc = 0;
                        for (int64_t j = 0; j < n; ++j) acc += G[i * n + j] * B[kk * n + j];
                        dA[i * k + kk] += acc;
                    }
            }
            if (b.requires_grad) {
                T* dB = b.grad->data();
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t kk = 0; kk < k; ++kk) {
                        const T av = A[i * k + kk];
                        for (int64_t j = 0; j < n; ++j) dB[kk * n + j] += av * G[i * n + j];
                    }
            }
        });
    }
    return out;
}

// Batched matmul: [b,m,k] x [b,k,n] -> [b,m,n].
template <typename T>
TensorT<T> bmm(TapeT<T>& tape, const TensorT<T>& a, const TensorT<T>& b) {
    detail::require(a.rank() == 3 && b.rank() == 3 && a.shape[0] == b.shape[0] &&
                        a.shape[2] == b.shape[1],
                    "bmm: incompatible shapes " + detail::shape_str(a.shape) + " x " +
                        detail::shape_str(b.shape));
    const int64_t bs = a.shape[0], m = a.shape[1], k = a.shape[2], n = b.shape[2];
    TensorT<T> out = zeros<T>({bs, m, n});
    for (int64_t bi = 0; bi < bs; ++bi) {
        const T* A = a.ptr() + bi * m * k;
        const T* B = b.ptr() + bi * k * n;
        T* C = out.ptr() + bi * m * n;
        for (int64_t i = 0; i < m; ++i)
            for (int64_t kk = 0; kk < k; ++kk) {
                const T av = A[i * k + kk];
                const T* brow = B + kk * n;
                T* crow = C + i * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
    }
    op_counters().bmm_macs += static_cast<uint64_t>(bs) * m * k * n;
    if (detail::track(tape, {&a, &b})) {
        detail::mark_output(out);
        tape.record([a, b, out, bs, m, k, n]() {
            for (int64_t bi = 0; bi < bs; ++bi) {
                const T* G = out.gptr() + bi * m * n;
                const T* A = a.ptr() + bi * m * k;
                const T* B = b.ptr() + bi * k * n;
                if (a.requires_grad) {
                    T* dA = a.grad->data() + bi * m * k;
                    for (int64_t i = 0; i < m; ++i)
                        for (int64_t kk = 0; kk < k; ++kk) {
                            T acc = 0;
                            for (int64_t j = 0; j < n; ++j) acc += G[i * n + j] * B[kk * n + j];
                            dA[i * k + kk] += acc;
                        }
                }
                if (b.requires_grad) {
                    T* dB = b.grad->data() + bi * k * n;
                    for (int64_t i = 0; i < m; ++i)
                        for (int64_t kk = 0; kk < k; ++kk) {
                            const T av = A[i * k + kk];
                            for (int64_t j = 0; j < n; ++j) dB[kk * n + j] += av * G[i * n + j];
                        }
                }
            }
        });
    }
    return out;
}

// Reinterprets the buffer under a new shape with the same element count.
// Shares storage and gradient, so no tape node is needed.
template <typename T>
TensorT<T> reshape(TapeT<T>& tape, const TensorT<T>& x, const std::vector<int64_t>& shape) {
    TensorT<T> out;
    out.shape = shape;
    detail::require(out.numel() == x.numel(), "reshape: cannot view " + detail::shape_str(x.shape) +
                                                  " as " + detail::shape_str(shape));
    out.data = x.data;
    if (tape.recording() && x.requires_grad) {
        out.requires_grad = true;
        out.grad = x.grad;
    }
    return out;
}

template <typename T>
TensorT<T> permute(TapeT<T>& tape, const TensorT<T>& x, const std::vector<int>& perm) {
    detail::require(static_cast<int>(perm.size()) == x.rank(),
                    "permute: perm size mismatch for shape " + detail::shape_str(x.shape));
    std::vector<bool> seen(perm.size(), false);
    for (int p : perm) {
        detail::require(p >= 0 && p < x.rank() && !seen[p], "permute: invalid permutation");
        seen[p] = true;
    }
    std::vector<int64_t> out_shape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = x.shape[perm[i]];
    TensorT<T> out = zeros<T>(out_shape);
    const T* src = x.ptr();
    T* dst = out.ptr();
    detail::for_each_permuted<T>(x.shape, perm,
                                 [&](int64_t in_lin, int64_t out_lin) { dst[out_lin] = src[in_lin]; });
    if (detail::track(tape, {&x})) {
        detail::mark_output(out);
        tape.record([x, out, perm]() {
            T* dx = x.grad->data();
            const T* g = out.gptr();
            detail::for_each_permuted<T>(
                x.shape, perm, [&](int64_t in_lin, int64_t out_lin) { dx[in_lin] += g[out_lin]; });
        });
    }
    return out;
}

// Replicates x along a new leading axis: [d...] -> [copies, d...].
template <typename T>
TensorT<T> expand_front(TapeT<T>& tape, const TensorT<T>& x, int64_t copies) {
    detail::require(copies > 0, "expand_front: copies must be positive");
    std::vector<int64_t> out_shape;
    out_shape.push_back(copies);
    out_shape.insert(out_shape.end(), x.shape.begin(), x.shape.end());
    TensorT<T> out = zeros<T>(out_shape);
    const int64_t n = x.numel();
    for (int64_t c = 0; c < copies; ++c)
        std::copy(x.ptr(), x.ptr() + n, out.ptr() + c * n);
    if (detail::track(tape, {&x})) {
        detail::mark_output(out);
        tape.record([x, out, copies, n]() {
            T* dx = x.grad->data();
            const T* g = out.gptr();
            for (int64_t c = 0; c < copies; ++c)
                for (int64_t i = 0; i < n; ++i) dx[i] += g[c * n + i];
        });
    }
    return out;
}

template <typename T>
TensorT<T> concat(TapeT<T>& tape, const TensorT<T>& a, const TensorT<T>& b, int dim) {
    detail::require(a.rank() == b.rank() && dim >= 0 && dim < a.rank(),
                    "concat: rank mismatch or bad dim");
    for (int d = 0; d < a.rank(); ++d)
        detail::require(d == dim || a.shape[d] == b.shape[d],
                        "concat: shapes " + detail::shape_str(a.shape) + " and " +
                            detail::shape_str(b.shape) + " differ off dim " + std::to_string(dim));
    std::vector<int64_t> out_shape = a.shape;
    out_shape[dim] += b.shape[dim];
    TensorT<T> out = zeros<T>(out_shape);
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < dim; ++d) outer *= a.shape[d];
    for (int d = dim + 1; d < a.rank(); ++d) inner *= a.shape[d];
    const int64_t ca = a.shape[dim] * inner, cb = b.shape[dim] * inner;
    for (int64_t o = 0; o < outer; ++o) {
        std::copy(a.ptr() + o * ca, a.ptr() + (o + 1) * ca, out.ptr() + o * (ca + cb));
        std::copy(b.ptr() + o * cb, b.ptr() + (o + 1) * cb, out.ptr() + o * (ca + cb) + ca);
    }
    if (detail::track(tape, {&a, &b})) {
        detail::mark_output(out);
        tape.record([a, b, out, outer, ca, cb]() {
            const T* g = out.gptr();
            for (int64_t o = 0; o < outer; ++o) {
                if (a.requires_grad) {
                    T* da = a.grad->data() + o * ca;
                    const T* go = g + o * (ca + cb);
                    for (int64_t i = 0; i < ca; ++i) da[i] += go[i];
                }
                if (b.requires_grad) {
                    T* db = b.grad->data() + o * cb;
                    const T* go = g + o * (ca + cb) + ca;
                    for (int64_t i = 0; i < cb; ++i) db[i] += go[i];
                }
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> slice(TapeT<T>& tape, const TensorT<T>& x, int dim, int64_t start, int64_t len) {
    detail::require(dim >= 0 && dim < x.rank() && start >= 0 && len > 0 &&
                        start + len <= x.shape[dim],
                    "slice: bounds [" + std::to_string(start) + "," + std::to_string(start + len) +
                        ") invalid for dim " + std::to_string(dim) + " of " +
                        detail::shape_str(x.shape));
    std::vector<int64_t> out_shape = x.shape;
    out_shape[dim] = len;
    TensorT<T> out = zeros<T>(out_shape);
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < dim; ++d) outer *= x.shape[d];
    for (int d = dim + 1; d < x.rank(); ++d) inner *= x.shape[d];
    const int64_t in_row = x.shape[dim] * inner, out_row = len * inner;
    for (int64_t o = 0; o < outer; ++o)
        std::copy(x.ptr() + o * in_row + start * inner, x.ptr() + o * in_row + (start + len) * inner,
                  out.ptr() + o * out_row);
    if (detail::track(tape, {&x})) {
        detail::mark_output(out);
        tape.record([x, out, outer, inner, in_row, out_row, start]() {
            T* dx = x.grad->data();
            const T* g = out.gptr();
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < out_row; ++i)
                    dx[o * in_row + start * inner + i] += g[o * out_row + i];
        });
    }
    return out;
}

template <typename T>
TensorT<T> add(TapeT<T>& tape, const TensorT<T>& a, const TensorT<T>& b) {
    detail::require(a.shape == b.shape, "add: shape mismatch " + detail::shape_str(a.shape) +
                                            " vs " + detail::shape_str(b.shape));
    TensorT<T> out = zeros<T>(a.shape);
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] + b.ptr()[i];
    if (detail::track(tape, {&a, &b})) {
        detail::mark_output(out);
        tape.record([a, b, out, n]() {
            const T* g = out.gptr();
            if (a.requires_grad) {
                T* da = a.grad->data();
                for (int64_t i = 0; i < n; ++i) da[i] += g[i];
            }
            if (b.requires_grad) {
                T* db = b.grad->data();
                for (int64_t i = 0; i < n; ++i) db[i] += g[i];
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> mul(TapeT<T>& tape, const TensorT<T>& a, const TensorT<T>& b) {
    detail::require(a.shape == b.shape, "mul: shape mismatch " + detail::shape_str(a.shape) +
                                            " vs " + detail::shape_str(b.shape));
    TensorT<T> out = zeros<T>(a.shape);
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] * b.ptr()[i];
    if (detail::track(tape, {&a, &b})) {
        detail::mark_output(out);
        tape.record([a, b, out, n]() {
            const T* g = out.gptr();
            if (a.requires_grad) {
                T* da = a.grad->data();
                const T* bv = b.ptr();
                for (int64_t i = 0; i < n; ++i) da[i] += g[i] * bv[i];
            }
            if (b.requires_grad) {
                T* db = b.grad->data();
                const T* av = a.ptr();
                for (int64_t i = 0; i < n; ++i) db[i] += g[i] * av[i];
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> scale(TapeT<T>& tape, const TensorT<T>& x, T factor) {
    TensorT<T> out = zeros<T>(x.shape);
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) out.ptr()[i] = factor * x.ptr()[i];
    if (detail::track(tape, {&x})) {
        detail::mark_output(out);
        tape.record([x, out, factor, n]() {
            T* dx = x.grad->data();
            const T* g = out.gptr();
            for (int64_t i = 0; i < n; ++i) dx[i] += factor * g[i];
        });
    }
    return out;
}

// x: [..., n], bias: [n], broadcast over all leading dims.
template <typename T>
TensorT<T> add_bias(TapeT<T>& tape, const TensorT<T>& x, const TensorT<T>& bias) {
    detail::require(bias.rank() == 1 && x.rank() >= 1 && x.shape.back() == bias.shape[0],
                    "add_bias: bias " + detail::shape_str(bias.shape) + " does not match " +
                        detail::shape_str(x.shape));
    const int64_t n = bias.shape[0], rows = x.numel() / n;
    TensorT<T> out = zeros<T>(x.shape);
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < n; ++j) out.ptr()[r * n + j] = x.ptr()[r * n + j] + bias.ptr()[j];
    if (detail::track(tape, {&x, &bias})) {
        detail::mark_output(out);
        tape.record([x, bias, out, rows, n]() {
            const T* g = out.gptr();
            if (x.requires_grad) {
                T* dx = x.grad->data();
                for (int64_t i = 0; i < rows * n; ++i) dx[i] += g[i];
            }
            if (bias.requires_grad) {
                T* db = bias.grad->data();
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < n; ++j) db[j] += g[r * n + j];
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> relu(TapeT<T>& tape, const TensorT<T>& x) {
    TensorT<T> out = zeros<T>(x.shape);
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) out.ptr()[i] = x.ptr()[i] > T(0) ? x.ptr()[i] : T(0);
    if (detail::track(tape, {&x})) {
        detail::mark_output(out);
        tape.record([x, out, n]() {
            T* dx = x.grad->data();
            const T* g = out.gptr();
            const T* xv = x.ptr();
            for (int64_t i = 0; i < n; ++i)
                if (xv[i] > T(0)) dx[i] += g[i];
        });
    }
    return out;
}

// Inverted dropout. Identity (and no RNG consumption) when rate == 0 or the
// tape is not recording, so evaluation never perturbs the stream.
template <typename T>
TensorT<T> dropout(TapeT<T>& tape, const TensorT<T>& x, double rate, SplitMix64& rng) {
    detail::require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
    if (rate == 0.0 || !tape.recording()) return x;
    const int64_t n = x.numel();
    const T keep_scale = T(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(n));
    TensorT<T> out = zeros<T>(x.shape);
    for (int64_t i = 0; i < n; ++i) {
        const bool keep = rng.uniform() >= rate;
        (*mask)[i] = keep;
        out.ptr()[i] = keep ? x.ptr()[i] * keep_scale : T(0);
    }
    if (detail::track(tape, {&x})) {
        detail::mark_output(out);
        tape.record([x, out, mask, keep_scale, n]() {
            T* dx = x.grad->data();
            const T* g = out.gptr();
            for (int64_t i = 0; i < n; ++i)
                if ((*mask)[i]) dx[i] += g[i] * keep_scale;
        });
    }
    return out;
}

// Row-wise softmax over the last dimension, computed with max subtraction.
template <typename T>
TensorT<T> softmax_lastdim(TapeT<T>& tape, const TensorT<T>& x) {
    detail::require(x.rank() >= 1, "softmax_lastdim: rank must be >= 1");
    const int64_t n = x.shape.back(), rows = x.numel() / n;
    TensorT<T> out = zeros<T>(x.shape);
    for (int64_t r = 0; r < rows; ++r) {
        const T* xv = x.ptr() + r * n;
        T* yv = out.ptr() + r * n;
        T mx = xv[0];
        for (int64_t j = 1; j < n; ++j) mx = std::max(mx, xv[j]);
        T sum = 0;
        for (int64_t j = 0; j < n; ++j) {
            yv[j] = std::exp(xv[j] - mx);
            sum += yv[j];
        }
        const T inv = T(1) / sum;
        for (int64_t j = 0; j < n; ++j) yv[j] *= inv;
    }
    if (detail::track(tape, {&x})) {
        detail::mark_output(out);
        tape.record([x, out, rows, n]() {
            T* dx = x.grad->data();
            const T* g = out.gptr();
            const T* y = out.ptr();
            for (int64_t r = 0; r < rows; ++r) {
                T dot = 0;
                for (int64_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
                for (int64_t j = 0; j < n; ++j)
                    dx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
            }
        });
    }
    return out;
}

// Row-wise layer normalization over the last dimension with biased variance,
// followed by an affine transform with gamma and beta.
template <typename T>
TensorT<T> layer_norm(TapeT<T>& tape, const TensorT<T>& x, const TensorT<T>& gamma,
                      const TensorT<T>& beta, T eps = T(1e-5)) {
    detail::require(gamma.rank() == 1 && beta.rank() == 1 && x.rank() >= 1 &&
                        gamma.shape[0] == x.shape.back() && beta.shape[0] == x.shape.back(),
                    "layer_norm: parameter shapes do not match " + detail::shape_str(x.shape));
    const int64_t n = x.shape.back(), rows = x.numel() / n;
    TensorT<T> out = zeros<T>(x.shape);
    auto xhat = std::make_shared<std::vector<T>>(static_cast<size_t>(x.numel()));
    auto inv_sigma = std::make_shared<std::vector<T>>(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const T* xv = x.ptr() + r * n;
        T mean = 0;
        for (int64_t j = 0; j < n; ++j) mean += xv[j];
        mean /= T(n);
        T var = 0;
        for (int64_t j = 0; j < n; ++j) {
            const T d = xv[j] - mean;
            var += d * d;
        }
        var /= T(n);
        const T inv = T(1) / std::sqrt(var + eps);
        (*inv_sigma)[r] = inv;
        for (int64_t j = 0; j < n; ++j) {
            const T h = (xv[j] - mean) * inv;
            (*xhat)[r * n + j] = h;
            out.ptr()[r * n + j] = h * gamma.ptr()[j] + beta.ptr()[j];
        }
    }
    if (detail::track(tape, {&x, &gamma, &beta})) {
        detail::mark_output(out);
        tape.record([x, gamma, beta, out, xhat, inv_sigma, rows, n]() {
            const T* g = out.gptr();
            for (int64_t r = 0; r < rows; ++r) {
                const T* gr = g + r * n;
                const T* hr = xhat->data() + r * n;
                if (gamma.requires_grad) {
                    T* dgamma = gamma.grad->data();
                    for (int64_t j = 0; j < n; ++j) dgamma[j] += gr[j] * hr[j];
                }
                if (beta.requires_grad) {
                    T* dbeta = beta.grad->data();
                    for (int64_t j = 0; j < n; ++j) dbeta[j] += gr[j];
                }
                if (x.requires_grad) {
                    T* dx = x.grad->data() + r * n;
                    T m1 = 0, m2 = 0;
                    for (int64_t j = 0; j < n; ++j) {
                        const T gg = gr[j] * gamma.ptr()[j];
                        m1 += gg;
                        m2 += gg * hr[j];
                    }
                    m1 /= T(n);
                    m2 /= T(n);
                    const T inv = (*inv_sigma)[r];
                    for (int64_t j = 0; j < n; ++j) {
                        const T gg = gr[j] * gamma.ptr()[j];
                        dx[j] += (gg - m1 - hr[j] * m2) * inv;
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> sum_all(TapeT<T>& tape, const TensorT<T>& x) {
    TensorT<T> out = zeros<T>({1});
    const int64_t n = x.numel();
    T acc = 0;
    for (int64_t i = 0; i < n; ++i) acc += x.ptr()[i];
    out.ptr()[0] = acc;
    if (detail::track(tape, {&x})) {
        detail::mark_output(out);
        tape.record([x, out, n]() {
            T* dx = x.grad->data();
            const T g = out.gptr()[0];
            for (int64_t i = 0; i < n; ++i) dx[i] += g;
        });
    }
    return out;
}

template <typename T>
TensorT<T> mean_all(TapeT<T>& tape, const TensorT<T>& x) {
    TensorT<T> out = sum_all(tape, x);
    return scale(tape, out, T(1) / T(x.numel()));
}

// Index of the largest entry in each row of the last dimension. Ties resolve
// to the lowest index. Not differentiable.
template <typename T>
std::vector<int> argmax_lastdim(const TensorT<T>& x) {
    const int64_t n = x.shape.back(), rows = x.numel() / n;
    std::vector<int> out(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const T* xv = x.ptr() + r * n;
        int best = 0;
        for (int64_t j = 1; j < n; ++j)
            if (xv[j] > xv[best]) best = static_cast<int>(j);
        out[r] = best;
    }
    return out;
}

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace litecan
