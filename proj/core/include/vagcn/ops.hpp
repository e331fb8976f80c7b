#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "vagcn/parallel.hpp"
#include "vagcn/tensor.hpp"

// Differentiable primitives. Every op validates shapes, computes its result
// eagerly, and when an input is tape-bound registers a backward rule that
// accumulates into the tape's gradient buffers. All kernels are deterministic:
// parallel splits are by output row and each element is produced by one fixed
// sequential reduction.

namespace vagcn {

// Per-point neighbor slots shared by gather/graph ops. `idx` holds, for each
// of batch*n points, k neighbor ids in [0, n); `pad` marks self-padded slots.
struct IndexTable {
    size_t batch = 1;
    size_t n = 0;
    size_t k = 0;
    std::shared_ptr<const std::vector<int32_t>> idx;
    std::shared_ptr<const std::vector<uint8_t>> pad;

    size_t rows() const { return batch * n; }
    int32_t at(size_t b, size_t i, size_t j) const { return (*idx)[(b * n + i) * k + j]; }
    bool is_pad(size_t b, size_t i, size_t j) const {
        return pad && (*pad)[(b * n + i) * k + j] != 0;
    }
};

enum class EwiseOp { add, sub, mul, div };

enum class ReduceOp { sum, max };

enum class Activation { none, relu, leaky_relu };

namespace detail {

constexpr size_t kParGrain = 1 << 14;

struct Bcast {
    Shape out;
    std::vector<size_t> sa, sb;  // element strides of a/b in out coordinates (0 = broadcast)
    bool a_dense = true, b_dense = true;
};

inline Bcast make_bcast(const Shape& a, const Shape& b, const char* what) {
    const size_t rank = std::max(a.size(), b.size());
    Bcast bc;
    bc.out.resize(rank);
    bc.sa.assign(rank, 0);
    bc.sb.assign(rank, 0);
    // Right-aligned extents; extent 1 stretches.
    for (size_t d = 0; d < rank; ++d) {
        const size_t ea = d < a.size() ? a[a.size() - 1 - d] : 1;
        const size_t eb = d < b.size() ? b[b.size() - 1 - d] : 1;
        if (ea != eb && ea != 1 && eb != 1)
            throw ShapeError(std::string(what) + ": shapes " + shape_str(a) + " and " +
                             shape_str(b) + " are not broadcast-compatible");
        bc.out[rank - 1 - d] = std::max(ea, eb);
    }
    size_t stra = 1, strb = 1;
    for (size_t d = 0; d < rank; ++d) {
        const size_t pos = rank - 1 - d;
        const size_t ea = d < a.size() ? a[a.size() - 1 - d] : 1;
        const size_t eb = d < b.size() ? b[b.size() - 1 - d] : 1;
        bc.sa[pos] = (ea == 1 && bc.out[pos] != 1) ? 0 : stra;
        bc.sb[pos] = (eb == 1 && bc.out[pos] != 1) ? 0 : strb;
        if (bc.sa[pos] == 0 && bc.out[pos] != 1) bc.a_dense = false;
        if (bc.sb[pos] == 0 && bc.out[pos] != 1) bc.b_dense = false;
        stra *= ea;
        strb *= eb;
    }
    return bc;
}

// Offset of a flattened leading-row index (all dims but the last).
inline size_t row_offset(size_t row, const Shape& out, const std::vector<size_t>& strides) {
    size_t off = 0;
    for (size_t d = out.size() - 1; d-- > 0;) {
        const size_t e = out[d];
        off += (row % e) * strides[d];
        row /= e;
    }
    return off;
}

template <class T, class F>
void bcast_forward(const Bcast& bc, const T* a, const T* b, T* out, F f) {
    const size_t inner = bc.out.back();
    const size_t rows = shape_numel(bc.out) / inner;
    const size_t ia = bc.sa.back(), ib = bc.sb.back();
    parallel_for(rows, kParGrain / std::max<size_t>(inner, 1) + 1, [&](size_t r0, size_t r1) {
        for (size_t r = r0; r < r1; ++r) {
            const T* pa = a + row_offset(r, bc.out, bc.sa);
            const T* pb = b + row_offset(r, bc.out, bc.sb);
            T* po = out + r * inner;
            if (ia == 1 && ib == 1)
                for (size_t i = 0; i < inner; ++i) po[i] = f(pa[i], pb[i]);
            else if (ia == 1)
                for (size_t i = 0; i < inner; ++i) po[i] = f(pa[i], pb[0]);
            else if (ib == 1)
                for (size_t i = 0; i < inner; ++i) po[i] = f(pa[0], pb[i]);
            else
                for (size_t i = 0; i < inner; ++i) po[i] = f(pa[0], pb[0]);
        }
    });
}

// Accumulates df(g, a, b) into the gradient of one input, walking the output
// space. Dense targets run in parallel; broadcast targets run sequentially so
// shared slots accumulate in a fixed order.
template <class T, class F>
void bcast_accumulate(const Bcast& bc, bool into_a, const T* go, const T* a, const T* b,
                      T* target, F df) {
    const size_t inner = bc.out.back();
    const size_t rows = shape_numel(bc.out) / inner;
    const size_t ia = bc.sa.back(), ib = bc.sb.back();
    const size_t it = into_a ? ia : ib;
    const bool dense = into_a ? bc.a_dense : bc.b_dense;
    auto body = [&](size_t r0, size_t r1) {
        for (size_t r = r0; r < r1; ++r) {
            const T* pa = a + row_offset(r, bc.out, bc.sa);
            const T* pb = b + row_offset(r, bc.out, bc.sb);
            T* pt = target + row_offset(r, bc.out, into_a ? bc.sa : bc.sb);
            const T* pg = go + r * inner;
            for (size_t i = 0; i < inner; ++i)
                pt[i * it] += df(pg[i], pa[i * ia], pb[i * ib]);
        }
    };
    if (dense)
        parallel_for(rows, kParGrain / std::max<size_t>(inner, 1) + 1, body);
    else
        body(0, rows);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops with numpy-style broadcasting.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> ewise(EwiseOp op, const Tensor<T>& a, const Tensor<T>& b) {
    const auto bc = detail::make_bcast(a.shape(), b.shape(), "ewise");
    Tensor<T> out(bc.out);
    switch (op) {
        case EwiseOp::add:
            detail::bcast_forward(bc, a.data(), b.data(), out.data(), [](T x, T y) { return x + y; });
            break;
        case EwiseOp::sub:
            detail::bcast_forward(bc, a.data(), b.data(), out.data(), [](T x, T y) { return x - y; });
            break;
        case EwiseOp::mul:
            detail::bcast_forward(bc, a.data(), b.data(), out.data(), [](T x, T y) { return x * y; });
            break;
        case EwiseOp::div:
            detail::bcast_forward(bc, a.data(), b.data(), out.data(), [](T x, T y) { return x / y; });
            break;
    }
    Tape<T>* tape = common_tape(a, b);
    if (tape && (a.requires_grad() || b.requires_grad())) {
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        tape->record([op, bc, a, b, on](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T* go = tp.grad_buf(on).data();
            if (a.requires_grad()) {
                T* ga = tp.grad_buf(a.node()).data();
                switch (op) {
                    case EwiseOp::add:
                    case EwiseOp::sub:
                        detail::bcast_accumulate(bc, true, go, a.data(), b.data(), ga,
                                                 [](T g, T, T) { return g; });
                        break;
                    case EwiseOp::mul:
                        detail::bcast_accumulate(bc, true, go, a.data(), b.data(), ga,
                                                 [](T g, T, T y) { return g * y; });
                        break;
                    case EwiseOp::div:
                        detail::bcast_accumulate(bc, true, go, a.data(), b.data(), ga,
                                                 [](T g, T, T y) { return g / y; });
                        break;
                }
            }
            if (b.requires_grad()) {
                T* gb = tp.grad_buf(b.node()).data();
                switch (op) {
                    case EwiseOp::add:
                        detail::bcast_accumulate(bc, false, go, a.data(), b.data(), gb,
                                                 [](T g, T, T) { return g; });
                        break;
                    case EwiseOp::sub:
                        detail::bcast_accumulate(bc, false, go, a.data(), b.data(), gb,
                                                 [](T g, T, T) { return -g; });
                        break;
                    case EwiseOp::mul:
                        detail::bcast_accumulate(bc, false, go, a.data(), b.data(), gb,
                                                 [](T g, T x, T) { return g * x; });
                        break;
                    case EwiseOp::div:
                        detail::bcast_accumulate(bc, false, go, a.data(), b.data(), gb,
                                                 [](T g, T x, T y) { return -g * x / (y * y); });
                        break;
                }
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return ewise(EwiseOp::add, a, b); }
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return ewise(EwiseOp::sub, a, b); }
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return ewise(EwiseOp::mul, a, b); }
template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) { return ewise(EwiseOp::div, a, b); }

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) { return mul(a, Tensor<T>::scalar(c)); }

// ---------------------------------------------------------------------------
// Matrix multiplication over the trailing two axes, leading axes broadcast.
// ---------------------------------------------------------------------------

namespace detail {

// C[M,N] += A[M,K] * B[K,N], rows [m0, m1).
template <class T>
void gemm_rows(size_t m0, size_t m1, size_t K, size_t N, const T* A, const T* B, T* C) {
    for (size_t m = m0; m < m1; ++m) {
        T* c = C + m * N;
        const T* a = A + m * K;
        for (size_t k = 0; k < K; ++k) {
            const T av = a[k];
            const T* b = B + k * N;
            for (size_t n = 0; n < N; ++n) c[n] += av * b[n];
        }
    }
}

// dA[M,K] += dC[M,N] * B[K,N]^T, rows [m0, m1).
template <class T>
void gemm_dA_rows(size_t m0, size_t m1, size_t K, size_t N, const T* dC, const T* B, T* dA) {
    for (size_t m = m0; m < m1; ++m) {
        const T* g = dC + m * N;
        T* da = dA + m * K;
        for (size_t k = 0; k < K; ++k) {
            const T* b = B + k * N;
            T acc = 0;
            for (size_t n = 0; n < N; ++n) acc += g[n] * b[n];
            da[k] += acc;
        }
    }
}

// dB[K, n0:n1) += sum_m A[m,k] * dC[m,n] over rows [0, M).
template <class T>
void gemm_dB_cols(size_t n0, size_t n1, size_t M, size_t K, size_t N, const T* A, const T* dC,
                  T* dB) {
    for (size_t m = 0; m < M; ++m) {
        const T* a = A + m * K;
        const T* g = dC + m * N;
        for (size_t k = 0; k < K; ++k) {
            const T av = a[k];
            T* db = dB + k * N;
            for (size_t n = n0; n < n1; ++n) db[n] += av * g[n];
        }
    }
}

struct MatDims {
    size_t M, K, N, lead;                 // lead = product of broadcast leading extents
    std::vector<size_t> lead_shape;       // broadcast leading extents
    std::vector<size_t> la, lb;           // per-leading-dim matrix strides (0 = broadcast)
    bool a_lead_dense = true, b_lead_dense = true;
};

inline MatDims matmul_dims(const Shape& a, const Shape& b) {
    if (a.size() < 2 || b.size() < 2)
        throw ShapeError("matmul: operands must have rank >= 2, got " + shape_str(a) + " and " +
                         shape_str(b));
    MatDims d;
    d.M = a[a.size() - 2];
    d.K = a[a.size() - 1];
    if (b[b.size() - 2] != d.K)
        throw ShapeError("matmul: inner extents disagree for " + shape_str(a) + " and " +
                         shape_str(b));
    d.N = b[b.size() - 1];
    const size_t ra = a.size() - 2, rb = b.size() - 2;
    const size_t rank = std::max(ra, rb);
    d.lead_shape.resize(rank);
    d.la.assign(rank, 0);
    d.lb.assign(rank, 0);
    for (size_t i = 0; i < rank; ++i) {
        const size_t ea = i < ra ? a[ra - 1 - i] : 1;
        const size_t eb = i < rb ? b[rb - 1 - i] : 1;
        if (ea != eb && ea != 1 && eb != 1)
            throw ShapeError("matmul: leading extents of " + shape_str(a) + " and " + shape_str(b) +
                             " are not broadcastable");
        d.lead_shape[rank - 1 - i] = std::max(ea, eb);
    }
    size_t stra = d.M * d.K, strb = d.K * d.N;
    for (size_t i = 0; i < rank; ++i) {
        const size_t pos = rank - 1 - i;
        const size_t ea = i < ra ? a[ra - 1 - i] : 1;
        const size_t eb = i < rb ? b[rb - 1 - i] : 1;
        d.la[pos] = (ea == 1 && d.lead_shape[pos] != 1) ? 0 : stra;
        d.lb[pos] = (eb == 1 && d.lead_shape[pos] != 1) ? 0 : strb;
        if (d.la[pos] == 0 && d.lead_shape[pos] != 1) d.a_lead_dense = false;
        if (d.lb[pos] == 0 && d.lead_shape[pos] != 1) d.b_lead_dense = false;
        stra *= ea;
        strb *= eb;
    }
    d.lead = shape_numel(d.lead_shape);
    return d;
}

inline size_t lead_offset(size_t l, const std::vector<size_t>& lead_shape,
                          const std::vector<size_t>& strides) {
    size_t off = 0;
    for (size_t d = lead_shape.size(); d-- > 0;) {
        off += (l % lead_shape[d]) * strides[d];
        l /= lead_shape[d];
    }
    return off;
}

}  // namespace detail

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    const auto d = detail::matmul_dims(a.shape(), b.shape());
    Shape oshape = d.lead_shape;
    oshape.push_back(d.M);
    oshape.push_back(d.N);
    Tensor<T> out(oshape);

    const T* pa = a.data();
    const T* pb = b.data();
    T* pc = out.data();
    const size_t mat_o = d.M * d.N;
    if (d.lead == 1) {
        parallel_for(d.M, detail::kParGrain / (d.K * d.N + 1) + 1, [&](size_t m0, size_t m1) {
            detail::gemm_rows(m0, m1, d.K, d.N, pa, pb, pc);
        });
    } else {
        parallel_for(d.lead, detail::kParGrain / (d.M * d.K * d.N + 1) + 1,
                     [&](size_t l0, size_t l1) {
                         for (size_t l = l0; l < l1; ++l)
                             detail::gemm_rows(0, d.M, d.K, d.N,
                                               pa + detail::lead_offset(l, d.lead_shape, d.la),
                                               pb + detail::lead_offset(l, d.lead_shape, d.lb),
                                               pc + l * mat_o);
                     });
    }

    Tape<T>* tape = common_tape(a, b);
    if (tape && (a.requires_grad() || b.requires_grad())) {
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        tape->record([d, a, b, on, mat_o](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T* go = tp.grad_buf(on).data();
            if (a.requires_grad()) {
                T* ga = tp.grad_buf(a.node()).data();
                auto one = [&](size_t l) {
                    detail::gemm_dA_rows(0, d.M, d.K, d.N, go + l * mat_o,
                                         b.data() + detail::lead_offset(l, d.lead_shape, d.lb),
                                         ga + detail::lead_offset(l, d.lead_shape, d.la));
                };
                if (d.a_lead_dense)
                    parallel_for(d.lead, detail::kParGrain / (d.M * d.K * d.N + 1) + 1,
                                 [&](size_t l0, size_t l1) {
                                     for (size_t l = l0; l < l1; ++l) one(l);
                                 });
                else
                    for (size_t l = 0; l < d.lead; ++l) one(l);
            }
            if (b.requires_grad()) {
                T* gb = tp.grad_buf(b.node()).data();
                if (!d.b_lead_dense && b.shape().size() == 2 && d.a_lead_dense) {
                    // Shared weight matrix: one flat reduction over lead*M rows,
                    // parallel across output columns.
                    const size_t R = d.lead * d.M;
                    parallel_for(d.N, std::max<size_t>(1, d.N / num_threads()),
                                 [&](size_t n0, size_t n1) {
                                     detail::gemm_dB_cols(n0, n1, R, d.K, d.N, a.data(), go, gb);
                                 });
                } else {
                    auto one = [&](size_t l) {
                        detail::gemm_dB_cols(0, d.N, d.M, d.K, d.N,
                                             a.data() + detail::lead_offset(l, d.lead_shape, d.la),
                                             go + l * mat_o,
                                             gb + detail::lead_offset(l, d.lead_shape, d.lb));
                    };
                    if (d.b_lead_dense)
                        parallel_for(d.lead, detail::kParGrain / (d.M * d.K * d.N + 1) + 1,
                                     [&](size_t l0, size_t l1) {
                                         for (size_t l = l0; l < l1; ++l) one(l);
                                     });
                    else
                        for (size_t l = 0; l < d.lead; ++l) one(l);
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions over one axis. Max routes gradient to the first-encountered
// argmax (lowest index wins ties).
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> reduce(ReduceOp op, const Tensor<T>& x, size_t axis) {
    if (axis >= x.rank())
        throw BoundsError("reduce: axis " + std::to_string(axis) + " out of range for shape " +
                          shape_str(x.shape()));
    const Shape& s = x.shape();
    size_t outer = 1, inner = 1;
    for (size_t d = 0; d < axis; ++d) outer *= s[d];
    for (size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
    const size_t ax = s[axis];

    Shape oshape;
    for (size_t d = 0; d < s.size(); ++d)
        if (d != axis) oshape.push_back(s[d]);
    if (oshape.empty()) oshape.push_back(1);
    Tensor<T> out(oshape);

    auto arg = op == ReduceOp::max
                   ? std::make_shared<std::vector<int32_t>>(outer * inner, 0)
                   : nullptr;
    const T* px = x.data();
    T* po = out.data();
    parallel_for(outer, detail::kParGrain / (ax * inner + 1) + 1, [&](size_t o0, size_t o1) {
        for (size_t o = o0; o < o1; ++o) {
            const T* base = px + o * ax * inner;
            T* ob = po + o * inner;
            if (op == ReduceOp::sum) {
                for (size_t i = 0; i < inner; ++i) ob[i] = base[i];
                for (size_t a = 1; a < ax; ++a) {
                    const T* row = base + a * inner;
                    for (size_t i = 0; i < inner; ++i) ob[i] += row[i];
                }
            } else {
                int32_t* ab = arg->data() + o * inner;
                for (size_t i = 0; i < inner; ++i) {
                    ob[i] = base[i];
                    ab[i] = 0;
                }
                for (size_t a = 1; a < ax; ++a) {
                    const T* row = base + a * inner;
                    for (size_t i = 0; i < inner; ++i)
                        if (row[i] > ob[i]) {
                            ob[i] = row[i];
                            ab[i] = static_cast<int32_t>(a);
                        }
                }
            }
        }
    });

    if (x.requires_grad()) {
        Tape<T>* tape = x.tape();
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        tape->record([op, x, on, arg, outer, inner, ax](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T* go = tp.grad_buf(on).data();
            T* gx = tp.grad_buf(x.node()).data();
            for (size_t o = 0; o < outer; ++o) {
                const T* gb = go + o * inner;
                T* base = gx + o * ax * inner;
                if (op == ReduceOp::sum) {
                    for (size_t a = 0; a < ax; ++a) {
                        T* row = base + a * inner;
                        for (size_t i = 0; i < inner; ++i) row[i] += gb[i];
                    }
                } else {
                    const int32_t* ab = arg->data() + o * inner;
                    for (size_t i = 0; i < inner; ++i)
                        base[static_cast<size_t>(ab[i]) * inner + i] += gb[i];
                }
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
    Tensor<T> out({1});
    T acc = 0;
    for (size_t i = 0; i < x.size(); ++i) acc += x[i];
    out[0] = acc;
    if (x.requires_grad()) {
        Tape<T>* tape = x.tape();
        out.set_node(tape, tape->alloc_node(1));
        const int on = out.node();
        tape->record([x, on](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T g = tp.grad_buf(on)[0];
            T* gx = tp.grad_buf(x.node()).data();
            for (size_t i = 0; i < x.size(); ++i) gx[i] += g;
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Row gather / scatter over a neighbor index table.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, const IndexTable& t) {
    if (x.rank() < 2)
        throw ShapeError("gather_rows: expected [..,N,C], got " + shape_str(x.shape()));
    const size_t C = x.shape().back();
    const size_t N = x.shape()[x.rank() - 2];
    const size_t B = x.size() / (N * C);
    if (N != t.n || B != t.batch)
        throw ShapeError("gather_rows: index table (" + std::to_string(t.batch) + "x" +
                         std::to_string(t.n) + ") does not match input " + shape_str(x.shape()));
    Shape oshape(x.shape().begin(), x.shape().end() - 1);
    oshape.push_back(t.k);
    oshape.push_back(C);
    Tensor<T> out(oshape);
    const auto& idx = *t.idx;
    const T* px = x.data();
    T* po = out.data();
    const size_t K = t.k;
    // Validate first so the error carries the offending slot.
    for (size_t r = 0; r < B * N; ++r)
        for (size_t j = 0; j < K; ++j) {
            const int32_t id = idx[r * K + j];
            if (id < 0 || static_cast<size_t>(id) >= N)
                throw BoundsError("gather_rows: index " + std::to_string(id) + " at row " +
                                  std::to_string(r % N) + " slot " + std::to_string(j) +
                                  " out of range [0," + std::to_string(N) + ")");
        }
    parallel_for(B * N, detail::kParGrain / (K * C + 1) + 1, [&](size_t r0, size_t r1) {
        for (size_t r = r0; r < r1; ++r) {
            const size_t b = r / N;
            const T* sample = px + b * N * C;
            T* orow = po + r * K * C;
            for (size_t j = 0; j < K; ++j) {
                const T* src = sample + static_cast<size_t>(idx[r * K + j]) * C;
                T* dst = orow + j * C;
                for (size_t c = 0; c < C; ++c) dst[c] = src[c];
            }
        }
    });
    if (x.requires_grad()) {
        Tape<T>* tape = x.tape();
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        tape->record([x, t, on, B, N, K, C](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T* go = tp.grad_buf(on).data();
            T* gx = tp.grad_buf(x.node()).data();
            const auto& idx = *t.idx;
            // Scatter-add; rows of one sample may collide, so samples are the
            // parallel unit and slots accumulate in slot order.
            parallel_for(B, 1, [&](size_t b0, size_t b1) {
                for (size_t b = b0; b < b1; ++b) {
                    T* gsample = gx + b * N * C;
                    for (size_t i = 0; i < N; ++i) {
                        const size_t r = b * N + i;
                        const T* grow = go + r * K * C;
                        for (size_t j = 0; j < K; ++j) {
                            T* dst = gsample + static_cast<size_t>(idx[r * K + j]) * C;
                            const T* src = grow + j * C;
                            for (size_t c = 0; c < C; ++c) dst[c] += src[c];
                        }
                    }
                }
            });
        });
    }
    return out;
}

/// Edge features: out[b,i,j,:] = x[b, idx[b,i,j], :] - x[b,i,:].
/// Pad slots reference the center itself and therefore yield zeros.
template <class T>
Tensor<T> edge_features(const Tensor<T>& x, const IndexTable& t) {
    if (x.rank() < 2)
        throw ShapeError("edge_features: expected [..,N,C], got " + shape_str(x.shape()));
    const size_t C = x.shape().back();
    const size_t N = x.shape()[x.rank() - 2];
    const size_t B = x.size() / (N * C);
    if (N != t.n || B != t.batch)
        throw ShapeError("edge_features: index table does not match input " +
                         shape_str(x.shape()));
    Shape oshape(x.shape().begin(), x.shape().end() - 1);
    oshape.push_back(t.k);
    oshape.push_back(C);
    Tensor<T> out(oshape);
    const auto& idx = *t.idx;
    const T* px = x.data();
    T* po = out.data();
    const size_t K = t.k;
    parallel_for(B * N, detail::kParGrain / (K * C + 1) + 1, [&](size_t r0, size_t r1) {
        for (size_t r = r0; r < r1; ++r) {
            const size_t b = r / N;
            const T* sample = px + b * N * C;
            const T* center = px + r * C;
            T* orow = po + r * K * C;
            for (size_t j = 0; j < K; ++j) {
                const int32_t id = idx[r * K + j];
                if (id < 0 || static_cast<size_t>(id) >= N)
                    throw BoundsError("edge_features: index out of range at row " +
                                      std::to_string(r % N) + " slot " + std::to_string(j));
                const T* src = sample + static_cast<size_t>(id) * C;
                T* dst = orow + j * C;
                for (size_t c = 0; c < C; ++c) dst[c] = src[c] - center[c];
            }
        }
    });
    if (x.requires_grad()) {
        Tape<T>* tape = x.tape();
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        tape->record([x, t, on, B, N, K, C](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T* go = tp.grad_buf(on).data();
            T* gx = tp.grad_buf(x.node()).data();
            const auto& idx = *t.idx;
            parallel_for(B, 1, [&](size_t b0, size_t b1) {
                for (size_t b = b0; b < b1; ++b) {
                    T* gsample = gx + b * N * C;
                    for (size_t i = 0; i < N; ++i) {
                        const size_t r = b * N + i;
                        const T* grow = go + r * K * C;
                        T* gcenter = gsample + i * C;
                        for (size_t j = 0; j < K; ++j) {
                            T* dst = gsample + static_cast<size_t>(idx[r * K + j]) * C;
                            const T* src = grow + j * C;
                            for (size_t c = 0; c < C; ++c) {
                                dst[c] += src[c];
                                gcenter[c] -= src[c];
                            }
                        }
                    }
                }
            });
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Concatenation along one axis; backward splits.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, size_t axis) {
    if (parts.empty()) throw ValueError("concat: no parts");
    const Shape& s0 = parts[0].shape();
    if (axis >= s0.size())
        throw BoundsError("concat: axis " + std::to_string(axis) + " out of range for rank " +
                          std::to_string(s0.size()));
    size_t axis_total = 0;
    for (const auto& p : parts) {
        if (p.rank() != s0.size())
            throw ShapeError("concat: rank mismatch between " + shape_str(s0) + " and " +
                             shape_str(p.shape()));
        for (size_t d = 0; d < s0.size(); ++d)
            if (d != axis && p.shape()[d] != s0[d])
                throw ShapeError("concat: extent mismatch at axis " + std::to_string(d) +
                                 " between " + shape_str(s0) + " and " + shape_str(p.shape()));
        axis_total += p.shape()[axis];
    }
    Shape oshape = s0;
    oshape[axis] = axis_total;
    Tensor<T> out(oshape);

    size_t outer = 1, inner = 1;
    for (size_t d = 0; d < axis; ++d) outer *= s0[d];
    for (size_t d = axis + 1; d < s0.size(); ++d) inner *= s0[d];

    size_t off = 0;
    for (const auto& p : parts) {
        const size_t pa = p.shape()[axis];
        const T* src = p.data();
        T* dst = out.data();
        for (size_t o = 0; o < outer; ++o)
            std::copy(src + o * pa * inner, src + (o + 1) * pa * inner,
                      dst + (o * axis_total + off) * inner);
        off += pa;
    }

    Tape<T>* tape = nullptr;
    bool any_grad = false;
    for (const auto& p : parts) {
        if (p.tape()) {
            if (tape && p.tape() != tape) throw ValueError("concat: operands on different tapes");
            tape = p.tape();
        }
        any_grad = any_grad || p.requires_grad();
    }
    if (tape && any_grad) {
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        tape->record([parts, on, outer, inner, axis, axis_total](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T* go = tp.grad_buf(on).data();
            size_t off = 0;
            for (const auto& p : parts) {
                const size_t pa = p.shape()[axis];
                if (p.requires_grad()) {
                    T* gp = tp.grad_buf(p.node()).data();
                    for (size_t o = 0; o < outer; ++o) {
                        const T* src = go + (o * axis_total + off) * inner;
                        T* dst = gp + o * pa * inner;
                        for (size_t i = 0; i < pa * inner; ++i) dst[i] += src[i];
                    }
                }
                off += pa;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reshape (shares storage) and activations.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    Tensor<T> out = x.viewed(std::move(shape));
    if (x.requires_grad()) {
        Tape<T>* tape = x.tape();
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        tape->record([x, on](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const auto& go = tp.grad_buf(on);
            T* gx = tp.grad_buf(x.node()).data();
            for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
        });
    }
    return out;
}

/// Appends a trailing extent of 1 (e.g. [B,N,K] -> [B,N,K,1]).
template <class T>
Tensor<T> unsqueeze_last(const Tensor<T>& x) {
    Shape s = x.shape();
    s.push_back(1);
    return reshape(x, std::move(s));
}

template <class T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
    if (kind == Activation::none) return x;
    const T slope = kind == Activation::leaky_relu ? T(0.2) : T(0);
    Tensor<T> out(x.shape());
    const T* px = x.data();
    T* po = out.data();
    parallel_for(x.size(), detail::kParGrain, [&](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i) po[i] = px[i] >= T(0) ? px[i] : slope * px[i];
    });
    if (x.requires_grad()) {
        Tape<T>* tape = x.tape();
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        tape->record([x, on, slope](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T* go = tp.grad_buf(on).data();
            T* gx = tp.grad_buf(x.node()).data();
            const T* px = x.data();
            // Slope of the positive branch applies at exactly zero.
            for (size_t i = 0; i < x.size(); ++i)
                gx[i] += px[i] >= T(0) ? go[i] : slope * go[i];
        });
    }
    return out;
}

template <class T>
Tensor<T> cos_op(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    const T* px = x.data();
    T* po = out.data();
    parallel_for(x.size(), detail::kParGrain, [&](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i) po[i] = std::cos(px[i]);
    });
    if (x.requires_grad()) {
        Tape<T>* tape = x.tape();
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        tape->record([x, on](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T* go = tp.grad_buf(on).data();
            T* gx = tp.grad_buf(x.node()).data();
            const T* px = x.data();
            for (size_t i = 0; i < x.size(); ++i) gx[i] -= std::sin(px[i]) * go[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Masked max over the neighbor axis: x is [..,K,C], valid is [..,K].
// Rows with no valid slot produce zeros (and receive no gradient).
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> masked_max_over_slots(const Tensor<T>& x,
                                const std::shared_ptr<const std::vector<uint8_t>>& valid) {
    if (x.rank() < 2)
        throw ShapeError("masked_max_over_slots: expected [..,K,C], got " + shape_str(x.shape()));
    const size_t C = x.shape().back();
    const size_t K = x.shape()[x.rank() - 2];
    const size_t R = x.size() / (K * C);
    if (valid && valid->size() != R * K)
        throw ShapeError("masked_max_over_slots: mask size mismatch");
    Shape oshape(x.shape().begin(), x.shape().end() - 2);
    oshape.push_back(C);
    Tensor<T> out(oshape);
    auto arg = std::make_shared<std::vector<int32_t>>(R * C, -1);
    const T* px = x.data();
    T* po = out.data();
    const uint8_t* pv = valid ? valid->data() : nullptr;
    parallel_for(R, detail::kParGrain / (K * C + 1) + 1, [&](size_t r0, size_t r1) {
        for (size_t r = r0; r < r1; ++r) {
            const T* base = px + r * K * C;
            T* ob = po + r * C;
            int32_t* ab = arg->data() + r * C;
            for (size_t c = 0; c < C; ++c) ob[c] = T(0);
            for (size_t j = 0; j < K; ++j) {
                if (pv && !pv[r * K + j]) continue;
                const T* row = base + j * C;
                for (size_t c = 0; c < C; ++c)
                    if (ab[c] < 0 || row[c] > ob[c]) {
                        ob[c] = row[c];
                        ab[c] = static_cast<int32_t>(j);
                    }
            }
        }
    });
    if (x.requires_grad()) {
        Tape<T>* tape = x.tape();
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        tape->record([x, on, arg, R, K, C](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T* go = tp.grad_buf(on).data();
            T* gx = tp.grad_buf(x.node()).data();
            for (size_t r = 0; r < R; ++r) {
                const int32_t* ab = arg->data() + r * C;
                const T* gb = go + r * C;
                T* base = gx + r * K * C;
                for (size_t c = 0; c < C; ++c)
                    if (ab[c] >= 0) base[static_cast<size_t>(ab[c]) * C + c] += gb[c];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch normalization over the trailing channel axis.
// ---------------------------------------------------------------------------

template <class T>
struct BatchNormState {
    std::shared_ptr<std::vector<T>> running_mean;
    std::shared_ptr<std::vector<T>> running_var;
    T eps = T(1e-5);
    T momentum = T(0.1);

    explicit BatchNormState(size_t channels = 0)
        : running_mean(std::make_shared<std::vector<T>>(channels, T(0))),
          running_var(std::make_shared<std::vector<T>>(channels, T(1))) {}
};

/// Training mode normalizes by batch statistics over all leading axes and
/// (when update_stats) folds them into the running estimates; eval mode is the
/// deterministic affine map through the running estimates.
template <class T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BatchNormState<T>& state, bool training, bool update_stats = true) {
    const size_t C = x.shape().back();
    if (gamma.size() != C || beta.size() != C || state.running_mean->size() != C)
        throw ShapeError("batch_norm: channel extent " + std::to_string(C) +
                         " does not match state of " + std::to_string(state.running_mean->size()));
    const size_t R = x.size() / C;
    Tensor<T> out(x.shape());

    auto mean = std::make_shared<std::vector<T>>(C, T(0));
    auto var = std::make_shared<std::vector<T>>(C, T(0));
    const T* px = x.data();
    if (training) {
        for (size_t r = 0; r < R; ++r) {
            const T* row = px + r * C;
            for (size_t c = 0; c < C; ++c) (*mean)[c] += row[c];
        }
        for (size_t c = 0; c < C; ++c) (*mean)[c] /= static_cast<T>(R);
        for (size_t r = 0; r < R; ++r) {
            const T* row = px + r * C;
            for (size_t c = 0; c < C; ++c) {
                const T d = row[c] - (*mean)[c];
                (*var)[c] += d * d;
            }
        }
        for (size_t c = 0; c < C; ++c) (*var)[c] /= static_cast<T>(R);
        if (update_stats) {
            const T m = state.momentum;
            for (size_t c = 0; c < C; ++c) {
                // Unbiased variance feeds the running estimate.
                const T uv = R > 1 ? (*var)[c] * static_cast<T>(R) / static_cast<T>(R - 1)
                                   : (*var)[c];
                (*state.running_mean)[c] = (T(1) - m) * (*state.running_mean)[c] + m * (*mean)[c];
                (*state.running_var)[c] = (T(1) - m) * (*state.running_var)[c] + m * uv;
            }
        }
    } else {
        *mean = *state.running_mean;
        *var = *state.running_var;
    }

    auto inv_std = std::make_shared<std::vector<T>>(C);
    for (size_t c = 0; c < C; ++c) (*inv_std)[c] = T(1) / std::sqrt((*var)[c] + state.eps);

    const T* pg = gamma.data();
    const T* pb = beta.data();
    T* po = out.data();
    parallel_for(R, detail::kParGrain / (C + 1) + 1, [&](size_t r0, size_t r1) {
        for (size_t r = r0; r < r1; ++r) {
            const T* row = px + r * C;
            T* orow = po + r * C;
            for (size_t c = 0; c < C; ++c)
                orow[c] = pg[c] * (row[c] - (*mean)[c]) * (*inv_std)[c] + pb[c];
        }
    });

    Tape<T>* tape = common_tape(x, gamma, beta);
    if (tape && (x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        tape->record([x, gamma, beta, mean, inv_std, on, R, C, training](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T* go = tp.grad_buf(on).data();
            const T* px = x.data();
            const T* pg = gamma.data();
            // Per-channel sums of dy and dy*xhat feed every input rule.
            std::vector<T> sum_dy(C, T(0)), sum_dy_xhat(C, T(0));
            for (size_t r = 0; r < R; ++r) {
                const T* grow = go + r * C;
                const T* row = px + r * C;
                for (size_t c = 0; c < C; ++c) {
                    const T xhat = (row[c] - (*mean)[c]) * (*inv_std)[c];
                    sum_dy[c] += grow[c];
                    sum_dy_xhat[c] += grow[c] * xhat;
                }
            }
            if (gamma.requires_grad()) {
                T* gg = tp.grad_buf(gamma.node()).data();
                for (size_t c = 0; c < C; ++c) gg[c] += sum_dy_xhat[c];
            }
            if (beta.requires_grad()) {
                T* gb = tp.grad_buf(beta.node()).data();
                for (size_t c = 0; c < C; ++c) gb[c] += sum_dy[c];
            }
            if (x.requires_grad()) {
                T* gx = tp.grad_buf(x.node()).data();
                if (training) {
                    const T invR = T(1) / static_cast<T>(R);
                    parallel_for(R, detail::kParGrain / (C + 1) + 1, [&](size_t r0, size_t r1) {
                        for (size_t r = r0; r < r1; ++r) {
                            const T* grow = go + r * C;
                            const T* row = px + r * C;
                            T* gr = gx + r * C;
                            for (size_t c = 0; c < C; ++c) {
                                const T xhat = (row[c] - (*mean)[c]) * (*inv_std)[c];
                                gr[c] += pg[c] * (*inv_std)[c] *
                                         (grow[c] - invR * sum_dy[c] - invR * xhat * sum_dy_xhat[c]);
                            }
                        }
                    });
                } else {
                    parallel_for(R, detail::kParGrain / (C + 1) + 1, [&](size_t r0, size_t r1) {
                        for (size_t r = r0; r < r1; ++r) {
                            const T* grow = go + r * C;
                            T* gr = gx + r * C;
                            for (size_t c = 0; c < C; ++c)
                                gr[c] += pg[c] * (*inv_std)[c] * grow[c];
                        }
                    });
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Softmax over the last axis and mean cross-entropy.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
    const size_t C = x.shape().back();
    const size_t R = x.size() / C;
    Tensor<T> out(x.shape());
    const T* px = x.data();
    T* po = out.data();
    for (size_t r = 0; r < R; ++r) {
        const T* row = px + r * C;
        T* orow = po + r * C;
        T mx = row[0];
        for (size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        T sum = 0;
        for (size_t c = 0; c < C; ++c) {
            orow[c] = std::exp(row[c] - mx);
            sum += orow[c];
        }
        for (size_t c = 0; c < C; ++c) orow[c] /= sum;
    }
    if (x.requires_grad()) {
        Tape<T>* tape = x.tape();
        out.set_node(tape, tape->alloc_node(out.size()));
        const int on = out.node();
        Tensor<T> probs = out;  // shared storage
        tape->record([x, probs, on, R, C](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T* go = tp.grad_buf(on).data();
            T* gx = tp.grad_buf(x.node()).data();
            const T* ps = probs.data();
            for (size_t r = 0; r < R; ++r) {
                const T* s = ps + r * C;
                const T* g = go + r * C;
                T dot = 0;
                for (size_t c = 0; c < C; ++c) dot += g[c] * s[c];
                T* gr = gx + r * C;
                for (size_t c = 0; c < C; ++c) gr[c] += s[c] * (g[c] - dot);
            }
        });
    }
    return out;
}

/// Mean cross-entropy of logits [..,C] against integer labels (one per row).
template <class T>
Tensor<T> cross_entropy_mean(const Tensor<T>& logits, const std::vector<int>& labels) {
    const size_t C = logits.shape().back();
    const size_t R = logits.size() / C;
    if (labels.size() != R)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(R) + " rows");
    auto probs = std::make_shared<std::vector<T>>(R * C);
    const T* pz = logits.data();
    T loss = 0;
    for (size_t r = 0; r < R; ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<size_t>(y) >= C)
            throw BoundsError("cross_entropy: label " + std::to_string(y) + " out of range [0," +
                              std::to_string(C) + ") at row " + std::to_string(r));
        const T* row = pz + r * C;
        T mx = row[0];
        for (size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        T sum = 0;
        T* prow = probs->data() + r * C;
        for (size_t c = 0; c < C; ++c) {
            prow[c] = std::exp(row[c] - mx);
            sum += prow[c];
        }
        for (size_t c = 0; c < C; ++c) prow[c] /= sum;
        loss += std::log(sum) - (row[static_cast<size_t>(y)] - mx);
    }
    Tensor<T> out = Tensor<T>::scalar(loss / static_cast<T>(R));
    if (logits.requires_grad()) {
        Tape<T>* tape = logits.tape();
        out.set_node(tape, tape->alloc_node(1));
        const int on = out.node();
        auto lab = std::make_shared<std::vector<int>>(labels);
        tape->record([logits, probs, lab, on, R, C](Tape<T>& tp) {
            if (!tp.grad_touched(on)) return;
            const T g = tp.grad_buf(on)[0] / static_cast<T>(R);
            T* gx = tp.grad_buf(logits.node()).data();
            const T* ps = probs->data();
            for (size_t r = 0; r < R; ++r) {
                const int y = (*lab)[r];
                T* gr = gx + r * C;
                const T* prow = ps + r * C;
                for (size_t c = 0; c < C; ++c) gr[c] += g * prow[c];
                gr[static_cast<size_t>(y)] -= g;
            }
        });
    }
    return out;
}

}  // namespace vagcn
