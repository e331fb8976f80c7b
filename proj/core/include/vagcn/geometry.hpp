#pragma once

#include <cmath>
#include <memory>

#include "vagcn/knn.hpp"
#include "vagcn/ops.hpp"

// Per-edge geometry: relative vectors, Euclidean edge lengths, elevation and
// azimuth ratios, and the distance-attention simplex weights. All ops are
// differentiable w.r.t. point positions; the 1e-12 degeneracy branches and
// the argmax selection are fixed during backward (standard subgradient
// treatment), while the row maximum itself passes gradient to the
// first-encountered maximal slot.

namespace vagcn {

constexpr double kDegenerateEps = 1e-12;

template <class T>
struct EdgeGeometry {
    Tensor<T> rel;       // [..,N,K,3]
    Tensor<T> dist;      // [..,N,K]
    Tensor<T> elev;      // [..,N,K], in [-1,1]
    Tensor<T> azim;      // [..,N,K], in [-1,1]
    Tensor<T> m_weight;  // [..,N,K], per-row probability simplex
};

/// rel[b,i,j,:] = p[b,idx[b,i,j],:] - p[b,i,:]; dist = |rel|. Pad slots give
/// exact zeros for both.
template <class T>
std::pair<Tensor<T>, Tensor<T>> relative_vectors(const Tensor<T>& positions,
                                                 const IndexTable& t) {
    if (positions.rank() < 2 || positions.shape().back() != 3)
        throw ShapeError("relative_vectors: expected [..,N,3], got " +
                         shape_str(positions.shape()));
    const size_t N = positions.shape()[positions.rank() - 2];
    const size_t B = positions.size() / (N * 3);
    if (N != t.n || B != t.batch)
        throw ShapeError("relative_vectors: graph (" + std::to_string(t.batch) + "x" +
                         std::to_string(t.n) + ") does not match positions " +
                         shape_str(positions.shape()));
    const size_t K = t.k;
    Shape lead(positions.shape().begin(), positions.shape().end() - 1);
    Shape rel_shape = lead;
    rel_shape.push_back(K);
    rel_shape.push_back(3);
    Shape dist_shape = lead;
    dist_shape.push_back(K);
    Tensor<T> rel(rel_shape);
    Tensor<T> dist(dist_shape);

    const auto& idx = *t.idx;
    const T* pp = positions.data();
    T* pr = rel.data();
    T* pd = dist.data();
    parallel_for(B * N, 1024, [&](size_t r0, size_t r1) {
        for (size_t r = r0; r < r1; ++r) {
            const size_t b = r / N;
            const T* sample = pp + b * N * 3;
            const T* center = pp + r * 3;
            for (size_t j = 0; j < K; ++j) {
                const T* q = sample + static_cast<size_t>(idx[r * K + j]) * 3;
                T* rv = pr + (r * K + j) * 3;
                rv[0] = q[0] - center[0];
                rv[1] = q[1] - center[1];
                rv[2] = q[2] - center[2];
                pd[r * K + j] = std::sqrt(rv[0] * rv[0] + rv[1] * rv[1] + rv[2] * rv[2]);
            }
        }
    });

    if (positions.requires_grad()) {
        Tape<T>* tape = positions.tape();
        rel.set_node(tape, tape->alloc_node(rel.size()));
        dist.set_node(tape, tape->alloc_node(dist.size()));
        const int rn = rel.node(), dn = dist.node();
        Tensor<T> rel_saved = rel, dist_saved = dist;
        tape->record([positions, t, rel_saved, dist_saved, rn, dn, B, N, K](Tape<T>& tp) {
            const bool has_r = tp.grad_touched(rn), has_d = tp.grad_touched(dn);
            if (!has_r && !has_d) return;
            const T* gr = has_r ? tp.grad_buf(rn).data() : nullptr;
            const T* gd = has_d ? tp.grad_buf(dn).data() : nullptr;
            T* gp = tp.grad_buf(positions.node()).data();
            const auto& idx = *t.idx;
            const T* pr = rel_saved.data();
            const T* pd = dist_saved.data();
            parallel_for(B, 1, [&](size_t b0, size_t b1) {
                for (size_t b = b0; b < b1; ++b) {
                    T* gsample = gp + b * N * 3;
                    for (size_t i = 0; i < N; ++i) {
                        const size_t r = b * N + i;
                        T* gcenter = gsample + i * 3;
                        for (size_t j = 0; j < K; ++j) {
                            const size_t e = r * K + j;
                            T gx = has_r ? gr[e * 3] : T(0);
                            T gy = has_r ? gr[e * 3 + 1] : T(0);
                            T gz = has_r ? gr[e * 3 + 2] : T(0);
                            if (has_d && pd[e] > T(kDegenerateEps)) {
                                const T s = gd[e] / pd[e];
                                gx += s * pr[e * 3];
                                gy += s * pr[e * 3 + 1];
                                gz += s * pr[e * 3 + 2];
                            }
                            T* gq = gsample + static_cast<size_t>(idx[e]) * 3;
                            gq[0] += gx;
                            gq[1] += gy;
                            gq[2] += gz;
                            gcenter[0] -= gx;
                            gcenter[1] -= gy;
                            gcenter[2] -= gz;
                        }
                    }
                }
            });
        });
    }
    return {rel, dist};
}

/// elev = z/dist, azim = x/sqrt(x^2+y^2); degenerate denominators (< 1e-12)
/// give 0 instead of NaN.
template <class T>
std::pair<Tensor<T>, Tensor<T>> elevation_azimuth(const Tensor<T>& rel, const Tensor<T>& dist) {
    if (rel.rank() < 1 || rel.shape().back() != 3)
        throw ShapeError("elevation_azimuth: rel must be [..,3], got " + shape_str(rel.shape()));
    if (rel.size() != dist.size() * 3)
        throw ShapeError("elevation_azimuth: rel " + shape_str(rel.shape()) +
                         " does not match dist " + shape_str(dist.shape()));
    const size_t E = dist.size();
    Tensor<T> elev(dist.shape());
    Tensor<T> azim(dist.shape());
    const T* pr = rel.data();
    const T* pd = dist.data();
    T* pe = elev.data();
    T* pa = azim.data();
    const T thr = T(kDegenerateEps);
    parallel_for(E, detail::kParGrain, [&](size_t e0, size_t e1) {
        for (size_t e = e0; e < e1; ++e) {
            const T x = pr[e * 3], y = pr[e * 3 + 1], z = pr[e * 3 + 2];
            pe[e] = pd[e] < thr ? T(0) : z / pd[e];
            const T h = std::sqrt(x * x + y * y);
            pa[e] = h < thr ? T(0) : x / h;
        }
    });
    Tape<T>* tape = common_tape(rel, dist);
    if (tape && (rel.requires_grad() || dist.requires_grad())) {
        elev.set_node(tape, tape->alloc_node(E));
        azim.set_node(tape, tape->alloc_node(E));
        const int en = elev.node(), an = azim.node();
        tape->record([rel, dist, en, an, E, thr](Tape<T>& tp) {
            const bool has_e = tp.grad_touched(en), has_a = tp.grad_touched(an);
            if (!has_e && !has_a) return;
            const T* ge = has_e ? tp.grad_buf(en).data() : nullptr;
            const T* ga = has_a ? tp.grad_buf(an).data() : nullptr;
            T* gr = rel.requires_grad() ? tp.grad_buf(rel.node()).data() : nullptr;
            T* gd = dist.requires_grad() ? tp.grad_buf(dist.node()).data() : nullptr;
            const T* pr = rel.data();
            const T* pd = dist.data();
            for (size_t e = 0; e < E; ++e) {
                const T x = pr[e * 3], y = pr[e * 3 + 1], z = pr[e * 3 + 2];
                const T d = pd[e];
                if (has_e && d >= thr) {
                    if (gr) gr[e * 3 + 2] += ge[e] / d;
                    if (gd) gd[e] -= ge[e] * z / (d * d);
                }
                if (has_a && gr) {
                    const T h2 = x * x + y * y;
                    const T h = std::sqrt(h2);
                    if (h >= thr) {
                        const T h3 = h2 * h;
                        gr[e * 3] += ga[e] * (y * y) / h3;
                        gr[e * 3 + 1] -= ga[e] * x * y / h3;
                    }
                }
            }
        });
    }
    return {elev, azim};
}

/// Per-row simplex weights from squared distance-to-max gaps:
/// m_j = (max - d_j)^2 / sum_j (max - d_j)^2; uniform 1/K when the gaps
/// vanish (all distances equal, including fully-padded rows). Pad slots
/// participate like distance-0 entries.
template <class T>
Tensor<T> distance_attention(const Tensor<T>& dist) {
    if (dist.rank() < 1) throw ShapeError("distance_attention: rank-0 input");
    const size_t K = dist.shape().back();
    const size_t R = dist.size() / K;
    Tensor<T> m(dist.shape());
    auto argmax = std::make_shared<std::vector<int32_t>>(R, -1);  // -1 = uniform fallback row
    const T* pd = dist.data();
    T* pm = m.data();
    parallel_for(R, detail::kParGrain / (K + 1) + 1, [&](size_t r0, size_t r1) {
        for (size_t r = r0; r < r1; ++r) {
            const T* row = pd + r * K;
            T* orow = pm + r * K;
            T mx = row[0];
            int32_t am = 0;
            for (size_t j = 1; j < K; ++j)
                if (row[j] > mx) {
                    mx = row[j];
                    am = static_cast<int32_t>(j);
                }
            T sum = 0;
            for (size_t j = 0; j < K; ++j) {
                const T u = mx - row[j];
                orow[j] = u * u;
                sum += u * u;
            }
            if (sum < T(kDegenerateEps)) {
                for (size_t j = 0; j < K; ++j) orow[j] = T(1) / static_cast<T>(K);
                (*argmax)[r] = -1;
            } else {
                for (size_t j = 0; j < K; ++j) orow[j] /= sum;
                (*argmax)[r] = am;
            }
        }
    });
    if (dist.requires_grad()) {
        Tape<T>* tape = dist.tape();
        m.set_node(tape, tape->alloc_node(m.size()));
        const int mn = m.node();
        tape->record([dist, argmax, mn, R, K](Tape<T>& tp) {
            if (!tp.grad_touched(mn)) return;
            const T* gm = tp.grad_buf(mn).data();
            T* gd = tp.grad_buf(dist.node()).data();
            const T* pd = dist.data();
            for (size_t r = 0; r < R; ++r) {
                const int32_t am = (*argmax)[r];
                if (am < 0) continue;  // uniform fallback row: constant output
                const T* row = pd + r * K;
                const T* grow = gm + r * K;
                const T mx = row[static_cast<size_t>(am)];
                // u_j = mx - d_j, w_j = u_j^2, S = sum w.
                T S = 0, A = 0, Bv = 0, U = 0;
                for (size_t j = 0; j < K; ++j) {
                    const T u = mx - row[j];
                    S += u * u;
                    A += grow[j] * u * u;
                    Bv += grow[j] * u;
                    U += u;
                }
                T* gout = gd + r * K;
                for (size_t j = 0; j < K; ++j) {
                    const T u = mx - row[j];
                    gout[j] += T(2) * u * (A / S - grow[j]) / S;
                }
                // The row max passes its subgradient to the first maximal slot.
                gout[static_cast<size_t>(am)] += T(2) * (Bv * S - A * U) / (S * S);
            }
        });
    }
    return m;
}

template <class T>
EdgeGeometry<T> compute_edge_geometry(const Tensor<T>& positions, const IndexTable& t) {
    EdgeGeometry<T> geo;
    auto [rel, dist] = relative_vectors(positions, t);
    geo.rel = rel;
    geo.dist = dist;
    auto [elev, azim] = elevation_azimuth(rel, dist);
    geo.elev = elev;
    geo.azim = azim;
    geo.m_weight = distance_attention(dist);
    return geo;
}

}  // namespace vagcn
