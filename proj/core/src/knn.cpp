#include "vagcn/knn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include "vagcn/errors.hpp"
#include "vagcn/parallel.hpp"

namespace vagcn {

namespace {

struct Candidate {
    double d2;
    int32_t idx;
};

// Shared tail of both KNN paths so grid and brute force stay bitwise equal:
// order by (squared distance, index), keep k, self-pad the rest.
void finish_row(size_t i, size_t k, std::vector<Candidate>& cand, NeighborGraph& g) {
    auto lt = [](const Candidate& a, const Candidate& b) {
        return a.d2 != b.d2 ? a.d2 < b.d2 : a.idx < b.idx;
    };
    if (cand.size() > k) {
        std::nth_element(cand.begin(), cand.begin() + static_cast<ptrdiff_t>(k), cand.end(), lt);
        cand.resize(k);
    }
    std::sort(cand.begin(), cand.end(), lt);
    for (size_t j = 0; j < k; ++j) {
        const size_t slot = i * k + j;
        if (j < cand.size()) {
            g.indices[slot] = cand[j].idx;
            g.distances[slot] = std::sqrt(cand[j].d2);
            g.pad_mask[slot] = 0;
        } else {
            g.indices[slot] = static_cast<int32_t>(i);
            g.distances[slot] = 0.0;
            g.pad_mask[slot] = 1;
        }
    }
}

void validate(const PointSet& points, size_t k, bool include_self) {
    if (points.n == 0) throw ValueError("knn: empty point set");
    if (k < 1) throw ValueError("knn: k must be >= 1, got " + std::to_string(k));
    if (!include_self && points.n < 2)
        throw ValueError("knn: need at least 2 points when include_self is false");
}

NeighborGraph make_graph(size_t n, size_t k, double r) {
    NeighborGraph g;
    g.n = n;
    g.k = k;
    g.radius = r;
    g.indices.assign(n * k, 0);
    g.distances.assign(n * k, 0.0);
    g.pad_mask.assign(n * k, 0);
    return g;
}

}  // namespace

NeighborGraph knn_bruteforce(const PointSet& points, size_t k, double r, bool include_self) {
    validate(points, k, include_self);
    const size_t n = points.n;
    NeighborGraph g = make_graph(n, k, r);
    const double r2 = std::isinf(r) ? kInfRadius : r * r;
    const double* p = points.xyz.data();
    parallel_for(n, 16, [&](size_t i0, size_t i1) {
        std::vector<Candidate> cand;
        for (size_t i = i0; i < i1; ++i) {
            cand.clear();
            const double xi = p[3 * i], yi = p[3 * i + 1], zi = p[3 * i + 2];
            for (size_t j = 0; j < n; ++j) {
                if (j == i && !include_self) continue;
                const double dx = p[3 * j] - xi;
                const double dy = p[3 * j + 1] - yi;
                const double dz = p[3 * j + 2] - zi;
                const double d2 = dx * dx + dy * dy + dz * dz;
                if (d2 <= r2) cand.push_back({d2, static_cast<int32_t>(j)});
            }
            finish_row(i, k, cand, g);
        }
    });
    return g;
}

NeighborGraph knn_grid(const PointSet& points, size_t k, double r, double cell,
                       bool include_self) {
    validate(points, k, include_self);
    if (!(r > 0.0) || std::isinf(r))
        throw ValueError("knn_grid: radius must be finite and > 0");
    if (cell == 0.0) cell = r;
    if (!(cell > 0.0)) throw ValueError("knn_grid: cell length must be > 0");

    const size_t n = points.n;
    const double* p = points.xyz.data();

    struct KeyHash {
        size_t operator()(const std::array<int64_t, 3>& a) const {
            uint64_t h = 1469598103934665603ull;
            for (int64_t v : a) {
                h ^= static_cast<uint64_t>(v);
                h *= 1099511628211ull;
            }
            return static_cast<size_t>(h);
        }
    };
    std::unordered_map<std::array<int64_t, 3>, std::vector<int32_t>, KeyHash> cells;
    cells.reserve(n);
    auto cell_of = [&](size_t i) {
        return std::array<int64_t, 3>{static_cast<int64_t>(std::floor(p[3 * i] / cell)),
                                      static_cast<int64_t>(std::floor(p[3 * i + 1] / cell)),
                                      static_cast<int64_t>(std::floor(p[3 * i + 2] / cell))};
    };
    for (size_t i = 0; i < n; ++i) cells[cell_of(i)].push_back(static_cast<int32_t>(i));

    const int64_t ring = static_cast<int64_t>(std::ceil(r / cell));
    const double r2 = r * r;
    NeighborGraph g = make_graph(n, k, r);
    parallel_for(n, 16, [&](size_t i0, size_t i1) {
        std::vector<Candidate> cand;
        for (size_t i = i0; i < i1; ++i) {
            cand.clear();
            const auto c = cell_of(i);
            const double xi = p[3 * i], yi = p[3 * i + 1], zi = p[3 * i + 2];
            for (int64_t dx = -ring; dx <= ring; ++dx)
                for (int64_t dy = -ring; dy <= ring; ++dy)
                    for (int64_t dz = -ring; dz <= ring; ++dz) {
                        const auto it = cells.find({c[0] + dx, c[1] + dy, c[2] + dz});
                        if (it == cells.end()) continue;
                        for (int32_t j : it->second) {
                            if (static_cast<size_t>(j) == i && !include_self) continue;
                            const double ddx = p[3 * j] - xi;
                            const double ddy = p[3 * j + 1] - yi;
                            const double ddz = p[3 * j + 2] - zi;
                            const double d2 = ddx * ddx + ddy * ddy + ddz * ddz;
                            if (d2 <= r2) cand.push_back({d2, j});
                        }
                    }
            finish_row(i, k, cand, g);
        }
    });
    return g;
}

NeighborGraph knn_bruteforce_nd(const double* feats, size_t n, size_t dim, size_t k) {
    if (n < 2) throw ValueError("knn_bruteforce_nd: need at least 2 points");
    if (k < 1) throw ValueError("knn_bruteforce_nd: k must be >= 1");
    NeighborGraph g = make_graph(n, k, kInfRadius);
    parallel_for(n, 8, [&](size_t i0, size_t i1) {
        std::vector<Candidate> cand;
        for (size_t i = i0; i < i1; ++i) {
            cand.clear();
            const double* fi = feats + i * dim;
            for (size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double* fj = feats + j * dim;
                double d2 = 0.0;
                for (size_t d = 0; d < dim; ++d) {
                    const double diff = fj[d] - fi[d];
                    d2 += diff * diff;
                }
                cand.push_back({d2, static_cast<int32_t>(j)});
            }
            finish_row(i, k, cand, g);
        }
    });
    return g;
}

SortedNeighborTable sort_all_neighbors(const PointSet& points) {
    if (points.n < 2) throw ValueError("sort_all_neighbors: need at least 2 points");
    const size_t n = points.n;
    const size_t m = n - 1;
    SortedNeighborTable t;
    t.n = n;
    t.idx.assign(n * m, 0);
    t.d2.assign(n * m, 0.0);
    const double* p = points.xyz.data();
    parallel_for(n, 8, [&](size_t i0, size_t i1) {
        std::vector<Candidate> cand(m);
        for (size_t i = i0; i < i1; ++i) {
            size_t w = 0;
            const double xi = p[3 * i], yi = p[3 * i + 1], zi = p[3 * i + 2];
            for (size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double dx = p[3 * j] - xi;
                const double dy = p[3 * j + 1] - yi;
                const double dz = p[3 * j + 2] - zi;
                cand[w++] = {dx * dx + dy * dy + dz * dz, static_cast<int32_t>(j)};
            }
            std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
                return a.d2 != b.d2 ? a.d2 < b.d2 : a.idx < b.idx;
            });
            for (size_t j = 0; j < m; ++j) {
                t.idx[i * m + j] = cand[j].idx;
                t.d2[i * m + j] = cand[j].d2;
            }
        }
    });
    return t;
}

NeighborGraph graph_from_sorted(const SortedNeighborTable& table, size_t k, double r) {
    if (k < 1) throw ValueError("graph_from_sorted: k must be >= 1");
    const size_t n = table.n;
    const size_t m = n - 1;
    const double r2 = std::isinf(r) ? kInfRadius : r * r;
    NeighborGraph g = make_graph(n, k, r);
    for (size_t i = 0; i < n; ++i) {
        size_t taken = 0;
        for (size_t j = 0; j < m && taken < k; ++j) {
            const double d2 = table.d2[i * m + j];
            if (d2 > r2) break;
            const size_t slot = i * k + taken;
            g.indices[slot] = table.idx[i * m + j];
            g.distances[slot] = std::sqrt(d2);
            g.pad_mask[slot] = 0;
            ++taken;
        }
        for (; taken < k; ++taken) {
            const size_t slot = i * k + taken;
            g.indices[slot] = static_cast<int32_t>(i);
            g.distances[slot] = 0.0;
            g.pad_mask[slot] = 1;
        }
    }
    return g;
}

IndexTable make_index_table(std::span<const NeighborGraph> graphs) {
    if (graphs.empty()) throw ValueError("make_index_table: no graphs");
    const size_t n = graphs[0].n, k = graphs[0].k;
    auto idx = std::make_shared<std::vector<int32_t>>();
    auto pad = std::make_shared<std::vector<uint8_t>>();
    idx->reserve(graphs.size() * n * k);
    pad->reserve(graphs.size() * n * k);
    for (const auto& g : graphs) {
        if (g.n != n || g.k != k)
            throw ShapeError("make_index_table: graphs disagree on n or k");
        idx->insert(idx->end(), g.indices.begin(), g.indices.end());
        pad->insert(pad->end(), g.pad_mask.begin(), g.pad_mask.end());
    }
    IndexTable t;
    t.batch = graphs.size();
    t.n = n;
    t.k = k;
    t.idx = std::move(idx);
    t.pad = std::move(pad);
    return t;
}

IndexTable make_index_table(const NeighborGraph& graph) {
    return make_index_table(std::span<const NeighborGraph>(&graph, 1));
}

}  // namespace vagcn
