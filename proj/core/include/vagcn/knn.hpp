#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "vagcn/ops.hpp"

namespace vagcn {

constexpr double kInfRadius = std::numeric_limits<double>::infinity();

/// Point positions (n x 3) with optional extra per-point channels (n x e).
struct PointSet {
    size_t n = 0;
    std::vector<double> xyz;
    size_t extra_channels = 0;
    std::vector<double> extras;

    double x(size_t i) const { return xyz[3 * i]; }
    double y(size_t i) const { return xyz[3 * i + 1]; }
    double z(size_t i) const { return xyz[3 * i + 2]; }
};

// Radius-bounded k-nearest-neighbor table. Rows hold the qualifying
// neighbors sorted by (distance, index); when fewer than k qualify the
// remaining trailing slots are self-pads (own index, distance 0, pad flag).
struct NeighborGraph {
    size_t n = 0;
    size_t k = 0;
    double radius = kInfRadius;
    std::vector<int32_t> indices;
    std::vector<double> distances;
    std::vector<uint8_t> pad_mask;

    int32_t index(size_t i, size_t j) const { return indices[i * k + j]; }
    double distance(size_t i, size_t j) const { return distances[i * k + j]; }
    bool is_pad(size_t i, size_t j) const { return pad_mask[i * k + j] != 0; }
};

/// Exact KNN by full pairwise scan.
NeighborGraph knn_bruteforce(const PointSet& points, size_t k, double r = kInfRadius,
                             bool include_self = false);

/// Exact KNN through a uniform grid; bitwise-identical to knn_bruteforce.
NeighborGraph knn_grid(const PointSet& points, size_t k, double r, double cell = 0.0,
                       bool include_self = false);

/// KNN over arbitrary-dimension feature vectors (no radius bound); used when
/// a graph is rebuilt in feature space.
NeighborGraph knn_bruteforce_nd(const double* feats, size_t n, size_t dim, size_t k);

// Per-row full neighbor ordering, for carving several radius-bounded graphs
// out of one sort. graph_from_sorted(t, k, r) equals knn_bruteforce(p, k, r).
struct SortedNeighborTable {
    size_t n = 0;
    std::vector<int32_t> idx;  // n * (n-1)
    std::vector<double> d2;    // n * (n-1), squared distances
};

SortedNeighborTable sort_all_neighbors(const PointSet& points);
NeighborGraph graph_from_sorted(const SortedNeighborTable& table, size_t k, double r);

/// Stacks per-sample graphs (equal n and k) into one index table for the
/// batched tensor ops.
IndexTable make_index_table(std::span<const NeighborGraph> graphs);
IndexTable make_index_table(const NeighborGraph& graph);

}  // namespace vagcn
