#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vagcn/knn.hpp"
#include "vagcn/rng.hpp"

namespace vagcn {

// ---------------------------------------------------------------------------
// Triangle meshes and the OFF text format.
// ---------------------------------------------------------------------------

struct Mesh {
    std::vector<double> vertices;               // V * 3
    std::vector<std::array<int32_t, 3>> faces;  // triangulated, positive area
    size_t dropped_degenerate = 0;              // zero-area faces removed at parse

    size_t vertex_count() const { return vertices.size() / 3; }
    double face_area(size_t f) const;
};

/// Parses the OFF dialects found in the wild: optional "OFF" keyword line
/// (possibly fused with the counts, e.g. "OFF4 4 0"), '#' comments, counts
/// line "V F E", V vertex lines, F polygon lines "n i1..in" fan-triangulated.
/// Zero-area triangles are dropped and counted.
Mesh parse_off(const std::string& text);

/// Writer for fixtures; parse_off(write_off(m)) reproduces m exactly.
std::string write_off(const Mesh& mesh);

// ---------------------------------------------------------------------------
// Surface sampling.
// ---------------------------------------------------------------------------

/// n points, faces chosen with probability proportional to area, uniform
/// barycentric placement. Deterministic per seed.
PointSet sample_surface(const Mesh& mesh, size_t n, uint64_t seed);

/// Same, but also reports the source face of every sample (for distribution
/// tests).
PointSet sample_surface(const Mesh& mesh, size_t n, Rng& rng,
                        std::vector<int32_t>* face_ids = nullptr);

// ---------------------------------------------------------------------------
// Synthetic primitive shapes.
// ---------------------------------------------------------------------------

enum class ShapeClass { sphere, cube, cylinder, cone, torus, pyramid, capsule, disk };

std::optional<ShapeClass> shape_class_from_name(const std::string& name);
const char* shape_class_name(ShapeClass c);
std::vector<ShapeClass> all_shape_classes();

/// Uniform surface samples of one primitive in canonical pose (no rotation,
/// no jitter). Canonical sizes: sphere radius 1, cube half-extent 1.
PointSet sample_primitive(ShapeClass c, size_t n, Rng& rng);

// ---------------------------------------------------------------------------
// Normalization and train-time augmentation.
// ---------------------------------------------------------------------------

/// Centroid to the origin, then scale so the farthest point has norm 1.
/// A fully coincident cloud is only centered.
void normalize_unit_sphere(PointSet& points);

struct AugmentConfig {
    double scale_lo = 0.8;
    double scale_hi = 1.25;
    double jitter_sigma = 0.01;
    double jitter_clip = 0.05;
    double shift_range = 0.1;
};

/// Anisotropic per-axis scaling, clipped Gaussian jitter, global shift.
/// Training-time only; evaluation pipelines never call this.
PointSet augment(const PointSet& points, uint64_t seed, const AugmentConfig& cfg = {});

// ---------------------------------------------------------------------------
// Binary dataset container ("VAPC").
//
// Header: magic "VAPC", u32 version word (low 31 bits = 1, bit 31 set for
// segmentation payloads), u32 sample count, u32 points per sample, u32 extra
// channels, u32 class count. Per sample: f32 LE positions (N x 3), f32
// extras (N x E), then a u16 class label, or for segmentation a u16 object
// category followed by N u16 per-point labels.
// ---------------------------------------------------------------------------

struct DatasetSample {
    std::vector<float> xyz;             // N * 3
    std::vector<float> extras;          // N * E
    uint16_t label = 0;                 // class label / object category
    std::vector<uint16_t> point_labels; // segmentation only, size N

    PointSet to_point_set(size_t extra_channels) const;
};

struct DatasetContainer {
    uint32_t points_per_sample = 0;
    uint32_t extra_channels = 0;
    uint32_t num_classes = 0;
    bool segmentation = false;
    std::vector<DatasetSample> samples;
};

void write_container(const DatasetContainer& ds, std::ostream& out);
DatasetContainer read_container(std::istream& in);
void write_container_file(const DatasetContainer& ds, const std::string& path);
DatasetContainer read_container_file(const std::string& path);

/// Classification dataset of randomly oriented, aspect-jittered primitives,
/// normalized to the unit sphere. Labels follow the class-list order.
DatasetContainer synth_shapes(const std::vector<ShapeClass>& classes, size_t per_class,
                              size_t n_points, uint64_t seed);

}  // namespace vagcn
