#include "vagcn/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vagcn/errors.hpp"

namespace vagcn {

// ---------------------------------------------------------------------------
// Mesh / OFF
// ---------------------------------------------------------------------------

double Mesh::face_area(size_t f) const {
    const auto& tri = faces[f];
    const double* a = vertices.data() + 3 * tri[0];
    const double* b = vertices.data() + 3 * tri[1];
    const double* c = vertices.data() + 3 * tri[2];
    const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
    const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
    const double cx = uy * vz - uz * vy;
    const double cy = uz * vx - ux * vz;
    const double cz = ux * vy - uy * vx;
    return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

namespace {

struct Line {
    std::string text;
    size_t no;  // 1-based
};

std::vector<Line> significant_lines(const std::string& text) {
    std::vector<Line> out;
    std::istringstream in(text);
    std::string line;
    size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        const size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        out.push_back({line.substr(first), no});
    }
    return out;
}

}  // namespace

Mesh parse_off(const std::string& text) {
    const auto lines = significant_lines(text);
    if (lines.empty()) throw ParseError(1, "missing counts line");

    size_t cursor = 0;
    std::string counts_text;
    size_t counts_line = lines[0].no;
    if (lines[0].text.rfind("OFF", 0) == 0) {
        const std::string rest = lines[0].text.substr(3);
        if (rest.find_first_not_of(" \t\r") != std::string::npos) {
            counts_text = rest;  // fused "OFF4 4 0" dialect
            cursor = 1;
        } else {
            if (lines.size() < 2) throw ParseError(lines[0].no, "missing counts line");
            counts_text = lines[1].text;
            counts_line = lines[1].no;
            cursor = 2;
        }
    } else {
        counts_text = lines[0].text;
        cursor = 1;
    }

    long long v_count = -1, f_count = -1, e_count = 0;
    {
        std::istringstream cs(counts_text);
        if (!(cs >> v_count >> f_count)) throw ParseError(counts_line, "missing counts");
        cs >> e_count;  // edge count is ignored when present
        if (v_count < 1 || f_count < 0) throw ParseError(counts_line, "invalid counts");
    }

    Mesh mesh;
    mesh.vertices.reserve(static_cast<size_t>(v_count) * 3);
    for (long long i = 0; i < v_count; ++i) {
        if (cursor >= lines.size())
            throw ParseError(lines.back().no, "vertex count mismatch: expected " +
                                                  std::to_string(v_count) + " vertices, got " +
                                                  std::to_string(i));
        std::istringstream vs(lines[cursor].text);
        double x, y, z;
        if (!(vs >> x >> y >> z))
            throw ParseError(lines[cursor].no, "malformed vertex line");
        mesh.vertices.push_back(x);
        mesh.vertices.push_back(y);
        mesh.vertices.push_back(z);
        ++cursor;
    }

    for (long long f = 0; f < f_count; ++f) {
        if (cursor >= lines.size())
            throw ParseError(lines.back().no, "face count mismatch: expected " +
                                                  std::to_string(f_count) + " faces, got " +
                                                  std::to_string(f));
        std::istringstream fs(lines[cursor].text);
        long long n;
        if (!(fs >> n)) throw ParseError(lines[cursor].no, "malformed face line");
        if (n < 3)
            throw ParseError(lines[cursor].no,
                             "face with " + std::to_string(n) + " vertices (need >= 3)");
        std::vector<int32_t> poly(static_cast<size_t>(n));
        for (auto& id : poly) {
            long long raw;
            if (!(fs >> raw)) throw ParseError(lines[cursor].no, "truncated face line");
            if (raw < 0 || raw >= v_count)
                throw ParseError(lines[cursor].no, "vertex index " + std::to_string(raw) +
                                                       " out of range [0," +
                                                       std::to_string(v_count) + ")");
            id = static_cast<int32_t>(raw);
        }
        // Fan triangulation; exact for convex polygons.
        for (size_t i = 1; i + 1 < poly.size(); ++i)
            mesh.faces.push_back({poly[0], poly[i], poly[i + 1]});
        ++cursor;
    }

    // Keep only positive-area triangles.
    std::vector<std::array<int32_t, 3>> kept;
    kept.reserve(mesh.faces.size());
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        if (mesh.face_area(f) > 0.0)
            kept.push_back(mesh.faces[f]);
        else
            ++mesh.dropped_degenerate;
    }
    mesh.faces = std::move(kept);
    return mesh;
}

std::string write_off(const Mesh& mesh) {
    std::ostringstream out;
    out.precision(17);
    out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.faces.size() << " 0\n";
    for (size_t v = 0; v < mesh.vertex_count(); ++v)
        out << mesh.vertices[3 * v] << ' ' << mesh.vertices[3 * v + 1] << ' '
            << mesh.vertices[3 * v + 2] << '\n';
    for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Surface sampling
// ---------------------------------------------------------------------------

PointSet sample_surface(const Mesh& mesh, size_t n, Rng& rng, std::vector<int32_t>* face_ids) {
    if (mesh.faces.empty()) throw ValueError("sample_surface: mesh has no positive-area faces");
    std::vector<double> cumulative(mesh.faces.size());
    double total = 0.0;
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        total += mesh.face_area(f);
        cumulative[f] = total;
    }
    if (!(total > 0.0)) throw ValueError("sample_surface: zero total surface area");

    PointSet pts;
    pts.n = n;
    pts.xyz.resize(n * 3);
    if (face_ids) face_ids->assign(n, 0);
    for (size_t s = 0; s < n; ++s) {
        const double u = rng.uniform01() * total;
        const size_t f = static_cast<size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        const size_t fi = std::min(f, mesh.faces.size() - 1);
        const auto& tri = mesh.faces[fi];
        const double* a = mesh.vertices.data() + 3 * tri[0];
        const double* b = mesh.vertices.data() + 3 * tri[1];
        const double* c = mesh.vertices.data() + 3 * tri[2];
        // Uniform barycentric placement via the sqrt trick.
        const double r1 = std::sqrt(rng.uniform01());
        const double r2 = rng.uniform01();
        const double wa = 1.0 - r1, wb = r1 * (1.0 - r2), wc = r1 * r2;
        for (int d = 0; d < 3; ++d)
            pts.xyz[3 * s + d] = wa * a[d] + wb * b[d] + wc * c[d];
        if (face_ids) (*face_ids)[s] = static_cast<int32_t>(fi);
    }
    return pts;
}

PointSet sample_surface(const Mesh& mesh, size_t n, uint64_t seed) {
    Rng rng(seed);
    return sample_surface(mesh, n, rng, nullptr);
}

// ---------------------------------------------------------------------------
// Primitive samplers (canonical pose)
// ---------------------------------------------------------------------------

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

void unit_sphere_dir(Rng& rng, double* out) {
    double x, y, z, n2;
    do {
        x = rng.normal();
        y = rng.normal();
        z = rng.normal();
        n2 = x * x + y * y + z * z;
    } while (n2 < 1e-24);
    const double inv = 1.0 / std::sqrt(n2);
    out[0] = x * inv;
    out[1] = y * inv;
    out[2] = z * inv;
}

void sample_sphere(size_t n, Rng& rng, double* out) {
    for (size_t i = 0; i < n; ++i) unit_sphere_dir(rng, out + 3 * i);
}

void sample_cube(size_t n, Rng& rng, double* out) {
    for (size_t i = 0; i < n; ++i) {
        const size_t face = rng.uniform_index(6);
        const double u = rng.uniform(-1.0, 1.0);
        const double v = rng.uniform(-1.0, 1.0);
        const size_t axis = face / 2;
        const double sign = (face % 2) ? -1.0 : 1.0;
        double p[3];
        p[axis] = sign;
        p[(axis + 1) % 3] = u;
        p[(axis + 2) % 3] = v;
        std::copy(p, p + 3, out + 3 * i);
    }
}

void sample_cylinder(size_t n, Rng& rng, double* out) {
    const double r = 0.7, h = 2.0;
    const double lateral = kTwoPi * r * h;
    const double cap = kPi * r * r;
    const double total = lateral + 2.0 * cap;
    for (size_t i = 0; i < n; ++i) {
        const double pick = rng.uniform01() * total;
        const double theta = rng.uniform(0.0, kTwoPi);
        double* p = out + 3 * i;
        if (pick < lateral) {
            p[0] = r * std::cos(theta);
            p[1] = r * std::sin(theta);
            p[2] = rng.uniform(-h / 2, h / 2);
        } else {
            const double rr = r * std::sqrt(rng.uniform01());
            p[0] = rr * std::cos(theta);
            p[1] = rr * std::sin(theta);
            p[2] = pick < lateral + cap ? h / 2 : -h / 2;
        }
    }
}

void sample_cone(size_t n, Rng& rng, double* out) {
    const double r = 1.0, h = 2.0;
    const double slant = std::sqrt(r * r + h * h);
    const double lateral = kPi * r * slant;
    const double base = kPi * r * r;
    for (size_t i = 0; i < n; ++i) {
        const double pick = rng.uniform01() * (lateral + base);
        const double theta = rng.uniform(0.0, kTwoPi);
        double* p = out + 3 * i;
        if (pick < lateral) {
            const double t = std::sqrt(rng.uniform01());  // density grows with radius
            p[0] = r * t * std::cos(theta);
            p[1] = r * t * std::sin(theta);
            p[2] = h / 2 - h * t;
        } else {
            const double rr = r * std::sqrt(rng.uniform01());
            p[0] = rr * std::cos(theta);
            p[1] = rr * std::sin(theta);
            p[2] = -h / 2;
        }
    }
}

void sample_torus(size_t n, Rng& rng, double* out) {
    const double R = 1.0, r = 0.35;
    for (size_t i = 0; i < n; ++i) {
        // Rejection on the tube angle keeps the sampling uniform by area.
        double phi;
        do {
            phi = rng.uniform(0.0, kTwoPi);
        } while (rng.uniform01() > (R + r * std::cos(phi)) / (R + r));
        const double theta = rng.uniform(0.0, kTwoPi);
        double* p = out + 3 * i;
        p[0] = (R + r * std::cos(phi)) * std::cos(theta);
        p[1] = (R + r * std::cos(phi)) * std::sin(theta);
        p[2] = r * std::sin(phi);
    }
}

Mesh pyramid_mesh() {
    Mesh m;
    m.vertices = {-1, -1, -0.75, 1, -1, -0.75, 1, 1, -0.75, -1, 1, -0.75, 0, 0, 0.75};
    m.faces = {{0, 2, 1}, {0, 3, 2}, {0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}};
    return m;
}

void sample_pyramid(size_t n, Rng& rng, double* out) {
    static const Mesh mesh = pyramid_mesh();
    PointSet pts = sample_surface(mesh, n, rng, nullptr);
    std::copy(pts.xyz.begin(), pts.xyz.end(), out);
}

void sample_capsule(size_t n, Rng& rng, double* out) {
    const double r = 0.5, len = 1.5;
    const double lateral = kTwoPi * r * len;
    const double caps = 4.0 * kPi * r * r;  // two hemispheres = one sphere
    for (size_t i = 0; i < n; ++i) {
        const double pick = rng.uniform01() * (lateral + caps);
        double* p = out + 3 * i;
        if (pick < lateral) {
            const double theta = rng.uniform(0.0, kTwoPi);
            p[0] = r * std::cos(theta);
            p[1] = r * std::sin(theta);
            p[2] = rng.uniform(-len / 2, len / 2);
        } else {
            double d[3];
            unit_sphere_dir(rng, d);
            p[0] = r * d[0];
            p[1] = r * d[1];
            p[2] = r * d[2] + (d[2] >= 0.0 ? len / 2 : -len / 2);
        }
    }
}

void sample_disk(size_t n, Rng& rng, double* out) {
    for (size_t i = 0; i < n; ++i) {
        const double rr = std::sqrt(rng.uniform01());
        const double theta = rng.uniform(0.0, kTwoPi);
        double* p = out + 3 * i;
        p[0] = rr * std::cos(theta);
        p[1] = rr * std::sin(theta);
        p[2] = 0.0;
    }
}

}  // namespace

std::optional<ShapeClass> shape_class_from_name(const std::string& name) {
    for (ShapeClass c : all_shape_classes())
        if (name == shape_class_name(c)) return c;
    return std::nullopt;
}

const char* shape_class_name(ShapeClass c) {
    switch (c) {
        case ShapeClass::sphere: return "sphere";
        case ShapeClass::cube: return "cube";
        case ShapeClass::cylinder: return "cylinder";
        case ShapeClass::cone: return "cone";
        case ShapeClass::torus: return "torus";
        case ShapeClass::pyramid: return "pyramid";
        case ShapeClass::capsule: return "capsule";
        case ShapeClass::disk: return "disk";
    }
    return "?";
}

std::vector<ShapeClass> all_shape_classes() {
    return {ShapeClass::sphere,  ShapeClass::cube,    ShapeClass::cylinder, ShapeClass::cone,
            ShapeClass::torus,   ShapeClass::pyramid, ShapeClass::capsule,  ShapeClass::disk};
}

PointSet sample_primitive(ShapeClass c, size_t n, Rng& rng) {
    PointSet pts;
    pts.n = n;
    pts.xyz.resize(n * 3);
    double* out = pts.xyz.data();
    switch (c) {
        case ShapeClass::sphere: sample_sphere(n, rng, out); break;
        case ShapeClass::cube: sample_cube(n, rng, out); break;
        case ShapeClass::cylinder: sample_cylinder(n, rng, out); break;
        case ShapeClass::cone: sample_cone(n, rng, out); break;
        case ShapeClass::torus: sample_torus(n, rng, out); break;
        case ShapeClass::pyramid: sample_pyramid(n, rng, out); break;
        case ShapeClass::capsule: sample_capsule(n, rng, out); break;
        case ShapeClass::disk: sample_disk(n, rng, out); break;
    }
    return pts;
}

// ---------------------------------------------------------------------------
// Normalization / augmentation
// ---------------------------------------------------------------------------

void normalize_unit_sphere(PointSet& points) {
    if (points.n == 0) throw ValueError("normalize_unit_sphere: empty point set");
    double cx = 0, cy = 0, cz = 0;
    for (size_t i = 0; i < points.n; ++i) {
        cx += points.xyz[3 * i];
        cy += points.xyz[3 * i + 1];
        cz += points.xyz[3 * i + 2];
    }
    cx /= static_cast<double>(points.n);
    cy /= static_cast<double>(points.n);
    cz /= static_cast<double>(points.n);
    double max2 = 0.0;
    for (size_t i = 0; i < points.n; ++i) {
        points.xyz[3 * i] -= cx;
        points.xyz[3 * i + 1] -= cy;
        points.xyz[3 * i + 2] -= cz;
        const double n2 = points.xyz[3 * i] * points.xyz[3 * i] +
                          points.xyz[3 * i + 1] * points.xyz[3 * i + 1] +
                          points.xyz[3 * i + 2] * points.xyz[3 * i + 2];
        max2 = std::max(max2, n2);
    }
    if (max2 < 1e-24) return;  // coincident cloud: center only
    const double inv = 1.0 / std::sqrt(max2);
    for (double& v : points.xyz) v *= inv;
}

PointSet augment(const PointSet& points, uint64_t seed, const AugmentConfig& cfg) {
    Rng rng(seed);
    PointSet out = points;
    double sc[3], sh[3];
    for (int d = 0; d < 3; ++d) sc[d] = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    for (int d = 0; d < 3; ++d) sh[d] = rng.uniform(-cfg.shift_range, cfg.shift_range);
    for (size_t i = 0; i < out.n; ++i)
        for (int d = 0; d < 3; ++d) {
            double jit = cfg.jitter_sigma * rng.normal();
            jit = std::clamp(jit, -cfg.jitter_clip, cfg.jitter_clip);
            out.xyz[3 * i + d] = points.xyz[3 * i + d] * sc[d] + jit + sh[d];
        }
    return out;
}

// ---------------------------------------------------------------------------
// VAPC container
// ---------------------------------------------------------------------------

namespace {

constexpr uint32_t kSegFlag = 0x80000000u;
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ostream& out, uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("container: truncated header or payload");
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

uint16_t get_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (!in) throw FormatError("container: truncated payload");
    return static_cast<uint16_t>(b[0] | b[1] << 8);
}

float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

}  // namespace

PointSet DatasetSample::to_point_set(size_t extra_channels) const {
    PointSet p;
    p.n = xyz.size() / 3;
    p.xyz.assign(xyz.begin(), xyz.end());
    p.extra_channels = extra_channels;
    p.extras.assign(extras.begin(), extras.end());
    return p;
}

void write_container(const DatasetContainer& ds, std::ostream& out) {
    out.write("VAPC", 4);
    put_u32(out, kVersion | (ds.segmentation ? kSegFlag : 0));
    put_u32(out, static_cast<uint32_t>(ds.samples.size()));
    put_u32(out, ds.points_per_sample);
    put_u32(out, ds.extra_channels);
    put_u32(out, ds.num_classes);
    const size_t n = ds.points_per_sample;
    for (const auto& s : ds.samples) {
        if (s.xyz.size() != n * 3)
            throw ShapeError("container: sample has " + std::to_string(s.xyz.size() / 3) +
                             " points, header says " + std::to_string(n));
        if (s.extras.size() != n * ds.extra_channels)
            throw ShapeError("container: extra channel payload mismatch");
        for (float v : s.xyz) put_f32(out, v);
        for (float v : s.extras) put_f32(out, v);
        if (ds.segmentation) {
            put_u16(out, s.label);
            if (s.point_labels.size() != n)
                throw ShapeError("container: per-point label count mismatch");
            for (uint16_t l : s.point_labels) put_u16(out, l);
        } else {
            put_u16(out, s.label);
        }
    }
    if (!out) throw IoError("container: write failed");
}

DatasetContainer read_container(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "VAPC", 4) != 0)
        throw FormatError("container: bad magic (expected VAPC)");
    const uint32_t vword = get_u32(in);
    if ((vword & ~kSegFlag) != kVersion)
        throw FormatError("container: unsupported version " + std::to_string(vword & ~kSegFlag));
    DatasetContainer ds;
    ds.segmentation = (vword & kSegFlag) != 0;
    const uint32_t count = get_u32(in);
    ds.points_per_sample = get_u32(in);
    ds.extra_channels = get_u32(in);
    ds.num_classes = get_u32(in);
    const size_t n = ds.points_per_sample;
    ds.samples.resize(count);
    for (auto& s : ds.samples) {
        s.xyz.resize(n * 3);
        for (float& v : s.xyz) v = get_f32(in);
        s.extras.resize(n * ds.extra_channels);
        for (float& v : s.extras) v = get_f32(in);
        if (ds.segmentation) {
            s.label = get_u16(in);
            s.point_labels.resize(n);
            for (uint16_t& l : s.point_labels) {
                l = get_u16(in);
                if (l >= ds.num_classes)
                    throw FormatError("container: point label " + std::to_string(l) +
                                      " >= class count " + std::to_string(ds.num_classes));
            }
        } else {
            s.label = get_u16(in);
            if (s.label >= ds.num_classes)
                throw FormatError("container: label " + std::to_string(s.label) +
                                  " >= class count " + std::to_string(ds.num_classes));
        }
    }
    // The payload must end exactly where the header arithmetic says.
    in.peek();
    if (!in.eof()) throw FormatError("container: trailing bytes after payload");
    return ds;
}

void write_container_file(const DatasetContainer& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_container(ds, out);
}

DatasetContainer read_container_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    return read_container(in);
}

// ---------------------------------------------------------------------------
// Synthetic shape dataset
// ---------------------------------------------------------------------------

namespace {

// Uniform random rotation from a normalized Gaussian quaternion.
void random_rotation(Rng& rng, double R[3][3]) {
    double q[4], n2 = 0.0;
    do {
        n2 = 0.0;
        for (double& v : q) {
            v = rng.normal();
            n2 += v * v;
        }
    } while (n2 < 1e-24);
    const double inv = 1.0 / std::sqrt(n2);
    const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
    R[0][0] = 1 - 2 * (y * y + z * z);
    R[0][1] = 2 * (x * y - w * z);
    R[0][2] = 2 * (x * z + w * y);
    R[1][0] = 2 * (x * y + w * z);
    R[1][1] = 1 - 2 * (x * x + z * z);
    R[1][2] = 2 * (y * z - w * x);
    R[2][0] = 2 * (x * z - w * y);
    R[2][1] = 2 * (y * z + w * x);
    R[2][2] = 1 - 2 * (x * x + y * y);
}

}  // namespace

DatasetContainer synth_shapes(const std::vector<ShapeClass>& classes, size_t per_class,
                              size_t n_points, uint64_t seed) {
    if (classes.size() < 2) throw ValueError("synth_shapes: need at least 2 classes");
    DatasetContainer ds;
    ds.points_per_sample = static_cast<uint32_t>(n_points);
    ds.extra_channels = 0;
    ds.num_classes = static_cast<uint32_t>(classes.size());
    ds.segmentation = false;
    ds.samples.reserve(classes.size() * per_class);
    for (size_t c = 0; c < classes.size(); ++c) {
        for (size_t s = 0; s < per_class; ++s) {
            // Stream keyed by (seed, class, instance) so generation order is
            // irrelevant.
            Rng rng(seed ^ (0x9e3779b97f4a7c15ull * (c + 1)) ^ (0xbf58476d1ce4e5b9ull * (s + 1)));
            PointSet pts = sample_primitive(classes[c], n_points, rng);
            double aspect[3];
            for (double& a : aspect) a = rng.uniform(0.85, 1.15);
            double R[3][3];
            random_rotation(rng, R);
            for (size_t i = 0; i < pts.n; ++i) {
                const double px = pts.xyz[3 * i] * aspect[0];
                const double py = pts.xyz[3 * i + 1] * aspect[1];
                const double pz = pts.xyz[3 * i + 2] * aspect[2];
                pts.xyz[3 * i] = R[0][0] * px + R[0][1] * py + R[0][2] * pz;
                pts.xyz[3 * i + 1] = R[1][0] * px + R[1][1] * py + R[1][2] * pz;
                pts.xyz[3 * i + 2] = R[2][0] * px + R[2][1] * py + R[2][2] * pz;
            }
            normalize_unit_sphere(pts);
            DatasetSample sample;
            sample.label = static_cast<uint16_t>(c);
            sample.xyz.resize(n_points * 3);
            for (size_t i = 0; i < sample.xyz.size(); ++i)
                sample.xyz[i] = static_cast<float>(pts.xyz[i]);
            ds.samples.push_back(std::move(sample));
        }
    }
    return ds;
}

}  // namespace vagcn
