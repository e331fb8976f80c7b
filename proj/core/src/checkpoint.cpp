#include "vagcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vagcn/errors.hpp"

namespace vagcn {

namespace {

constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("checkpoint: truncated file");
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

}  // namespace

void write_checkpoint(const std::vector<NamedTensorF32>& tensors, std::ostream& out) {
    out.write("VAGW", 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        put_u32(out, static_cast<uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        const unsigned char rank = static_cast<unsigned char>(t.shape.size());
        out.write(reinterpret_cast<const char*>(&rank), 1);
        size_t n = 1;
        for (size_t e : t.shape) {
            put_u32(out, static_cast<uint32_t>(e));
            n *= e;
        }
        if (n != t.data.size())
            throw ShapeError("checkpoint: tensor '" + t.name + "' payload does not match shape");
        for (float v : t.data) put_u32(out, std::bit_cast<uint32_t>(v));
    }
    if (!out) throw IoError("checkpoint: write failed");
}

std::vector<NamedTensorF32> read_checkpoint(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "VAGW", 4) != 0)
        throw FormatError("checkpoint: bad magic (expected VAGW)");
    const uint32_t version = get_u32(in);
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const uint32_t count = get_u32(in);
    std::vector<NamedTensorF32> tensors(count);
    for (auto& t : tensors) {
        const uint32_t name_len = get_u32(in);
        t.name.resize(name_len);
        in.read(t.name.data(), name_len);
        unsigned char rank = 0;
        in.read(reinterpret_cast<char*>(&rank), 1);
        if (!in) throw FormatError("checkpoint: truncated file");
        t.shape.resize(rank);
        size_t n = 1;
        for (auto& e : t.shape) {
            e = get_u32(in);
            n *= e;
        }
        t.data.resize(n);
        for (float& v : t.data) v = std::bit_cast<float>(get_u32(in));
    }
    in.peek();
    if (!in.eof()) throw FormatError("checkpoint: trailing bytes after payload");
    return tensors;
}

void write_checkpoint_file(const std::vector<NamedTensorF32>& tensors, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_checkpoint(tensors, out);
}

std::vector<NamedTensorF32> read_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    return read_checkpoint(in);
}

}  // namespace vagcn
