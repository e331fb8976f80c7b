#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vagcn/tensor.hpp"

namespace vagcn {

// Weight checkpoint ("VAGW"): magic, u32 version=1, u32 tensor count, then
// per tensor a u32 name length + UTF-8 name, u8 rank, u32 extents, and the
// f32 little-endian payload.

struct NamedTensorF32 {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

void write_checkpoint(const std::vector<NamedTensorF32>& tensors, std::ostream& out);
std::vector<NamedTensorF32> read_checkpoint(std::istream& in);
void write_checkpoint_file(const std::vector<NamedTensorF32>& tensors, const std::string& path);
std::vector<NamedTensorF32> read_checkpoint_file(const std::string& path);

template <class T>
NamedTensorF32 to_named_f32(const std::string& name, const Tensor<T>& t) {
    NamedTensorF32 n;
    n.name = name;
    n.shape = t.shape();
    n.data.resize(t.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = static_cast<float>(t[i]);
    return n;
}

}  // namespace vagcn
