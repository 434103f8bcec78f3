#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pvg/core/tensor.hpp"

namespace pvg {

// PVGT tensor files: "PVGT", u32 rank, rank x u32 extents, then the values as
// IEEE-754 f32. Everything little-endian.
std::vector<std::uint8_t> encode_pvgt(const Tensor<float>& tensor);
Tensor<float> decode_pvgt(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

void write_pvgt(const std::filesystem::path& path, const Tensor<float>& tensor);
Tensor<float> read_pvgt(const std::filesystem::path& path);

}  // namespace pvg
