#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ovtok/tensor.hpp"

namespace ovtok {

/// Binary tensor container. Layout: magic "ORTN", u8 dtype code
/// (0 = f32, 1 = f64, 2 = u8), u8 ndim, ndim x u32 little-endian extents,
/// then the row-major payload in little-endian byte order. The u8 code
/// carries raw image frames; numeric tensors use f32/f64.
enum class OrtnType : std::uint8_t { f32 = 0, f64 = 1, u8 = 2 };

void write_ortn(const std::filesystem::path& path, const Tensor& t, OrtnType type = OrtnType::f64);
Tensor read_ortn(const std::filesystem::path& path);

void write_ortn_u8(const std::filesystem::path& path, const std::vector<int>& dims,
                   const std::vector<std::uint8_t>& data);
std::pair<std::vector<int>, std::vector<std::uint8_t>> read_ortn_u8(const std::filesystem::path& path);

/// FNV-1a hash of a file's bytes; throws if the file cannot be read.
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace ovtok
