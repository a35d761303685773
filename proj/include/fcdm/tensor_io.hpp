#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fcdm/tensor.hpp"

// Binary tensor container:
//   "SINT1\n" | u32 little-endian header length | UTF-8 JSON header
//   {"dtype":"f32"|"f64","shape":[...],"order":"row-major"} | raw LE payload
namespace fcdm::io {

inline constexpr char kMagic[] = "SINT1\n";

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

/// 8-bit P5 PGM, min-max normalized. Writes `<path>.json` with the
/// normalization {"min":..,"max":..}.
void write_pgm(const std::filesystem::path& path, const Tensor& image2d);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace fcdm::io
