#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcdm/grid.hpp"

namespace fcdm::masking {

/// Which angle rows are missing, and how that set was drawn.
struct MaskSpec {
  std::size_t n_angles = 0;
  double ratio = 0.0;
  std::vector<std::size_t> masked;  // sorted, distinct
  std::uint64_t seed = 0;

  bool contains(std::size_t angle) const;
  bool operator==(const MaskSpec&) const = default;
};

/// round(ratio * A) distinct indices drawn uniformly (partial Fisher-Yates).
MaskSpec sample_mask(std::size_t n_angles, double ratio, std::uint64_t seed);

/// Per-row flags, 1 for masked rows.
std::vector<std::uint8_t> row_flags(const MaskSpec& mask);

struct Masked {
  Sinogram sinogram;   // masked rows zeroed
  Sinogram indicator;  // 1 on masked rows
};

Masked apply_mask(const Sinogram& sino, const MaskSpec& mask);

std::string to_json(const MaskSpec& mask);
MaskSpec mask_from_json(const std::string& text);

}  // namespace fcdm::masking
