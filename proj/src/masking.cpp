#include "fcdm/masking.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "fcdm/error.hpp"
#include "fcdm/rng.hpp"

namespace fcdm::masking {

bool MaskSpec::contains(std::size_t angle) const {
  return std::binary_search(masked.begin(), masked.end(), angle);
}

MaskSpec sample_mask(std::size_t n_angles, double ratio, std::uint64_t seed) {
  if (n_angles < 1) throw ContractViolation("sample_mask: need at least one angle");
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw ContractViolation("sample_mask: ratio must lie in [0, 1], got " + std::to_string(ratio));
  }
  const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n_angles)));
  std::vector<std::size_t> pool(n_angles);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n_angles - i));
    std::swap(pool[i], pool[j]);
  }
  MaskSpec spec{n_angles, ratio, std::vector<std::size_t>(pool.begin(), pool.begin() + static_cast<long>(count)), seed};
  std::sort(spec.masked.begin(), spec.masked.end());
  return spec;
}

std::vector<std::uint8_t> row_flags(const MaskSpec& mask) {
  std::vector<std::uint8_t> flags(mask.n_angles, 0);
  for (std::size_t a : mask.masked) flags.at(a) = 1;
  return flags;
}

Masked apply_mask(const Sinogram& sino, const MaskSpec& mask) {
  if (mask.n_angles != sino.n_angles) {
    throw ContractViolation("apply_mask: mask covers " + std::to_string(mask.n_angles) + " angles, sinogram has " +
                            std::to_string(sino.n_angles));
  }
  Masked out{sino, Sinogram(sino.n_angles, sino.n_detectors)};
  for (std::size_t a : mask.masked) {
    if (a >= sino.n_angles) throw ContractViolation("apply_mask: masked index out of range");
    std::fill(out.sinogram.row(a).begin(), out.sinogram.row(a).end(), 0.0);
    std::fill(out.indicator.row(a).begin(), out.indicator.row(a).end(), 1.0);
  }
  return out;
}

std::string to_json(const MaskSpec& mask) {
  nlohmann::ordered_json j;
  j["n_angles"] = mask.n_angles;
  j["ratio"] = mask.ratio;
  j["masked"] = mask.masked;
  j["seed"] = mask.seed;
  return j.dump(2) + "\n";
}

MaskSpec mask_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("mask JSON: ") + e.what());
  }
  for (const char* key : {"n_angles", "ratio", "masked", "seed"}) {
    if (!j.contains(key)) throw ContractViolation(std::string("mask JSON: missing field '") + key + "'");
  }
  MaskSpec m;
  m.n_angles = j["n_angles"].get<std::size_t>();
  m.ratio = j["ratio"].get<double>();
  m.masked = j["masked"].get<std::vector<std::size_t>>();
  m.seed = j["seed"].get<std::uint64_t>();
  std::sort(m.masked.begin(), m.masked.end());
  if (std::adjacent_find(m.masked.begin(), m.masked.end()) != m.masked.end() ||
      (!m.masked.empty() && m.masked.back() >= m.n_angles)) {
    throw ContractViolation("mask JSON: indices must be distinct and below n_angles");
  }
  return m;
}

}  // namespace fcdm::masking
