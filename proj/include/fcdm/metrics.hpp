#pragma once

#include <cstddef>
#include <span>

#include "fcdm/grid.hpp"
#include "fcdm/masking.hpp"

namespace fcdm::metrics {

/// Row-major 2-D plane, non-owning.
struct Plane {
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

Plane plane(const Sinogram& s);
Plane plane(const Image& img);

inline constexpr double kPsnrIdentical = 99.0;

/// Gaussian-windowed SSIM (sigma 1.5, window 7, clamped to the largest odd
/// size not exceeding the smaller dimension), averaged over all valid
/// window positions. C1 = (0.01 L)^2, C2 = (0.03 L)^2.
double ssim(const Plane& a, const Plane& b, double data_range = 1.0);

/// 10 log10(L^2 / MSE); 99 dB when MSE is zero.
double psnr(const Plane& a, const Plane& b, double data_range = 1.0);

struct MaskedScores {
  double ssim = 0.0;
  double psnr = 0.0;
};

/// Stacks the masked rows of both sinograms (ascending angle order) and
/// scores the stacks.
MaskedScores eval_masked(const Sinogram& pred, const Sinogram& truth, const masking::MaskSpec& mask,
                         double data_range = 1.0);

/// Divides both sinograms by the maximum of `truth` before eval_masked, so
/// the unit data range holds.
MaskedScores eval_masked_normalized(const Sinogram& pred, const Sinogram& truth, const masking::MaskSpec& mask);

}  // namespace fcdm::metrics
