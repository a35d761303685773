#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fcdm/grid.hpp"
#include "fcdm/tensor.hpp"

// Parallel-beam geometry. Angles theta_i = i * pi / A, one detector bin per
// image column (D = N), detector and image centred on (N - 1) / 2.
namespace fcdm::radon {

enum class Filter { ramp, hann };
Filter parse_filter(const std::string& name);

double angle(std::size_t index, std::size_t n_angles);

/// Line integrals by rotated sampling with unit step and bilinear
/// interpolation. Rays with |s| >= N/2 integrate to zero.
Sinogram project(const Image& image, std::size_t n_angles);

/// Per-angle detector sums.
std::vector<double> angle_sums(const Sinogram& sino);

/// Pixel sum inside the inscribed circle (unit pixel area).
double total_absorption(const Image& image);

/// Filtered backprojection: rows zero-padded to the next power of two
/// >= 2D, filtered in frequency, backprojected bilinearly, scaled by
/// pi / (2A), masked to the inscribed circle.
Image fbp(const Sinogram& sino, Filter filter = Filter::ramp);

/// Differentiable FBP on a [A, D] or [1, A, D] tensor; returns [1, D, D].
Tensor fbp(const Tensor& sino, Filter filter = Filter::ramp);

/// Exact transpose of the FBP map, image (D*D values) to sinogram (A*D).
std::vector<double> fbp_adjoint(std::span<const double> image, std::size_t n_angles, std::size_t n_detectors,
                                Filter filter = Filter::ramp);

/// Frequency response on the P / 2 + 1 real-FFT bins of a row zero-padded to P.
std::vector<double> filter_response(std::size_t padded, Filter filter);

}  // namespace fcdm::radon
