#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fcdm/rng.hpp"
#include "fcdm/tensor.hpp"

namespace fcdm::spectral {

enum class Axis { width, height };
enum class Activation { identity, gelu };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

/// Tensor axis index of a [C, H, W] feature map.
constexpr std::size_t tensor_axis(Axis axis) { return axis == Axis::width ? 2 : 1; }

/// Learnable per-channel frequency kernels. Complex kernels are stored
/// stacked: rows [0, C) hold real parts, rows [C, 2C) imaginary parts.
///   kernel_w: [2C, W/2 + 1]    kernel_h: [2C, H/2 + 1]
struct FreqConvParams {
  Tensor kernel_w;
  Tensor kernel_h;
  double alpha_w = 0.45;
  double alpha_h = 0.55;
  Activation activation = Activation::gelu;
};

/// Frequency response of the unit impulse: ones in the real half.
Tensor delta_kernel(std::size_t channels, std::size_t length);

/// Stacked complex transform of a real per-channel spatial kernel
/// [C, length] (circular convolution kernel along one axis).
Tensor kernel_from_spatial(const Tensor& spatial);

/// Delta kernels for a [C, H, W] input plus N(0, sigma^2) noise on every
/// real and imaginary coefficient.
FreqConvParams init_freq_params(std::size_t channels, std::size_t height, std::size_t width, Rng& rng,
                                double sigma = 0.01, Activation activation = Activation::gelu);

/// act(irfft(kernel (.) rfft(h))) along one axis of h [C, H, W]; the kernel
/// is shared across the other spatial axis.
Tensor freq_conv_axis(const Tensor& h, const Tensor& kernel, Axis axis, Activation activation);

/// alpha_w * y_w + alpha_h * y_h. A branch whose weight is exactly zero is
/// not evaluated.
Tensor freq_conv_block(const Tensor& h, const FreqConvParams& params);

/// Per-channel circular convolution along one axis, computed directly in
/// O(n * taps): out[.., n] = sum_j kernel[c, j] * in[.., (n - j) mod len].
Tensor direct_circular_conv(const Tensor& h, const Tensor& spatial_kernel, Axis axis);

struct BenchSize {
  std::size_t channels, height, width, taps;
};

struct BenchRow {
  BenchSize size;
  double t_direct_ms = 0;
  double t_fft_ms = 0;
  double max_rel_diff = 0;
  // Operation-count estimates for downsampling factor r = 2, k_s = k_r = taps,
  // and a two-layer 3x3 encoder.
  double o_down = 0, o_s = 0, o_f = 0, o_r = 0, o_e = 0;
};

/// Times the direct and FFT circular convolutions along the width for each
/// size after checking they agree to 1e-5 relative.
std::vector<BenchRow> bench_conv(const std::vector<BenchSize>& sizes, std::uint64_t seed = 0, int repeats = 3);

std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace fcdm::spectral
