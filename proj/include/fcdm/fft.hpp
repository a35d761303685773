#pragma once

#include <complex>
#include <cstddef>
#include <span>

// Thin wrappers over FFTW for one-dimensional lines.
//
// Normalization: forward transforms are unnormalized, inverse transforms
// divide by the transform length.
namespace fcdm::fft {

using Complex = std::complex<double>;

/// Real-to-half-complex transform. `out` must hold in.size()/2 + 1 bins.
void rfft(std::span<const double> in, std::span<Complex> out);

/// Inverse of rfft for a real signal of length out.size(). The imaginary
/// parts of the DC bin (and Nyquist bin for even lengths) are ignored.
void irfft(std::span<const Complex> in, std::span<double> out);

/// Complex transform in place; `inverse` applies the 1/N scaling.
void fft(std::span<Complex> data, bool inverse);

/// Number of half-spectrum bins for a real line of length n.
constexpr std::size_t half_bins(std::size_t n) { return n / 2 + 1; }

}  // namespace fcdm::fft
