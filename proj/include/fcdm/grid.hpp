#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fcdm/tensor.hpp"

namespace fcdm {

/// Square attenuation map, row-major, unit pixel spacing. Row 0 is the top
/// of the image; the rotation centre sits at ((N-1)/2, (N-1)/2).
struct Image {
  std::size_t size = 0;
  std::vector<double> pixels;

  Image() = default;
  explicit Image(std::size_t n) : size(n), pixels(n * n, 0.0) {}

  double& at(std::size_t row, std::size_t col) { return pixels[row * size + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels[row * size + col]; }

  bool operator==(const Image&) const = default;
};

/// A x D array of line integrals. Row i is the projection at angle i*pi/A.
struct Sinogram {
  std::size_t n_angles = 0;
  std::size_t n_detectors = 0;
  std::vector<double> values;

  Sinogram() = default;
  Sinogram(std::size_t angles, std::size_t detectors)
      : n_angles(angles), n_detectors(detectors), values(angles * detectors, 0.0) {}

  double& at(std::size_t angle, std::size_t det) { return values[angle * n_detectors + det]; }
  double at(std::size_t angle, std::size_t det) const { return values[angle * n_detectors + det]; }
  std::span<double> row(std::size_t angle) { return {values.data() + angle * n_detectors, n_detectors}; }
  std::span<const double> row(std::size_t angle) const {
    return {values.data() + angle * n_detectors, n_detectors};
  }

  bool operator==(const Sinogram&) const = default;
};

/// [1, A, D] tensor view of a sinogram (copies).
Tensor to_tensor(const Sinogram& sino, DType dtype = DType::f64);
/// Accepts [A, D] or [1, A, D].
Sinogram sinogram_from(const Tensor& t);
Tensor to_tensor(const Image& image, DType dtype = DType::f64);
/// Accepts [N, N] or [1, N, N].
Image image_from(const Tensor& t);

}  // namespace fcdm
