#include "fcdm/grid.hpp"

#include "fcdm/error.hpp"

namespace fcdm {

namespace {
// Returns (rows, cols) for [R, C] or [1, R, C].
std::pair<std::size_t, std::size_t> plane_dims(const Tensor& t, const char* what) {
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  if (t.rank() == 3 && t.dim(0) == 1) return {t.dim(1), t.dim(2)};
  throw ContractViolation(std::string(what) + ": expected [R, C] or [1, R, C], got " + shape_string(t.shape()));
}
}  // namespace

Tensor to_tensor(const Sinogram& sino, DType dtype) {
  return Tensor::from({1, sino.n_angles, sino.n_detectors}, sino.values, dtype);
}

Sinogram sinogram_from(const Tensor& t) {
  auto [rows, cols] = plane_dims(t, "sinogram_from");
  Sinogram s(rows, cols);
  s.values.assign(t.data().begin(), t.data().end());
  return s;
}

Tensor to_tensor(const Image& image, DType dtype) {
  return Tensor::from({1, image.size, image.size}, image.pixels, dtype);
}

Image image_from(const Tensor& t) {
  auto [rows, cols] = plane_dims(t, "image_from");
  if (rows != cols) throw ContractViolation("image_from: image must be square, got " + shape_string(t.shape()));
  Image img(rows);
  img.pixels.assign(t.data().begin(), t.data().end());
  return img;
}

}  // namespace fcdm
