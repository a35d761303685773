#include "fcdm/losses.hpp"

#include <array>

#include "fcdm/error.hpp"
#include "fcdm/radon.hpp"

namespace fcdm::losses {
namespace {

std::size_t n_angles_of(const Tensor& t) {
  if (t.rank() == 2) return t.dim(0);
  if (t.rank() == 3 && t.dim(0) == 1) return t.dim(1);
  throw ContractViolation("expected a sinogram tensor [A, D] or [1, A, D], got " + shape_string(t.shape()));
}

void require_match(const Tensor& pred, const Tensor& truth) {
  n_angles_of(pred);
  if (pred.shape() != truth.shape()) {
    throw ContractViolation("loss: shape mismatch " + shape_string(pred.shape()) + " vs " +
                            shape_string(truth.shape()));
  }
}

}  // namespace

Tensor pixel_loss(const Tensor& pred, const Tensor& truth) {
  require_match(pred, truth);
  return mean(square(sub(pred, truth)));
}

Tensor absorp_sum_loss(const Tensor& pred) {
  const std::size_t n_angles = n_angles_of(pred);
  const Tensor mean_angle_sum = scale(sum(pred), 1.0 / static_cast<double>(n_angles));
  const Tensor absorption = sum(radon::fbp(pred, radon::Filter::ramp));
  return square(sub(mean_angle_sum, absorption));
}

Tensor freq_loss(const Tensor& pred, const Tensor& truth) {
  require_match(pred, truth);
  const std::size_t a = n_angles_of(pred);
  const std::size_t d = pred.shape().back();
  const Tensor diff = reshape(sub(pred, truth), {1, a, d});
  // Real signal as stacked complex [re; im = 0], then a full 2-D DFT.
  const std::array<Tensor, 2> parts{diff, Tensor::zeros({1, a, d}, diff.dtype())};
  const Tensor spectrum = fft_axis(fft_axis(concat_channels(parts), 2, false), 1, false);
  return sum(square(spectrum));
}

LossBreakdown total_loss(const Tensor& pred, const Tensor& truth, const LossWeights& weights) {
  if (weights.w_pixel < 0 || weights.w_absorp < 0 || weights.w_freq < 0) {
    throw ContractViolation("total_loss: weights must be non-negative");
  }
  const Tensor lp = pixel_loss(pred, truth);
  const Tensor la = absorp_sum_loss(pred);
  const Tensor lf = freq_loss(pred, truth);
  Tensor total = scale(lp, weights.w_pixel);
  if (weights.w_absorp != 0.0) total = add(total, scale(la, weights.w_absorp));
  if (weights.w_freq != 0.0) total = add(total, scale(lf, weights.w_freq));
  return {total, lp.item(), la.item(), lf.item()};
}

}  // namespace fcdm::losses
