#pragma once

#include "fcdm/tensor.hpp"

// Differentiable sinogram losses. Inputs are [A, D] or [1, A, D] tensors.
namespace fcdm::losses {

struct LossWeights {
  double w_pixel = 1.0;
  double w_absorp = 0.1;
  double w_freq = 0.1;
};

/// Mean squared error.
Tensor pixel_loss(const Tensor& pred, const Tensor& truth);

/// (mean over angles of the detector sums - total absorption of the ramp
/// FBP reconstruction of `pred`)^2. Both terms come from `pred`.
Tensor absorp_sum_loss(const Tensor& pred);

/// Sum over all bins of |F(pred) - F(truth)|^2 with F the unnormalized 2-D
/// DFT.
Tensor freq_loss(const Tensor& pred, const Tensor& truth);

struct LossBreakdown {
  Tensor total;
  double pixel = 0.0;
  double absorp = 0.0;
  double freq = 0.0;
};

LossBreakdown total_loss(const Tensor& pred, const Tensor& truth, const LossWeights& weights = {});

}  // namespace fcdm::losses
