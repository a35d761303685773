#include "fcdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fcdm/error.hpp"

namespace fcdm::metrics {
namespace {

void require_same(const Plane& a, const Plane& b) {
  if (a.rows != b.rows || a.cols != b.cols || a.values.size() != b.values.size() ||
      a.values.size() != a.rows * a.cols || a.values.empty()) {
    throw ContractViolation("metric: shape mismatch (" + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                            " vs " + std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")");
  }
}

void require_range(double data_range) {
  if (!(data_range > 0.0)) throw ContractViolation("metric: data_range must be positive");
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w1(size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    w1[i] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  std::vector<double> w(size * size);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      w[i * size + j] = w1[i] * w1[j];
      total += w[i * size + j];
    }
  }
  for (double& v : w) v /= total;
  return w;
}

Sinogram stack_rows(const Sinogram& s, const masking::MaskSpec& mask) {
  Sinogram out(mask.masked.size(), s.n_detectors);
  for (std::size_t i = 0; i < mask.masked.size(); ++i) {
    const auto src = s.row(mask.masked[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

Plane plane(const Sinogram& s) { return {s.values, s.n_angles, s.n_detectors}; }
Plane plane(const Image& img) { return {img.pixels, img.size, img.size}; }

double ssim(const Plane& a, const Plane& b, double data_range) {
  require_same(a, b);
  require_range(data_range);
  std::size_t win = std::min<std::size_t>({7, a.rows, a.cols});
  if (win % 2 == 0) --win;
  const std::vector<double> w = gaussian_window(win, 1.5);
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + win <= a.rows; ++y) {
    for (std::size_t x = 0; x + win <= a.cols; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t i = 0; i < win; ++i) {
        for (std::size_t j = 0; j < win; ++j) {
          const double wt = w[i * win + j];
          const double va = a.values[(y + i) * a.cols + x + j];
          const double vb = b.values[(y + i) * b.cols + x + j];
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      }
      const double var_a = saa - ma * ma;
      const double var_b = sbb - mb * mb;
      const double cov = sab - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double psnr(const Plane& a, const Plane& b, double data_range) {
  require_same(a, b);
  require_range(data_range);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.values.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(data_range * data_range / mse);
}

MaskedScores eval_masked(const Sinogram& pred, const Sinogram& truth, const masking::MaskSpec& mask,
                         double data_range) {
  if (pred.n_angles != truth.n_angles || pred.n_detectors != truth.n_detectors) {
    throw ContractViolation("eval_masked: prediction and truth shapes differ");
  }
  if (mask.n_angles != truth.n_angles) throw ContractViolation("eval_masked: mask does not match sinogram");
  if (mask.masked.empty()) throw ContractViolation("eval_masked: empty mask, nothing to evaluate");
  const Sinogram p = stack_rows(pred, mask);
  const Sinogram t = stack_rows(truth, mask);
  return {ssim(plane(p), plane(t), data_range), psnr(plane(p), plane(t), data_range)};
}

MaskedScores eval_masked_normalized(const Sinogram& pred, const Sinogram& truth, const masking::MaskSpec& mask) {
  const double peak = truth.values.empty() ? 0.0 : *std::max_element(truth.values.begin(), truth.values.end());
  const double inv = peak > 0.0 ? 1.0 / peak : 1.0;
  Sinogram p = pred, t = truth;
  for (double& v : p.values) v *= inv;
  for (double& v : t.values) v *= inv;
  return eval_masked(p, t, mask, 1.0);
}

}  // namespace fcdm::metrics
