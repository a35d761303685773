#include <gtest/gtest.h>

#include <cmath>

#include "fcdm/error.hpp"
#include "fcdm/masking.hpp"
#include "fcdm/metrics.hpp"
#include "test_util.hpp"

using namespace fcdm;
using namespace fcdm::metrics;

namespace {

Image random_image(std::size_t n, Rng& rng) {
  Image img(n);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

// Direct-definition SSIM: for every fully contained 7x7 window, Gaussian
// weighted statistics computed straight from the pixels.
double ssim_oracle(const Image& a, const Image& b) {
  const int win = 7, half = 3;
  double g[7], total = 0.0;
  for (int i = 0; i < win; ++i) {
    g[i] = std::exp(-double((i - half) * (i - half)) / (2.0 * 1.5 * 1.5));
  }
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) total += g[i] * g[j];
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int n = int(a.size);
  double acc = 0.0;
  int count = 0;
  for (int r = 0; r + win <= n; ++r) {
    for (int c = 0; c + win <= n; ++c) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < win; ++i) {
        for (int j = 0; j < win; ++j) {
          const double w = g[i] * g[j] / total;
          const double x = a.at(r + i, c + j), y = b.at(r + i, c + j);
          ma += w * x;
          mb += w * y;
          saa += w * x * x;
          sbb += w * y * y;
          sab += w * x * y;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return acc / count;
}

}  // namespace

TEST(Ssim, IdenticalIsOne) {
  Rng rng(1);
  const Image a = random_image(32, rng);
  EXPECT_EQ(ssim(plane(a), plane(a)), 1.0);
}

TEST(Ssim, ConstantImagesClosedForm) {
  Image zero(16), one(16);
  for (double& v : one.pixels) v = 1.0;
  const double c1 = 1e-4;
  EXPECT_NEAR(ssim(plane(zero), plane(one)), c1 / (1.0 + c1), 1e-15);
}

TEST(Ssim, MatchesDirectOracle) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Image a = random_image(64, rng);
    Image b = a;
    for (double& v : b.pixels) v = std::clamp(v + rng.uniform(-0.2, 0.2), 0.0, 1.0);
    EXPECT_NEAR(ssim(plane(a), plane(b)), ssim_oracle(a, b), 1e-4);
  }
}

TEST(Ssim, Symmetric) {
  Rng rng(3);
  const Image a = random_image(24, rng), b = random_image(24, rng);
  EXPECT_NEAR(ssim(plane(a), plane(b)), ssim(plane(b), plane(a)), 1e-12);
}

TEST(Ssim, ShapeMismatchAndRange) {
  const Image a(16), b(8);
  EXPECT_THROW(ssim(plane(a), plane(b)), ContractViolation);
  EXPECT_THROW(ssim(plane(a), plane(a), 0.0), ContractViolation);
}

TEST(Psnr, Examples) {
  Image a(10), b(10);
  for (double& v : b.pixels) v = 0.1;  // MSE 0.01
  EXPECT_NEAR(psnr(plane(a), plane(b)), 20.0, 1e-12);
  EXPECT_EQ(psnr(plane(a), plane(a)), kPsnrIdentical);
  Image c(10);
  for (double& v : c.pixels) v = 0.05;
  EXPECT_NEAR(psnr(plane(a), plane(c)) - psnr(plane(a), plane(b)), 20.0 * std::log10(2.0), 1e-12);
}

TEST(Psnr, DecreasesWithError) {
  Image a(8);
  double previous = 1e9;
  for (int k = 1; k <= 10; ++k) {
    Image b(8);
    for (double& v : b.pixels) v = 0.02 * k;
    const double p = psnr(plane(a), plane(b));
    EXPECT_LT(p, previous);
    previous = p;
  }
}

TEST(EvalMasked, OnlyMaskedRowsCount) {
  Rng rng(4);
  Sinogram truth(16, 12), pred(16, 12);
  for (double& v : truth.values) v = rng.uniform();
  pred = truth;
  const auto mask = masking::sample_mask(16, 0.5, 3);
  for (std::size_t r = 0; r < 16; ++r) {
    if (mask.contains(r)) continue;
    for (double& v : pred.row(r)) v = rng.uniform(-5.0, 5.0);
  }
  const auto s = eval_masked(pred, truth, mask);
  EXPECT_EQ(s.ssim, 1.0);
  EXPECT_EQ(s.psnr, kPsnrIdentical);
}

TEST(EvalMasked, PsnrEqualsStackedPsnr) {
  Rng rng(5);
  Sinogram truth(10, 8), pred(10, 8);
  for (double& v : truth.values) v = rng.uniform();
  for (double& v : pred.values) v = rng.uniform();
  const auto mask = masking::sample_mask(10, 0.4, 1);
  std::vector<double> ta, pa;
  for (std::size_t r : mask.masked) {
    ta.insert(ta.end(), truth.row(r).begin(), truth.row(r).end());
    pa.insert(pa.end(), pred.row(r).begin(), pred.row(r).end());
  }
  const Plane pt{ta, mask.masked.size(), 8}, pp{pa, mask.masked.size(), 8};
  const auto s = eval_masked(pred, truth, mask);
  EXPECT_EQ(s.psnr, psnr(pp, pt));
  EXPECT_EQ(s.ssim, ssim(pp, pt));
}

TEST(EvalMasked, SingleRowStrip) {
  Rng rng(6);
  Sinogram truth(12, 16), pred(12, 16);
  for (double& v : truth.values) v = rng.uniform();
  for (double& v : pred.values) v = rng.uniform();
  masking::MaskSpec mask;
  mask.n_angles = 12;
  mask.masked = {5};
  const auto s = eval_masked(pred, truth, mask);
  EXPECT_TRUE(std::isfinite(s.ssim));
  EXPECT_TRUE(std::isfinite(s.psnr));
  EXPECT_LE(s.ssim, 1.0);
}

TEST(EvalMasked, EmptyMaskRejected) {
  Sinogram s(4, 4);
  masking::MaskSpec mask;
  mask.n_angles = 4;
  EXPECT_THROW(eval_masked(s, s, mask), ContractViolation);
}

TEST(EvalMasked, NormalizedDividesByTruthPeak) {
  Rng rng(7);
  Sinogram truth(16, 16), pred(16, 16);
  for (double& v : truth.values) v = rng.uniform(0.0, 40.0);
  for (double& v : pred.values) v = rng.uniform(0.0, 40.0);
  const auto mask = masking::sample_mask(16, 0.5, 2);
  const double peak = *std::max_element(truth.values.begin(), truth.values.end());
  Sinogram tn = truth, pn = pred;
  for (double& v : tn.values) v /= peak;
  for (double& v : pn.values) v /= peak;
  const auto a = eval_masked_normalized(pred, truth, mask);
  const auto b = eval_masked(pn, tn, mask);
  EXPECT_DOUBLE_EQ(a.ssim, b.ssim);
  EXPECT_DOUBLE_EQ(a.psnr, b.psnr);
}
