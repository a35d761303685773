#include <gtest/gtest.h>

#include "fcdm/error.hpp"
#include "fcdm/losses.hpp"
#include "fcdm/phantom.hpp"
#include "fcdm/radon.hpp"
#include "test_util.hpp"

using namespace fcdm;
using namespace fcdm::losses;
using fcdm::testing::random_tensor;

namespace {

// Reference value for project(shepp_logan(64), 90). The mean angle sum is
// ~5.1e2, so this is ~5e-6 of its square.
constexpr double kSheppAbsorpRegression = 1.439723394;

double spatial_sse(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

TEST(PixelLoss, Examples) {
  Rng rng(1);
  const Tensor a = random_tensor({1, 8, 8}, rng), b = random_tensor({1, 8, 8}, rng);
  EXPECT_EQ(pixel_loss(a, a).item(), 0.0);
  EXPECT_NEAR(pixel_loss(add(a, Tensor::full({1, 8, 8}, 0.1)), a).item(), 0.01, 1e-15);
  EXPECT_EQ(pixel_loss(a, b).item(), pixel_loss(b, a).item());
  EXPECT_THROW(pixel_loss(a, Tensor::zeros({1, 8, 4})), ContractViolation);
}

TEST(AbsorpLoss, ZeroAndHomogeneity) {
  EXPECT_EQ(absorp_sum_loss(Tensor::zeros({1, 16, 16})).item(), 0.0);
  Rng rng(2);
  const Tensor s = random_tensor({1, 16, 16}, rng, 0.0, 1.0);
  EXPECT_EQ(absorp_sum_loss(scale(s, 2.0)).item(), 4.0 * absorp_sum_loss(s).item());
}

TEST(AbsorpLoss, ConsistentSinogramIsSmall) {
  const Image img = phantom::shepp_logan(64);
  const Sinogram s = radon::project(img, 90);
  const double loss = absorp_sum_loss(to_tensor(s)).item();
  double mean_sum = 0.0;
  for (double v : radon::angle_sums(s)) mean_sum += v / 90.0;
  EXPECT_NEAR(loss, kSheppAbsorpRegression, 1e-6 * kSheppAbsorpRegression);
  EXPECT_LT(loss, 1e-3 * mean_sum * mean_sum);
}

TEST(AbsorpLoss, MatchesDirectComposition) {
  const Sinogram s = radon::project(phantom::shepp_logan(32), 24);
  double mean_sum = 0.0;
  for (double v : radon::angle_sums(s)) mean_sum += v / 24.0;
  const double mass = radon::total_absorption(radon::fbp(s));
  EXPECT_NEAR(absorp_sum_loss(to_tensor(s)).item(), (mean_sum - mass) * (mean_sum - mass), 1e-9);
}

TEST(FreqLoss, IdenticalIsZero) {
  Rng rng(3);
  const Tensor a = random_tensor({1, 8, 12}, rng);
  EXPECT_EQ(freq_loss(a, a).item(), 0.0);
}

TEST(FreqLoss, Parseval) {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const Tensor a = random_tensor({1, 64, 64}, rng), b = random_tensor({1, 64, 64}, rng);
    const double expected = 64.0 * 64.0 * spatial_sse(a, b);
    EXPECT_NEAR(freq_loss(a, b).item(), expected, 1e-6 * expected);
  }
}

TEST(FreqLoss, SingleEntryDifference) {
  const Tensor a = Tensor::zeros({1, 6, 10});
  std::vector<double> v(60, 0.0);
  v[17] = 0.3;
  const Tensor b = Tensor::from({1, 6, 10}, v);
  EXPECT_NEAR(freq_loss(a, b).item(), 60.0 * 0.09, 1e-12);
}

TEST(FreqLoss, AcceptsRankTwo) {
  Rng rng(5);
  const Tensor a = random_tensor({6, 8}, rng), b = random_tensor({6, 8}, rng);
  EXPECT_NEAR(freq_loss(a, b).item(), 48.0 * spatial_sse(a, b), 1e-9);
}

TEST(TotalLoss, DefaultsAndPixelOnly) {
  const LossWeights w;
  EXPECT_EQ(w.w_pixel, 1.0);
  EXPECT_EQ(w.w_absorp, 0.1);
  EXPECT_EQ(w.w_freq, 0.1);
  Rng rng(6);
  const Tensor a = random_tensor({1, 16, 16}, rng), b = random_tensor({1, 16, 16}, rng);
  EXPECT_EQ(total_loss(a, b, {1.0, 0.0, 0.0}).total.item(), pixel_loss(a, b).item());
}

TEST(TotalLoss, Decomposition) {
  const Tensor s = to_tensor(radon::project(phantom::shepp_logan(16), 16));
  const LossBreakdown r = total_loss(s, s);
  EXPECT_EQ(r.pixel, 0.0);
  EXPECT_EQ(r.freq, 0.0);
  EXPECT_EQ(r.absorp, absorp_sum_loss(s).item());
  EXPECT_DOUBLE_EQ(r.total.item(), 0.1 * r.absorp);
}

TEST(TotalLoss, WeightedSum) {
  Rng rng(7);
  const Tensor a = random_tensor({1, 16, 16}, rng), b = random_tensor({1, 16, 16}, rng);
  const LossBreakdown r = total_loss(a, b, {0.5, 0.2, 0.3});
  EXPECT_NEAR(r.total.item(), 0.5 * r.pixel + 0.2 * r.absorp + 0.3 * r.freq, 1e-9 * r.total.item());
  EXPECT_THROW(total_loss(a, b, {1.0, -0.1, 0.1}), ContractViolation);
}

TEST(TotalLoss, NonNegative) {
  Rng rng(8);
  for (int i = 0; i < 5; ++i) {
    const Tensor a = random_tensor({1, 8, 8}, rng), b = random_tensor({1, 8, 8}, rng);
    const LossBreakdown r = total_loss(a, b);
    EXPECT_GE(r.pixel, 0.0);
    EXPECT_GE(r.absorp, 0.0);
    EXPECT_GE(r.freq, 0.0);
  }
}

TEST(TotalLoss, GradcheckThroughFbp) {
  Rng rng(9);
  const Tensor truth = random_tensor({1, 16, 16}, rng, 0.0, 1.0);
  const Tensor pred = random_tensor({1, 16, 16}, rng, 0.0, 1.0);
  const auto r = gradcheck([&](const Tensor& p) { return total_loss(p, truth).total; }, pred);
  EXPECT_TRUE(r.finite);
  EXPECT_LE(r.max_rel_error, 1e-3);
}

TEST(AbsorpLoss, Gradcheck) {
  Rng rng(10);
  const Tensor pred = random_tensor({1, 16, 16}, rng, 0.0, 1.0);
  EXPECT_LE(gradcheck([](const Tensor& p) { return absorp_sum_loss(p); }, pred).max_rel_error, 1e-3);
}
