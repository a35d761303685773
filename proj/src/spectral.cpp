#include "fcdm/spectral.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fcdm/error.hpp"

namespace fcdm::spectral {

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "gelu") return Activation::gelu;
  throw ContractViolation("unknown activation '" + name + "' (expected identity|gelu)");
}

std::string to_string(Activation a) { return a == Activation::gelu ? "gelu" : "identity"; }

Tensor delta_kernel(std::size_t channels, std::size_t length) {
  std::vector<double> v(2 * channels * length, 0.0);
  std::fill(v.begin(), v.begin() + static_cast<long>(channels * length), 1.0);
  return Tensor::from({2 * channels, length}, std::move(v));
}

Tensor kernel_from_spatial(const Tensor& spatial) {
  if (spatial.rank() != 2) {
    throw ContractViolation("kernel_from_spatial: expected [C, length], got " + shape_string(spatial.shape()));
  }
  return rfft_axis(spatial, 1);
}

FreqConvParams init_freq_params(std::size_t channels, std::size_t height, std::size_t width, Rng& rng,
                                double sigma, Activation activation) {
  auto noisy_delta = [&](std::size_t length) {
    const Tensor d = delta_kernel(channels, length);
    std::vector<double> v(d.data().begin(), d.data().end());
    for (double& x : v) x += sigma * rng.normal();
    return Tensor::from(d.shape(), std::move(v), DType::f64, true);
  };
  FreqConvParams p;
  p.kernel_w = noisy_delta(width / 2 + 1);
  p.kernel_h = noisy_delta(height / 2 + 1);
  p.activation = activation;
  return p;
}

Tensor freq_conv_axis(const Tensor& h, const Tensor& kernel, Axis axis, Activation activation) {
  if (h.rank() != 3) throw ContractViolation("freq_conv_axis: expected [C, H, W], got " + shape_string(h.shape()));
  const std::size_t ax = tensor_axis(axis);
  const std::size_t n = h.dim(ax);
  if (kernel.rank() != 2 || kernel.dim(0) != 2 * h.dim(0) || kernel.dim(1) != n / 2 + 1) {
    throw ContractViolation("freq_conv_axis: kernel " + shape_string(kernel.shape()) + " does not fit input " +
                            shape_string(h.shape()) + " along " + (axis == Axis::width ? "width" : "height"));
  }
  const Tensor spec = rfft_axis(h, ax);
  const Tensor filtered = complex_hadamard(spec, kernel, ax);
  const Tensor y = irfft_axis(filtered, ax, n);
  return activation == Activation::gelu ? gelu(y) : y;
}

Tensor freq_conv_block(const Tensor& h, const FreqConvParams& params) {
  if (!std::isfinite(params.alpha_w) || !std::isfinite(params.alpha_h)) {
    throw ContractViolation("freq_conv_block: branch weights must be finite");
  }
  std::optional<Tensor> out;
  if (params.alpha_w != 0.0) {
    out = scale(freq_conv_axis(h, params.kernel_w, Axis::width, params.activation), params.alpha_w);
  }
  if (params.alpha_h != 0.0) {
    Tensor yh = scale(freq_conv_axis(h, params.kernel_h, Axis::height, params.activation), params.alpha_h);
    out = out ? add(*out, yh) : yh;
  }
  return out ? *out : scale(h, 0.0);
}

Tensor direct_circular_conv(const Tensor& h, const Tensor& spatial_kernel, Axis axis) {
  if (h.rank() != 3) throw ContractViolation("direct_circular_conv: expected [C, H, W]");
  const std::size_t C = h.dim(0), H = h.dim(1), W = h.dim(2);
  const std::size_t len = axis == Axis::width ? W : H;
  if (spatial_kernel.rank() != 2 || spatial_kernel.dim(0) != C || spatial_kernel.dim(1) > len) {
    throw ContractViolation("direct_circular_conv: kernel " + shape_string(spatial_kernel.shape()) +
                            " does not fit " + shape_string(h.shape()));
  }
  const std::size_t taps = spatial_kernel.dim(1);
  const auto x = h.data();
  const auto k = spatial_kernel.data();
  std::vector<double> out(h.numel(), 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t w = 0; w < W; ++w) {
        const std::size_t pos = axis == Axis::width ? w : y;
        double acc = 0.0;
        for (std::size_t j = 0; j < taps; ++j) {
          const std::size_t src = (pos + len - j) % len;
          const std::size_t idx = axis == Axis::width ? (c * H + y) * W + src : (c * H + src) * W + w;
          acc += k[c * taps + j] * x[idx];
        }
        out[(c * H + y) * W + w] = acc;
      }
    }
  }
  return Tensor::from(h.shape(), std::move(out));
}

namespace {

template <typename F>
double best_ms(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < std::max(1, repeats); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

std::vector<BenchRow> bench_conv(const std::vector<BenchSize>& sizes, std::uint64_t seed, int repeats) {
  if (sizes.empty()) throw ContractViolation("bench_conv: no sizes given");
  Rng rng(seed);
  std::vector<BenchRow> rows;
  for (const BenchSize& s : sizes) {
    if (s.channels == 0 || s.height == 0 || s.width < 2 || s.taps == 0 || s.taps > s.width) {
      throw ContractViolation("bench_conv: invalid size (need C, H >= 1, W >= 2, 1 <= k <= W)");
    }
    std::vector<double> xv(s.channels * s.height * s.width), kv(s.channels * s.taps);
    for (double& v : xv) v = rng.uniform(-1.0, 1.0);
    for (double& v : kv) v = rng.uniform(-1.0, 1.0);
    const Tensor x = Tensor::from({s.channels, s.height, s.width}, xv);
    const Tensor k = Tensor::from({s.channels, s.taps}, kv);
    std::vector<double> padded(s.channels * s.width, 0.0);
    for (std::size_t c = 0; c < s.channels; ++c) {
      std::copy_n(kv.begin() + static_cast<long>(c * s.taps), s.taps, padded.begin() + static_cast<long>(c * s.width));
    }
    const Tensor freq = kernel_from_spatial(Tensor::from({s.channels, s.width}, padded));

    const Tensor direct = direct_circular_conv(x, k, Axis::width);
    const Tensor viafft = freq_conv_axis(x, freq, Axis::width, Activation::identity);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < direct.numel(); ++i) {
      num = std::max(num, std::abs(direct[i] - viafft[i]));
      den = std::max(den, std::abs(direct[i]));
    }
    BenchRow row;
    row.size = s;
    row.max_rel_diff = num / std::max(den, 1e-300);
    if (row.max_rel_diff > 1e-5) {
      throw NumericalError("bench_conv: direct and FFT paths disagree (" + std::to_string(row.max_rel_diff) + ")");
    }
    row.t_direct_ms = best_ms(repeats, [&] { (void)direct_circular_conv(x, k, Axis::width); });
    row.t_fft_ms = best_ms(repeats, [&] { (void)freq_conv_axis(x, freq, Axis::width, Activation::identity); });

    const double C = double(s.channels), k2 = double(s.taps * s.taps), r2 = 4.0;
    const double area = double(s.height * s.width) / r2;
    row.o_down = 2.0 * C * area;
    row.o_s = C * C * k2 * area;
    row.o_f = C * area * std::log2(std::max(area, 2.0)) + C * area;
    row.o_r = 2.0 * C * C * k2 * area;
    // Two stride-2 3x3 layers, C -> C channels, on the downsampled map.
    row.o_e = C * C * 9.0 * (area / 4.0) + C * C * 9.0 * (area / 16.0);
    rows.push_back(row);
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "C,H,W,k,t_direct_ms,t_fft_ms,o_terms\n";
  for (const BenchRow& r : rows) {
    char terms[256];
    std::snprintf(terms, sizeof terms, "down=%.6g;s=%.6g;f=%.6g;r=%.6g;e=%.6g", r.o_down, r.o_s, r.o_f, r.o_r,
                  r.o_e);
    char line[512];
    std::snprintf(line, sizeof line, "%zu,%zu,%zu,%zu,%.6f,%.6f,%s\n", r.size.channels, r.size.height,
                  r.size.width, r.size.taps, r.t_direct_ms, r.t_fft_ms, terms);
    os << line;
  }
  return os.str();
}

}  // namespace fcdm::spectral
