#include "fcdm/radon.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "fcdm/error.hpp"
#include "fcdm/fft.hpp"

namespace fcdm::radon {
namespace {

double bilinear(const Image& img, double row, double col) {
  const double fr = std::floor(row), fc = std::floor(col);
  const long r0 = static_cast<long>(fr), c0 = static_cast<long>(fc);
  const double wr = row - fr, wc = col - fc;
  const long n = static_cast<long>(img.size);
  auto px = [&](long r, long c) {
    return (r < 0 || c < 0 || r >= n || c >= n) ? 0.0 : img.pixels[static_cast<std::size_t>(r * n + c)];
  };
  return (1 - wr) * ((1 - wc) * px(r0, c0) + wc * px(r0, c0 + 1)) +
         wr * ((1 - wc) * px(r0 + 1, c0) + wc * px(r0 + 1, c0 + 1));
}

std::size_t padded_length(std::size_t detectors) { return std::bit_ceil(2 * detectors); }

/// Filters each of the A rows in place (zero-pad, multiply, crop).
void filter_rows(std::vector<double>& values, std::size_t n_angles, std::size_t n_det, Filter filter) {
  const std::size_t P = padded_length(n_det);
  const std::vector<double> response = filter_response(P, filter);
  std::vector<double> line(P);
  std::vector<fft::Complex> spec(fft::half_bins(P));
  for (std::size_t a = 0; a < n_angles; ++a) {
    std::fill(line.begin(), line.end(), 0.0);
    std::copy_n(values.begin() + static_cast<long>(a * n_det), n_det, line.begin());
    fft::rfft(line, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= response[k];
    fft::irfft(spec, line);
    std::copy_n(line.begin(), n_det, values.begin() + static_cast<long>(a * n_det));
  }
}

/// Visits every (pixel, angle) pair inside the reconstruction circle with
/// the two detector taps and their bilinear weights. Taps falling outside
/// [0, D) are reported with weight 0.
template <typename Visit>
void for_each_tap(std::size_t n_angles, std::size_t n, Visit&& visit) {
  const double c0 = (static_cast<double>(n) - 1.0) / 2.0;
  const double radius = static_cast<double>(n) / 2.0;
  std::vector<double> cs(n_angles), sn(n_angles);
  for (std::size_t a = 0; a < n_angles; ++a) {
    cs[a] = std::cos(angle(a, n_angles));
    sn[a] = std::sin(angle(a, n_angles));
  }
  const long last = static_cast<long>(n) - 1;
  for (std::size_t r = 0; r < n; ++r) {
    const double y = c0 - static_cast<double>(r);
    for (std::size_t c = 0; c < n; ++c) {
      const double x = static_cast<double>(c) - c0;
      if (x * x + y * y > radius * radius) continue;
      const std::size_t pixel = r * n + c;
      for (std::size_t a = 0; a < n_angles; ++a) {
        const double t = x * cs[a] + y * sn[a] + c0;
        const double ft = std::floor(t);
        const long i0 = static_cast<long>(ft);
        const double w1 = t - ft;
        const double w0 = 1.0 - w1;
        const bool ok0 = i0 >= 0 && i0 <= last;
        const bool ok1 = i0 + 1 >= 0 && i0 + 1 <= last;
        visit(pixel, a, ok0 ? static_cast<std::size_t>(i0) : 0, ok0 ? w0 : 0.0,
              ok1 ? static_cast<std::size_t>(i0 + 1) : 0, ok1 ? w1 : 0.0);
      }
    }
  }
}

void check_sino(std::size_t n_angles, std::size_t n_det) {
  if (n_angles < 1 || n_det < 2) throw ContractViolation("sinogram must have at least 1 angle and 2 detectors");
}

std::vector<double> fbp_forward(std::span<const double> sino, std::size_t n_angles, std::size_t n_det,
                                Filter filter) {
  check_sino(n_angles, n_det);
  std::vector<double> q(sino.begin(), sino.end());
  filter_rows(q, n_angles, n_det, filter);
  std::vector<double> img(n_det * n_det, 0.0);
  const double scale = std::numbers::pi / (2.0 * static_cast<double>(n_angles));
  for_each_tap(n_angles, n_det, [&](std::size_t p, std::size_t a, std::size_t i0, double w0, std::size_t i1, double w1) {
    img[p] += scale * (w0 * q[a * n_det + i0] + w1 * q[a * n_det + i1]);
  });
  return img;
}

}  // namespace

Filter parse_filter(const std::string& name) {
  if (name == "ramp") return Filter::ramp;
  if (name == "hann") return Filter::hann;
  throw ContractViolation("unknown filter '" + name + "' (expected ramp|hann)");
}

double angle(std::size_t index, std::size_t n_angles) {
  return std::numbers::pi * static_cast<double>(index) / static_cast<double>(n_angles);
}

std::vector<double> filter_response(std::size_t padded, Filter filter) {
  // Ram-Lak built from its band-limited spatial kernel: h[0] = 1/4,
  // h[n odd] = -1 / (pi n)^2, h[n even] = 0; response = 2 Re FFT(h).
  std::vector<double> h(padded, 0.0);
  h[0] = 0.25;
  for (std::size_t i = 1; i < padded; ++i) {
    const long n = i <= padded / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(padded);
    if (n % 2 != 0) h[i] = -1.0 / (std::numbers::pi * std::numbers::pi * double(n) * double(n));
  }
  std::vector<fft::Complex> spec(fft::half_bins(padded));
  fft::rfft(h, spec);
  std::vector<double> response(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    response[k] = 2.0 * spec[k].real();
    if (filter == Filter::hann) {
      const double f = static_cast<double>(k) / static_cast<double>(padded);
      response[k] *= 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * f));
    }
  }
  return response;
}

Sinogram project(const Image& image, std::size_t n_angles) {
  if (n_angles < 2) throw ContractViolation("project: need at least 2 angles");
  if (image.size < 2) throw ContractViolation("project: empty image");
  const std::size_t n = image.size;
  const double c0 = (static_cast<double>(n) - 1.0) / 2.0;
  const double radius = static_cast<double>(n) / 2.0;
  Sinogram sino(n_angles, n);
  for (std::size_t a = 0; a < n_angles; ++a) {
    const double th = angle(a, n_angles);
    const double cs = std::cos(th), sn = std::sin(th);
    for (std::size_t j = 0; j < n; ++j) {
      const double s = static_cast<double>(j) - c0;
      if (std::abs(s) >= radius) continue;
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) - c0;
        const double x = s * cs - t * sn;
        const double y = s * sn + t * cs;
        acc += bilinear(image, c0 - y, x + c0);
      }
      sino.at(a, j) = acc;
    }
  }
  return sino;
}

std::vector<double> angle_sums(const Sinogram& sino) {
  std::vector<double> sums(sino.n_angles, 0.0);
  for (std::size_t a = 0; a < sino.n_angles; ++a) {
    for (double v : sino.row(a)) sums[a] += v;
  }
  return sums;
}

double total_absorption(const Image& image) {
  const double c0 = (static_cast<double>(image.size) - 1.0) / 2.0;
  const double radius = static_cast<double>(image.size) / 2.0;
  double total = 0.0;
  for (std::size_t r = 0; r < image.size; ++r) {
    for (std::size_t c = 0; c < image.size; ++c) {
      const double x = static_cast<double>(c) - c0, y = c0 - static_cast<double>(r);
      if (x * x + y * y <= radius * radius) total += image.at(r, c);
    }
  }
  return total;
}

Image fbp(const Sinogram& sino, Filter filter) {
  Image img(sino.n_detectors);
  img.pixels = fbp_forward(sino.values, sino.n_angles, sino.n_detectors, filter);
  return img;
}

std::vector<double> fbp_adjoint(std::span<const double> image, std::size_t n_angles, std::size_t n_det,
                                Filter filter) {
  check_sino(n_angles, n_det);
  if (image.size() != n_det * n_det) throw ContractViolation("fbp_adjoint: image size mismatch");
  std::vector<double> q(n_angles * n_det, 0.0);
  const double scale = std::numbers::pi / (2.0 * static_cast<double>(n_angles));
  for_each_tap(n_angles, n_det, [&](std::size_t p, std::size_t a, std::size_t i0, double w0, std::size_t i1, double w1) {
    q[a * n_det + i0] += scale * w0 * image[p];
    q[a * n_det + i1] += scale * w1 * image[p];
  });
  // pad -> real even response -> crop is a symmetric operator.
  filter_rows(q, n_angles, n_det, filter);
  return q;
}

Tensor fbp(const Tensor& sino, Filter filter) {
  std::size_t n_angles = 0, n_det = 0;
  if (sino.rank() == 2) {
    n_angles = sino.dim(0);
    n_det = sino.dim(1);
  } else if (sino.rank() == 3 && sino.dim(0) == 1) {
    n_angles = sino.dim(1);
    n_det = sino.dim(2);
  } else {
    throw ContractViolation("fbp: expected [A, D] or [1, A, D], got " + shape_string(sino.shape()));
  }
  return apply_linear(
      "fbp", sino, {1, n_det, n_det},
      [=](std::span<const double> in) { return fbp_forward(in, n_angles, n_det, filter); },
      [=](std::span<const double> g) { return fbp_adjoint(g, n_angles, n_det, filter); });
}

}  // namespace fcdm::radon
