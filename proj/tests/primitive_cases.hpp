#pragma once

#include <array>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "test_util.hpp"

namespace fcdm::testing {

struct PrimitiveCase {
  std::string name;
  Shape shape;
  std::function<Tensor(const Tensor&)> apply;
};

inline void PrintTo(const PrimitiveCase& pc, std::ostream* os) { *os << pc.name; }

inline Tensor fixed(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  return random_tensor(std::move(s), rng);
}

inline std::vector<PrimitiveCase> primitive_cases() {
  return {
      {"add", {6}, [](const Tensor& x) { return add(x, fixed({6}, 1)); }},
      {"sub", {6}, [](const Tensor& x) { return sub(fixed({6}, 1), x); }},
      {"mul", {6}, [](const Tensor& x) { return mul(x, x); }},
      {"scale", {6}, [](const Tensor& x) { return scale(x, -2.5); }},
      {"sum", {6}, [](const Tensor& x) { return square(sum(x)); }},
      {"mean", {6}, [](const Tensor& x) { return square(mean(x)); }},
      {"square", {6}, [](const Tensor& x) { return square(x); }},
      {"matvec", {4}, [](const Tensor& x) { return matvec(fixed({3, 4}, 2), x); }},
      {"matvec_matrix", {3, 4}, [](const Tensor& m) { return matvec(m, fixed({4}, 3)); }},
      {"reshape", {2, 6}, [](const Tensor& x) { return square(reshape(x, {3, 4})); }},
      {"conv2d", {2, 6, 6}, [](const Tensor& x) { return conv2d(x, fixed({3, 2, 3, 3}, 4), fixed({3}, 5), 2, 1); }},
      {"conv2d_weight", {3, 2, 3, 3},
       [](const Tensor& w) { return conv2d(fixed({2, 6, 6}, 6), w, std::nullopt, 1, 1); }},
      {"conv2d_bias", {3}, [](const Tensor& b) { return square(conv2d(fixed({2, 5, 5}, 7), fixed({3, 2, 3, 3}, 8), b, 2, 1)); }},
      {"conv2d_transpose", {3, 3, 3},
       [](const Tensor& x) { return conv2d_transpose(x, fixed({3, 2, 3, 3}, 9), fixed({2}, 10), 2, 1, 1); }},
      {"conv2d_transpose_weight", {3, 2, 3, 3},
       [](const Tensor& w) { return conv2d_transpose(fixed({3, 3, 3}, 11), w, std::nullopt, 2, 1, 1); }},
      {"gelu", {12}, [](const Tensor& x) { return gelu(scale(x, 2.0)); }},
      {"sigmoid", {12}, [](const Tensor& x) { return sigmoid(scale(x, 2.0)); }},
      {"concat_channels", {2, 3, 3},
       [](const Tensor& x) {
         const std::array<Tensor, 2> parts{x, square(x)};
         return concat_channels(parts);
       }},
      {"split_channels", {4, 3, 3}, [](const Tensor& x) { return split_channels(x, 1, 2); }},
      {"slice_rows", {2, 6, 3}, [](const Tensor& x) { return slice_rows(x, 2, 3); }},
      {"pad_rows", {2, 3, 3}, [](const Tensor& x) { return square(pad_rows(x, 1, 2)); }},
      {"rfft_axis_w", {2, 4, 8}, [](const Tensor& x) { return rfft_axis(x, 2); }},
      {"rfft_axis_h", {2, 6, 3}, [](const Tensor& x) { return rfft_axis(x, 1); }},
      {"irfft_axis_w", {4, 3, 5}, [](const Tensor& x) { return irfft_axis(x, 2, 8); }},
      {"irfft_axis_h_odd", {4, 4, 3}, [](const Tensor& x) { return irfft_axis(x, 1, 7); }},
      {"fft_axis", {4, 4, 6}, [](const Tensor& x) { return fft_axis(x, 2, false); }},
      {"fft_axis_inverse", {4, 6, 4}, [](const Tensor& x) { return fft_axis(x, 1, true); }},
      {"complex_hadamard", {4, 3, 5},
       [](const Tensor& x) { return complex_hadamard(x, fixed({4, 5}, 12), 2); }},
      {"complex_hadamard_kernel", {4, 3},
       [](const Tensor& k) { return complex_hadamard(fixed({4, 3, 5}, 13), k, 1); }},
  };
}

}  // namespace fcdm::testing
